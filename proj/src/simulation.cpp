#include "aplm/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "aplm/error.hpp"
#include "aplm/inference.hpp"
#include "aplm/parallel.hpp"
#include "aplm/random.hpp"
#include "aplm/subpop_fitter.hpp"

namespace aplm {

std::string to_string(BetaScheme scheme) {
  switch (scheme) {
    case BetaScheme::heterogeneous: return "heterogeneous";
    case BetaScheme::homogeneous: return "homogeneous";
    case BetaScheme::shifted: return "shifted";
  }
  return "unknown";
}

BetaScheme parse_beta_scheme(std::string_view name) {
  if (name == "heterogeneous") return BetaScheme::heterogeneous;
  if (name == "homogeneous") return BetaScheme::homogeneous;
  if (name == "shifted") return BetaScheme::shifted;
  throw ConfigError("unknown beta scheme '" + std::string(name) + "'");
}

void DgpConfig::validate() const {
  if (N < 1 || s < 1) throw ConfigError("simulation needs N >= 1 and s >= 1");
  if (N % s != 0) throw ConfigError("simulation needs s to divide N");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be finite and >= 0");
  if (!std::isfinite(beta_value) || !std::isfinite(delta) || !std::isfinite(g1_shift)) {
    throw ConfigError("simulation coefficients must be finite");
  }
  if (degree < 1 || interior_knots < 0) throw ConfigError("invalid spline degree or knot count");
}

double DgpConfig::beta(int j) const {
  switch (beta_scheme) {
    case BetaScheme::heterogeneous: return static_cast<double>(j + 1);
    case BetaScheme::homogeneous: return beta_value;
    case BetaScheme::shifted: return j == 0 ? beta_value + delta : beta_value;
  }
  return beta_value;
}

double g1_true(double z) { return 5.0 * std::sin(2.0 * std::numbers::pi * (z + 1.0)); }

// The third exponent is 3 x 1.625; it is the value for which the closed-form
// constant below is the exact mean.
double g2_constant() {
  return 100.0 * (1.0 - std::exp(-3.25)) / 3.25 - 400.0 * (1.0 - std::exp(-6.5)) / 6.5 +
         300.0 * (1.0 - std::exp(-9.75)) / 9.75;
}

double g2_true(double z) {
  const double t = z + 1.0;
  return 100.0 * (std::exp(-1.625 * t) - 4.0 * std::exp(-3.25 * t) + 3.0 * std::exp(-4.875 * t)) - g2_constant();
}

SplineConfig simulation_spline_config(const DgpConfig& config) {
  SplineConfig sc;
  sc.degree = config.degree;
  sc.interior_knots = config.interior_knots;
  sc.transforms = {DomainTransform{-1.0, 2.0}, DomainTransform{-1.0, 2.0}};
  return sc;
}

Dataset generate_dataset(const DgpConfig& config, std::uint64_t replication) {
  config.validate();
  const Eigen::Index n = config.group_size();
  Dataset data;
  data.y.resize(config.N);
  data.x.resize(config.N, 1);
  data.z.resize(config.N, 2);
  data.groups.resize(static_cast<std::size_t>(config.N));
  data.x_names = {"x"};
  data.z_names = {"z1", "z2"};
  for (int j = 0; j < config.s; ++j) {
    Rng rng = Rng::stream(config.seed, {replication, static_cast<std::uint64_t>(j)});
    const double beta = config.beta(j);
    const std::string label = std::to_string(j + 1);
    for (Eigen::Index r = 0; r < n; ++r) {
      const Eigen::Index i = static_cast<Eigen::Index>(j) * n + r;
      const double z1 = rng.uniform(-1.0, 1.0);
      const double z2 = rng.uniform(-1.0, 1.0);
      const double w = rng.uniform(-1.0, 1.0);
      const double eps = rng.normal();
      const double x = 0.5 * (w + z1);
      double y = x * beta + g1_true(z1) + g2_true(z2) + config.sigma * eps;
      if (j == 0) y += config.g1_shift * (z1 + 1.0);
      data.y(i) = y;
      data.x(i, 0) = x;
      data.z(i, 0) = z1;
      data.z(i, 1) = z2;
      data.groups[static_cast<std::size_t>(i)] = label;
    }
  }
  return data;
}

namespace {

constexpr int kGridPoints = 200;

double rmse_on_grid(const AggregatedFit& agg) {
  const Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(kGridPoints, -1.0, 1.0);
  double sq = 0.0;
  double mean_sum = 0.0;
  double mean_sq_sum = 0.0;
  for (int k = 0; k < agg.K(); ++k) {
    Eigen::VectorXd err = agg.component_values(k, grid);
    for (Eigen::Index i = 0; i < grid.size(); ++i) err(i) -= k == 0 ? g1_true(grid(i)) : g2_true(grid(i));
    const double m = err.mean();
    sq += err.squaredNorm() / static_cast<double>(grid.size());
    mean_sum += m;
    mean_sq_sum += m * m;
  }
  // Mean over the product grid of (sum_k e_k)^2.
  return std::sqrt(std::max(0.0, sq + mean_sum * mean_sum - mean_sq_sum));
}

template <class Fn>
void run_test(ReplicationResult& out, TestMethod method, Fn&& fn) {
  try {
    out.tests[static_cast<std::size_t>(method)] = fn();
  } catch (const std::exception& e) {
    out.test_errors.push_back(to_string(method) + ": " + e.what());
  }
}

double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

constexpr std::size_t kMethods = 6;

}  // namespace

ReplicationResult run_replication(const DgpConfig& config, const ExperimentOptions& options,
                                  std::uint64_t replication) {
  ReplicationResult out;
  out.replication = replication;
  out.tests.resize(kMethods);
  try {
    const Dataset data = generate_dataset(config, replication);
    const auto parts = data.partition();
    const SplineBasis basis(simulation_spline_config(config));
    const auto fits = fit_all(parts, basis);
    AggregatedFit agg = aggregate_g(fits, options.weights);
    boost_all(parts, agg);
    const double sigma2 = pooled_sigma2(fits);
    out.sigma2 = sigma2;

    const Eigen::VectorXd gbar = agg.eval_rows(data.z);
    double sq = 0.0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      const double e = gbar(i) - g1_true(data.z(i, 0)) - g2_true(data.z(i, 1));
      sq += e * e;
    }
    out.rmse_empirical = std::sqrt(sq / static_cast<double>(data.rows()));
    out.rmse_grid = rmse_on_grid(agg);

    const double truth = config.beta(0);
    const CiResult c1 = ci1(fits[0], sigma2, options.level);
    const CiResult c2 = ci2(fits[0], agg.beta_breve[0], sigma2, options.level);
    out.beta_hat = fits[0].beta_hat(0);
    out.beta_breve = agg.beta_breve[0](0);
    out.ci1_covers = c1.covers(0, truth);
    out.ci2_covers = c2.covers(0, truth);
    out.ci1_length = 2.0 * c1.halfwidth(0);
    out.ci2_length = 2.0 * c2.halfwidth(0);

    const auto q = ContrastMatrix::identity(1);
    if (options.wald && parts.size() >= 2) {
      for (TestMethod m : {TestMethod::psi1, TestMethod::psi2}) {
        run_test(out, m, [&] { return psi_pairwise(fits, agg.beta_breve, 0, 1, q, sigma2, options.alpha, m); });
      }
    }
    if (options.bootstrap) {
      BootstrapOptions bo;
      bo.replicates = options.bootstrap_replicates;
      bo.alpha = options.alpha;
      bo.seed = derive_seed(config.seed, {replication, 0x626f6f74ULL});
      std::vector<Eigen::VectorXd> nulls(parts.size(), Eigen::VectorXd::Constant(1, config.beta_value));
      run_test(out, TestMethod::bootstrap_max,
               [&] { return bootstrap_max_test(agg.beta_breve, nulls, q, parts, sigma2, bo); });
      if (parts.size() >= 2) {
        run_test(out, TestMethod::bootstrap_consecutive,
                 [&] { return bootstrap_consecutive_test(agg.beta_breve, q, parts, sigma2, bo); });
      }
    }
    if (options.lrt && parts.size() >= 2) {
      run_test(out, TestMethod::lrt_component, [&] {
        return lrt_homogeneity_component(parts, fits, options.lrt_component, sigma2, options.alpha);
      });
      run_test(out, TestMethod::lrt_joint, [&] { return lrt_homogeneity_joint(parts, fits, sigma2, options.alpha); });
    }
  } catch (const std::exception& e) {
    out.error = e.what();
    if (out.error.empty()) out.error = "unknown failure";
  }
  return out;
}

const TestSummary* ExperimentReport::find(TestMethod method) const {
  for (const auto& t : tests) {
    if (t.method == method) return &t;
  }
  return nullptr;
}

ExperimentReport run_experiment(const DgpConfig& config, const ExperimentOptions& options) {
  config.validate();
  if (options.replications < 1) throw ConfigError("replications must be >= 1");
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw ConfigError("alpha must lie in (0,1)");
  if (!(options.level > 0.0 && options.level < 1.0)) throw ConfigError("confidence level must lie in (0,1)");

  ExperimentReport report;
  report.config = config;
  report.options = options;
  report.replications = options.replications;
  report.details.resize(static_cast<std::size_t>(options.replications));
  parallel_for(report.details.size(), options.threads,
               [&](std::size_t r) { report.details[r] = run_replication(config, options, r); });

  std::vector<double> rmse, beta_hat, beta_breve;
  double grid = 0.0, cov1 = 0.0, cov2 = 0.0, len1 = 0.0, len2 = 0.0, s2 = 0.0;
  for (const auto& d : report.details) {
    if (!d.ok()) {
      ++report.failures;
      continue;
    }
    rmse.push_back(d.rmse_empirical);
    beta_hat.push_back(d.beta_hat);
    beta_breve.push_back(d.beta_breve);
    grid += d.rmse_grid;
    cov1 += d.ci1_covers ? 1.0 : 0.0;
    cov2 += d.ci2_covers ? 1.0 : 0.0;
    len1 += d.ci1_length;
    len2 += d.ci2_length;
    s2 += d.sigma2;
  }
  const auto ok = static_cast<double>(rmse.size());
  if (!rmse.empty()) {
    double total = 0.0;
    for (double r : rmse) total += r;
    report.rmse_gbar = total / ok;
    report.median_rmse_gbar = median(rmse);
    report.rmse_grid = grid / ok;
    report.coverage_ci1 = cov1 / ok;
    report.coverage_ci2 = cov2 / ok;
    report.mean_len_ci1 = len1 / ok;
    report.mean_len_ci2 = len2 / ok;
    report.mean_sigma2 = s2 / ok;
    const double vh = sample_variance(beta_hat);
    report.var_ratio = vh > 0.0 ? sample_variance(beta_breve) / vh : 0.0;
  }

  for (std::size_t m = 0; m < kMethods; ++m) {
    TestSummary summary;
    summary.method = static_cast<TestMethod>(m);
    double rejects = 0.0, stat = 0.0, crit = 0.0;
    for (const auto& d : report.details) {
      if (!d.ok() || !d.tests[m]) continue;
      ++summary.runs;
      rejects += d.tests[m]->reject ? 1.0 : 0.0;
      stat += d.tests[m]->statistic;
      crit += d.tests[m]->critical_value;
      summary.dof_or_replicates = d.tests[m]->dof_or_replicates;
    }
    if (summary.runs == 0) continue;
    summary.rejection_rate = rejects / summary.runs;
    summary.mean_statistic = stat / summary.runs;
    summary.mean_critical_value = crit / summary.runs;
    report.tests.push_back(summary);
  }
  return report;
}

std::vector<ExperimentReport> run_grid(const std::vector<DgpConfig>& grid, const ExperimentOptions& options) {
  std::vector<ExperimentReport> out;
  out.reserve(grid.size());
  for (const auto& config : grid) out.push_back(run_experiment(config, options));
  return out;
}

std::vector<std::string> preset_names() { return {"smoke", "coverage", "rmse", "wald", "bootstrap", "lrt", "full"}; }

SimulationPreset simulation_preset(std::string_view name, std::uint64_t seed) {
  SimulationPreset p;
  p.name = std::string(name);
  auto base = [&](Eigen::Index N, int s) {
    DgpConfig c;
    c.N = N;
    c.s = s;
    c.seed = seed;
    return c;
  };
  if (name == "smoke") {
    auto c = base(512, 4);
    c.beta_scheme = BetaScheme::homogeneous;
    p.grid = {c};
    p.options.replications = 4;
    p.options.bootstrap = true;
    p.options.bootstrap_replicates = 100;
    p.options.lrt = true;
  } else if (name == "coverage") {
    for (int e = 2; e <= 6; ++e) p.grid.push_back(base(1 << 11, 1 << e));
    p.options.replications = 200;
  } else if (name == "rmse") {
    // s = 2^floor(log2(N) / 2) keeps log(s)/log(N) as close to 1/2 as powers of two allow.
    for (int e : {11, 12, 13}) p.grid.push_back(base(Eigen::Index{1} << e, 1 << (e / 2)));
    p.options.replications = 100;
    p.options.wald = false;
  } else if (name == "wald") {
    for (double delta : {0.0, 0.5, 1.0, 1.5}) {
      auto c = base(1 << 11, 1 << 4);
      c.beta_scheme = BetaScheme::shifted;
      c.delta = delta;
      p.grid.push_back(c);
    }
    p.options.replications = 500;
  } else if (name == "bootstrap") {
    for (double delta : {0.0, 0.4, 0.6, 1.0}) {
      auto c = base(1 << 12, 1 << 4);
      c.beta_scheme = BetaScheme::shifted;
      c.delta = delta;
      p.grid.push_back(c);
    }
    p.options.replications = 200;
    p.options.wald = false;
    p.options.bootstrap = true;
  } else if (name == "lrt") {
    for (double shift : {0.0, 0.5, 1.0, 1.5}) {
      auto c = base(1 << 13, 1 << 5);
      c.interior_knots = 4;
      c.g1_shift = shift;
      p.grid.push_back(c);
    }
    p.options.replications = 200;
    p.options.wald = false;
    p.options.lrt = true;
  } else if (name == "full") {
    for (int e = 11; e <= 14; ++e) {
      for (int k = 1; k < e; ++k) p.grid.push_back(base(Eigen::Index{1} << e, 1 << k));
    }
    p.options.replications = 200;
  } else {
    throw ConfigError("unknown simulation preset '" + std::string(name) + "'");
  }
  return p;
}

}  // namespace aplm
