// Acceptance run: one PASS/FAIL line per criterion. argv[1] is the CLI binary.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "aplm/aggregator.hpp"
#include "aplm/parallel.hpp"
#include "aplm/serialization.hpp"
#include "aplm/simulation.hpp"
#include "aplm/subpop_fitter.hpp"

using namespace aplm;
namespace fs = std::filesystem;

namespace {

std::string cli_path;
const int kThreads = resolve_threads(0);

struct Verdict {
  bool pass = false;
  std::string detail;
};

class Detail {
 public:
  template <class T>
  Detail& operator<<(const T& v) {
    os_ << v;
    return *this;
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
};

bool within(double v, double lo, double hi) { return v >= lo && v <= hi; }

double rate(const ExperimentReport& r, TestMethod m) {
  const auto* t = r.find(m);
  if (!t) throw std::runtime_error("missing test summary for " + to_string(m));
  return t->rejection_rate;
}

ExperimentReport run(DgpConfig c, ExperimentOptions o) {
  o.threads = kThreads;
  return run_experiment(c, o);
}

// Independent s = 1 oracle: design from the raw basis, centered by formula, plus ones and X.
Verdict criterion1() {
  DgpConfig c;
  c.N = 2048;
  c.s = 1;
  c.seed = 11;
  const auto data = generate_dataset(c);
  const SplineBasis basis(simulation_spline_config(c));
  const auto parts = data.partition();
  const auto fits = fit_all(parts, basis, kThreads);
  auto agg = aggregate_g(fits);

  const int raw = basis.raw_size();
  const Eigen::Index n = data.rows();
  Eigen::MatrixXd design(n, 1 + 2 * (raw - 1) + 1);
  design.col(0) = data.x.col(0);
  std::vector<Eigen::VectorXd> ratios;
  for (int k = 0; k < 2; ++k) {
    Eigen::MatrixXd b(n, raw);
    for (Eigen::Index i = 0; i < n; ++i) {
      b.row(i) = eval_raw_basis(basis.knots(), basis.config().degree, (data.z(i, k) + 1.0) / 2.0).transpose();
    }
    Eigen::VectorXd r(raw);
    for (int m = 0; m < raw; ++m) r(m) = b.col(m).mean() / b.col(0).mean();
    for (int m = 1; m < raw; ++m) design.col(1 + k * (raw - 1) + m - 1) = b.col(m) - r(m) * b.col(0);
    ratios.push_back(r);
  }
  design.col(design.cols() - 1).setOnes();
  const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(data.y);

  const double beta_rel = std::abs(fits[0].beta_hat(0) - coef(0)) / std::abs(coef(0));
  double g_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    const double z[2] = {-1.0 + 2.0 * t / 99.0, 0.7 - 1.4 * t / 99.0};
    double g = 0.0;
    for (int k = 0; k < 2; ++k) {
      const auto b = eval_raw_basis(basis.knots(), basis.config().degree, (z[k] + 1.0) / 2.0);
      for (int m = 1; m < raw; ++m) g += coef(1 + k * (raw - 1) + m - 1) * (b(m) - ratios[static_cast<std::size_t>(k)](m) * b(0));
    }
    g_err = std::max({g_err, std::abs(eval_g(fits[0], z) - g), std::abs(agg.eval(z) - g)});
  }
  return {beta_rel < 1e-10 && g_err < 1e-10, (Detail() << "beta rel diff " << beta_rel << ", max g diff " << g_err).str()};
}

Verdict criterion2() {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_sum = 0.0, worst_mean = 0.0;
  bool nonneg = true;
  for (int degree : {1, 2, 3}) {
    for (int J : {0, 2, 5, 10}) {
      const auto knots = make_knots(degree, J);
      Eigen::MatrixXd block(1000, J + degree + 1);
      for (int i = 0; i < 1000; ++i) {
        const auto v = eval_raw_basis(knots, degree, u(gen));
        worst_sum = std::max(worst_sum, std::abs(v.sum() - 1.0));
        nonneg = nonneg && (v.array() >= 0.0).all();
        block.row(i) = v.transpose();
      }
      worst_mean = std::max(worst_mean, center_basis(block).colwise().mean().cwiseAbs().maxCoeff());
    }
  }
  return {worst_sum <= 1e-12 && worst_mean <= 1e-10 && nonneg,
          (Detail() << "max |sum-1| " << worst_sum << ", max centered mean " << worst_mean).str()};
}

// g in the span of cubic splines on [-1,1]: low-order polynomials.
double p1(double z) { return z * z * z - 0.5 * z; }
double p2(double z) { return 2.0 * z * z + z; }

Verdict criterion3() {
  DgpConfig c;
  c.N = 2048;
  c.s = 4;
  c.seed = 3;
  auto data = generate_dataset(c);
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    const int j = static_cast<int>(i / c.group_size());
    data.y(i) = c.beta(j) * data.x(i, 0) + p1(data.z(i, 0)) + p2(data.z(i, 1)) + 0.3;
  }
  const auto parts = data.partition();
  const auto fits = fit_all(parts, SplineBasis(simulation_spline_config(c)), kThreads);
  double beta_err = 0.0, g_err = 0.0;
  for (std::size_t j = 0; j < fits.size(); ++j) {
    beta_err = std::max(beta_err, std::abs(fits[j].beta_hat(0) - c.beta(static_cast<int>(j))));
    const auto& z = parts[j].z;
    const double m1 = z.col(0).unaryExpr(&p1).mean(), m2 = z.col(1).unaryExpr(&p2).mean();
    for (int t = 0; t <= 100; ++t) {
      const double pt[2] = {-1.0 + t / 50.0, 1.0 - t / 50.0};
      g_err = std::max(g_err, std::abs(eval_g(fits[j], pt) - (p1(pt[0]) - m1 + p2(pt[1]) - m2)));
    }
  }
  return {beta_err <= 1e-8 && g_err <= 1e-8, (Detail() << "max beta error " << beta_err << ", max g error " << g_err).str()};
}

Verdict criterion4() {
  DgpConfig c;
  c.N = 1000000;
  c.s = 1;
  c.seed = 4;
  const auto data = generate_dataset(c);
  const auto fit = fit_subpop(data.as_single_partition(), SplineBasis(simulation_spline_config(c)));
  const double a = fit.A_hat(0, 0), d = fit.D_hat(0, 0);
  return {std::abs(a - 1.0 / 6.0) <= 0.005 && std::abs(d - 1.0 / 12.0) <= 0.01,
          (Detail() << "A_hat " << a << " (1/6), D_hat " << d << " (1/12)").str()};
}

ExperimentReport coverage_report() {
  DgpConfig c;
  c.N = 1 << 11;
  c.s = 1 << 4;
  ExperimentOptions o;
  o.replications = 200;
  o.wald = false;
  return run(c, o);
}

Verdict criterion5(const ExperimentReport& r) {
  const double ratio = r.mean_len_ci2 / r.mean_len_ci1;
  return {within(r.coverage_ci1, 0.91, 0.98) && within(r.coverage_ci2, 0.91, 0.98) &&
              std::abs(ratio - std::numbers::sqrt2 / 2.0) <= 0.05,
          (Detail() << "coverage CI1 " << r.coverage_ci1 << ", CI2 " << r.coverage_ci2 << ", length ratio " << ratio)
              .str()};
}

Verdict criterion11(const ExperimentReport& r) {
  return {within(r.var_ratio, 0.4, 0.65), (Detail() << "Var(boosted)/Var(beta_hat) " << r.var_ratio).str()};
}

Verdict criterion6() {
  ExperimentOptions o;
  o.replications = 100;
  o.wald = false;
  DgpConfig small, large;
  small.N = 1 << 11;
  small.s = 1 << 5;
  large.N = 1 << 13;
  large.s = 1 << 6;
  const auto a = run(small, o), b = run(large, o);
  return {b.median_rmse_gbar < a.median_rmse_gbar && a.failures == 0 && b.failures == 0,
          (Detail() << "median RMSE " << a.median_rmse_gbar << " at N=2^11, " << b.median_rmse_gbar << " at N=2^13")
              .str()};
}

DgpConfig shifted(Eigen::Index N, int s, double delta) {
  DgpConfig c;
  c.N = N;
  c.s = s;
  c.beta_scheme = BetaScheme::shifted;
  c.delta = delta;
  return c;
}

Verdict criterion7() {
  ExperimentOptions o;
  o.replications = 500;
  const auto h0 = run(shifted(1 << 11, 1 << 4, 0.0), o);
  const auto lo = run(shifted(1 << 11, 1 << 4, 0.5), o);
  const auto hi = run(shifted(1 << 11, 1 << 4, 1.5), o);
  const double s1 = rate(h0, TestMethod::psi1), s2 = rate(h0, TestMethod::psi2);
  const double l1 = rate(lo, TestMethod::psi1), l2 = rate(lo, TestMethod::psi2);
  const double h1 = rate(hi, TestMethod::psi1), h2 = rate(hi, TestMethod::psi2);
  return {within(s1, 0.02, 0.09) && within(s2, 0.02, 0.09) && h2 >= h1 && h1 > l1 && h2 > l2,
          (Detail() << "H0 psi1 " << s1 << ", psi2 " << s2 << "; delta 0.5: " << l1 << "/" << l2 << "; delta 1.5: " << h1
                    << "/" << h2)
              .str()};
}

Verdict criterion8() {
  ExperimentOptions o;
  o.replications = 200;
  o.wald = false;
  o.bootstrap = true;
  o.bootstrap_replicates = 500;
  const auto h0 = run(shifted(1 << 12, 1 << 4, 0.0), o);
  const auto h1 = run(shifted(1 << 12, 1 << 4, 1.0), o);
  const double t = rate(h0, TestMethod::bootstrap_consecutive), p = rate(h1, TestMethod::bootstrap_consecutive);
  return {within(t, 0.02, 0.09) && p >= 0.8,
          (Detail() << "consecutive: type-I " << t << ", power " << p << "; fixed-null max: type-I "
                    << rate(h0, TestMethod::bootstrap_max) << ", power " << rate(h1, TestMethod::bootstrap_max))
              .str()};
}

Verdict criterion9() {
  ExperimentOptions o;
  o.replications = 200;
  o.wald = false;
  o.lrt = true;
  DgpConfig c;
  c.N = 1 << 13;
  c.s = 1 << 5;
  c.interior_knots = 4;
  const auto h0 = run(c, o);
  c.g1_shift = 1.5;
  const auto h1 = run(c, o);
  const auto* s0 = h0.find(TestMethod::lrt_component);
  if (!s0) throw std::runtime_error("missing LRT summary");
  const double u = s0->dof_or_replicates;
  const double t = s0->rejection_rate, p = rate(h1, TestMethod::lrt_component);
  const double rel = std::abs(s0->mean_statistic - u) / u;
  return {within(t, 0.02, 0.10) && rel <= 0.2 && p - t >= 0.3,
          (Detail() << "type-I " << t << ", mean statistic " << s0->mean_statistic << " vs u " << u << ", power " << p
                    << "; joint type-I " << rate(h0, TestMethod::lrt_joint))
              .str()};
}

int run_cli(const std::vector<std::string>& args) {
  std::string cmd = "\"" + cli_path + "\"";
  for (const auto& a : args) cmd += " \"" + a + "\"";
  cmd += " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

Verdict criterion10() {
  if (cli_path.empty()) return {false, "CLI path not given"};
  const auto dir = fs::temp_directory_path() / "aplm_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_file(dir / "fit.json", R"({"dgp": {"N": 2048, "s": 8}, "tests": {"bootstrap_replicates": 200}})");
  write_file(dir / "sim.json", R"({"simulation": {"preset": "smoke"}})");

  std::vector<std::pair<std::string, std::vector<std::string>>> runs = {
      {"fit.json", {"fits.csv", "gbar_grid.csv", "tests.json", "fit_state.json"}},
      {"sim.json", {"report.csv", "report.json"}}};
  int compared = 0;
  for (const auto& [config, files] : runs) {
    for (int threads : {1, 4}) {
      const auto out = dir / (config + "_t" + std::to_string(threads));
      const int rc = run_cli({config == "fit.json" ? "fit" : "simulate", "--config", (dir / config).string(), "--seed",
                              "2024", "--threads", std::to_string(threads), "--out", out.string()});
      if (rc != 0) return {false, "CLI run failed for " + config};
    }
    const auto a = dir / (config + "_t1"), b = dir / (config + "_t4");
    for (const auto& f : files) {
      if (read_file(a / f) != read_file(b / f)) return {false, f + " differs between thread counts"};
      ++compared;
    }
    const auto ma = nlohmann::json::parse(read_file(a / "manifest.json"));
    const auto mb = nlohmann::json::parse(read_file(b / "manifest.json"));
    if (ma.at("artifacts") != mb.at("artifacts")) return {false, "manifest hashes differ for " + config};
  }
  return {true, (Detail() << compared << " artifacts byte-identical at 1 and 4 threads").str()};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) cli_path = argv[1];
  int failed = 0;
  auto report = [&](int id, const std::function<Verdict()>& fn) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = fn();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %2d: %s  %s  [%.1f s]\n", id, v.pass ? "PASS" : "FAIL", v.detail.c_str(), secs);
    std::fflush(stdout);
    failed += v.pass ? 0 : 1;
  };

  report(1, criterion1);
  report(2, criterion2);
  report(3, criterion3);
  report(4, criterion4);
  ExperimentReport coverage;
  report(5, [&] {
    coverage = coverage_report();
    return criterion5(coverage);
  });
  report(6, criterion6);
  report(7, criterion7);
  report(8, criterion8);
  report(9, criterion9);
  report(10, criterion10);
  report(11, [&] { return coverage.replications > 0 ? criterion11(coverage) : Verdict{false, "coverage run missing"}; });
  std::printf("%d of 11 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
