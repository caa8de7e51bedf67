#include "aplm/hypothesis_tests.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "aplm/distributions.hpp"
#include "aplm/error.hpp"
#include "aplm/linear_solver.hpp"
#include "aplm/parallel.hpp"
#include "aplm/random.hpp"

namespace aplm {

std::string to_string(TestMethod method) {
  switch (method) {
    case TestMethod::psi1: return "psi1";
    case TestMethod::psi2: return "psi2";
    case TestMethod::bootstrap_max: return "bootstrap_max";
    case TestMethod::bootstrap_consecutive: return "bootstrap_consecutive";
    case TestMethod::lrt_component: return "lrt_component";
    case TestMethod::lrt_joint: return "lrt_joint";
  }
  return "unknown";
}

ContrastMatrix::ContrastMatrix(Eigen::MatrixXd q) : q_(std::move(q)) {
  if (q_.rows() == 0 || q_.cols() == 0) throw std::invalid_argument("contrast matrix is empty");
  if (q_.rows() > q_.cols()) throw std::invalid_argument("contrast matrix has more rows than columns");
  if (!q_.allFinite()) throw std::invalid_argument("contrast matrix has non-finite entries");
  Eigen::FullPivLU<Eigen::MatrixXd> lu(q_);
  if (lu.rank() != q_.rows()) throw std::invalid_argument("contrast matrix must have full row rank");
}

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0,1)");
}

bool equal_sizes(std::span<const Partition> data) {
  return std::all_of(data.begin(), data.end(), [&](const Partition& p) { return p.size() == data.front().size(); });
}

// sqrt of the harmonic mean of two group sizes; sqrt(n) when the sizes agree.
double pair_scale(Eigen::Index n1, Eigen::Index n2) {
  return std::sqrt(2.0 / (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2)));
}

// Q A_j^{-1} per group.
std::vector<Eigen::MatrixXd> score_maps(std::span<const Partition> data, const ContrastMatrix& q) {
  std::vector<Eigen::MatrixXd> maps;
  maps.reserve(data.size());
  for (const auto& part : data) {
    if (part.x.cols() != q.cols()) throw std::invalid_argument("contrast width does not match the covariate count");
    if (part.size() == 0) throw UnderdeterminedGroupError("group '" + part.group_id + "' is empty");
    const Eigen::MatrixXd a = part.x.transpose() * part.x / static_cast<double>(part.size());
    try {
      maps.push_back(q.matrix() * inverse_spd(a));
    } catch (const NotPositiveDefiniteError&) {
      throw NotPositiveDefiniteError("group '" + part.group_id + "': A_hat is singular");
    }
  }
  return maps;
}

// Per replicate: v_j = Q A_j^{-1} sum_{i in G_j} X_i e_i for every group.
template <class Reduce>
std::vector<double> run_bootstrap(std::span<const Partition> data, const ContrastMatrix& q, double sigma2,
                                  const BootstrapOptions& options, Reduce reduce) {
  if (options.replicates < 1) throw std::invalid_argument("bootstrap needs at least one replicate");
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("sigma2 must be >= 0");
  const auto maps = score_maps(data, q);
  const double sd = std::sqrt(sigma2);
  std::vector<double> out(static_cast<std::size_t>(options.replicates));
  parallel_for(out.size(), options.threads, [&](std::size_t b) {
    Rng rng = Rng::stream(options.seed, {static_cast<std::uint64_t>(b)});
    std::vector<Eigen::VectorXd> v(data.size());
    Eigen::VectorXd e;
    for (std::size_t j = 0; j < data.size(); ++j) {
      e.resize(data[j].size());
      for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = sd * rng.normal();
      v[j] = maps[j] * (data[j].x.transpose() * e);
    }
    out[b] = reduce(v);
  });
  return out;
}

}  // namespace

TestResult wald_pairwise(const Eigen::VectorXd& b1, const Eigen::VectorXd& b2, const ContrastMatrix& q,
                         const Eigen::MatrixXd& m, double sigma2, double n, double alpha, TestMethod method) {
  check_alpha(alpha);
  if (b1.size() != q.cols() || b2.size() != q.cols()) throw std::invalid_argument("coefficient length mismatch");
  if (!(n > 0.0)) throw std::invalid_argument("sample size must be positive");
  const Eigen::VectorXd diff = q.matrix() * (b1 - b2);
  const Eigen::MatrixXd cov = 2.0 * sigma2 * q.matrix() * inverse_spd(m) * q.matrix().transpose();

  TestResult r;
  r.method = method;
  r.alpha = alpha;
  if (q.rows() == 1) {
    const double var = cov(0, 0);
    if (!(var > 0.0)) throw NotPositiveDefiniteError("Wald test: Q M^{-1} Q' sigma^2 is not positive");
    r.statistic = std::sqrt(n) * std::abs(diff(0)) / std::sqrt(var);
    r.critical_value = normal_quantile(1.0 - alpha / 2.0);
    r.p_value = std::erfc(r.statistic / std::numbers::sqrt2);
    r.dof_or_replicates = 1.0;
    r.reference = "N(0,1) two-sided";
  } else {
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw NotPositiveDefiniteError("Wald test: Q M^{-1} Q' sigma^2 is singular");
    r.statistic = n * diff.dot(llt.solve(diff));
    const auto dof = static_cast<double>(q.rows());
    r.critical_value = chi_square_quantile(1.0 - alpha, dof);
    r.p_value = chi_square_sf(r.statistic, dof);
    r.dof_or_replicates = dof;
    r.reference = "chi2(" + std::to_string(q.rows()) + ")";
  }
  r.reject = r.statistic > r.critical_value;
  return r;
}

TestResult psi_pairwise(std::span<const SubPopFit> fits, std::span<const Eigen::VectorXd> beta_breve,
                        std::size_t j1, std::size_t j2, const ContrastMatrix& q, double sigma2, double alpha,
                        TestMethod method) {
  if (j1 >= fits.size() || j2 >= fits.size() || j1 == j2) throw std::invalid_argument("invalid group pair");
  const auto& f1 = fits[j1];
  const auto& f2 = fits[j2];
  const double n = 2.0 / (1.0 / static_cast<double>(f1.n) + 1.0 / static_cast<double>(f2.n));
  TestResult r;
  if (method == TestMethod::psi1) {
    r = wald_pairwise(f1.beta_hat, f2.beta_hat, q, 0.5 * (f1.D_hat + f2.D_hat), sigma2, n, alpha, method);
  } else if (method == TestMethod::psi2) {
    if (j1 >= beta_breve.size() || j2 >= beta_breve.size()) throw std::invalid_argument("boosted estimates missing");
    r = wald_pairwise(beta_breve[j1], beta_breve[j2], q, 0.5 * (f1.A_hat + f2.A_hat), sigma2, n, alpha, method);
  } else {
    throw std::invalid_argument("psi_pairwise: method must be psi1 or psi2");
  }
  r.equal_group_sizes = f1.n == f2.n;
  return r;
}

BootstrapCalibration calibrate(std::span<const double> replicates, double statistic, double alpha) {
  check_alpha(alpha);
  if (replicates.empty()) throw std::invalid_argument("no bootstrap replicates");
  std::vector<double> sorted(replicates.begin(), replicates.end());
  std::sort(sorted.begin(), sorted.end());
  const auto B = static_cast<double>(sorted.size());
  // The epsilon keeps e.g. 0.95 * 500 from rounding up past 475.
  auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * B - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  BootstrapCalibration cal;
  cal.critical_value = sorted[rank - 1];
  const auto exceed = std::count_if(sorted.begin(), sorted.end(), [&](double w) { return w >= statistic; });
  cal.p_value = static_cast<double>(exceed) / B;
  return cal;
}

std::vector<double> bootstrap_max_replicates(std::span<const Partition> data, const ContrastMatrix& q, double sigma2,
                                             const BootstrapOptions& options) {
  return run_bootstrap(data, q, sigma2, options, [&](const std::vector<Eigen::VectorXd>& v) {
    double w = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      w = std::max(w, v[j].cwiseAbs().maxCoeff() / std::sqrt(static_cast<double>(data[j].size())));
    }
    return w;
  });
}

std::vector<double> bootstrap_consecutive_replicates(std::span<const Partition> data, const ContrastMatrix& q,
                                                     double sigma2, const BootstrapOptions& options) {
  if (data.size() < 2) throw std::invalid_argument("consecutive bootstrap needs at least two groups");
  return run_bootstrap(data, q, sigma2, options, [&](const std::vector<Eigen::VectorXd>& v) {
    double w = 0.0;
    for (std::size_t j = 0; j + 1 < v.size(); ++j) {
      const auto nj = data[j].size();
      const auto nk = data[j + 1].size();
      const Eigen::VectorXd d = v[j] / static_cast<double>(nj) - v[j + 1] / static_cast<double>(nk);
      w = std::max(w, pair_scale(nj, nk) * d.cwiseAbs().maxCoeff());
    }
    return w;
  });
}

TestResult bootstrap_max_test(std::span<const Eigen::VectorXd> beta_breve, std::span<const Eigen::VectorXd> nulls,
                              const ContrastMatrix& q, std::span<const Partition> data, double sigma2,
                              const BootstrapOptions& options) {
  check_alpha(options.alpha);
  if (beta_breve.size() != data.size() || nulls.size() != data.size() || data.empty()) {
    throw std::invalid_argument("bootstrap_max_test: need one estimate and one null per group");
  }
  double t = 0.0;
  for (std::size_t j = 0; j < data.size(); ++j) {
    const Eigen::VectorXd d = q.matrix() * (beta_breve[j] - nulls[j]);
    t = std::max(t, std::sqrt(static_cast<double>(data[j].size())) * d.cwiseAbs().maxCoeff());
  }
  const auto reps = bootstrap_max_replicates(data, q, sigma2, options);
  const auto cal = calibrate(reps, t, options.alpha);

  TestResult r;
  r.method = TestMethod::bootstrap_max;
  r.statistic = t;
  r.critical_value = cal.critical_value;
  r.p_value = cal.p_value;
  r.reject = t > cal.critical_value;
  r.alpha = options.alpha;
  r.dof_or_replicates = options.replicates;
  r.reference = "multiplier bootstrap";
  r.equal_group_sizes = equal_sizes(data);
  return r;
}

TestResult bootstrap_consecutive_test(std::span<const Eigen::VectorXd> beta_breve, const ContrastMatrix& q,
                                      std::span<const Partition> data, double sigma2, const BootstrapOptions& options) {
  check_alpha(options.alpha);
  if (beta_breve.size() != data.size()) throw std::invalid_argument("need one boosted estimate per group");
  if (data.size() < 2) throw std::invalid_argument("consecutive test needs at least two groups");
  double t = 0.0;
  for (std::size_t j = 0; j + 1 < data.size(); ++j) {
    const Eigen::VectorXd d = q.matrix() * (beta_breve[j] - beta_breve[j + 1]);
    t = std::max(t, pair_scale(data[j].size(), data[j + 1].size()) * d.cwiseAbs().maxCoeff());
  }
  const auto reps = bootstrap_consecutive_replicates(data, q, sigma2, options);
  const auto cal = calibrate(reps, t, options.alpha);

  TestResult r;
  r.method = TestMethod::bootstrap_consecutive;
  r.statistic = t;
  r.critical_value = cal.critical_value;
  r.p_value = cal.p_value;
  r.reject = t > cal.critical_value;
  r.alpha = options.alpha;
  r.dof_or_replicates = options.replicates;
  r.reference = "multiplier bootstrap (consecutive differences)";
  r.equal_group_sizes = equal_sizes(data);
  return r;
}

namespace {

void check_lrt_inputs(std::span<const Partition> data, std::span<const SubPopFit> fits, double sigma2, double alpha) {
  check_alpha(alpha);
  if (data.size() < 2 || fits.size() != data.size()) {
    throw std::invalid_argument("homogeneity test needs s >= 2 groups with one fit per group");
  }
  if (!(sigma2 > 0.0)) throw std::invalid_argument("homogeneity test needs sigma2 > 0");
  for (std::size_t j = 0; j < fits.size(); ++j) {
    if (!(fits[j].basis == fits.front().basis)) {
      throw IncompatibleFitError("group '" + fits[j].group_id + "' uses a different spline basis");
    }
    if (fits[j].group_id != data[j].group_id) {
      throw IncompatibleFitError("fit order does not match data order at group '" + data[j].group_id + "'");
    }
  }
  if (fits.front().basis.config().interior_knots < 1) {
    throw std::invalid_argument("homogeneity test needs at least one interior knot");
  }
}

// RSS difference for group j when the components in `swap` come from group j+1.
double swap_rss_difference(const Partition& part, const SubPopFit& own, const SubPopFit& next,
                           const std::vector<int>& swap) {
  Eigen::VectorXd r = (part.y - part.x * own.beta_hat).array() - own.level;
  std::vector<Eigen::VectorXd> own_parts(static_cast<std::size_t>(own.K()));
  for (int k = 0; k < own.K(); ++k) {
    own_parts[static_cast<std::size_t>(k)] = component_values(own, k, part.z.col(k), own.centering_constants(k));
    r -= own_parts[static_cast<std::size_t>(k)];
  }
  Eigen::VectorXd r_swap = r;
  for (int k : swap) {
    // The borrowed component is centered over this group's sample, as the own
    // component is; a leftover constant is not part of the hypothesis.
    Eigen::VectorXd borrowed = component_values(next, k, part.z.col(k), 0.0);
    borrowed.array() -= borrowed.mean();
    r_swap += own_parts[static_cast<std::size_t>(k)] - borrowed;
  }
  return r_swap.squaredNorm() - r.squaredNorm();
}

TestResult run_lrt(std::span<const Partition> data, std::span<const SubPopFit> fits, const std::vector<int>& swap,
                   double sigma2, double alpha, TestMethod method) {
  const auto s = data.size();
  std::vector<double> terms(s - 1);
  parallel_for(s - 1, 1, [&](std::size_t j) { terms[j] = swap_rss_difference(data[j], fits[j], fits[j + 1], swap); });
  double total = 0.0;
  for (double t : terms) total += t;

  const auto& cfg = fits.front().basis.config();
  const double u = (2.0 / 3.0) * static_cast<double>(s - 1) * cfg.interior_knots * static_cast<double>(swap.size());
  TestResult r;
  r.method = method;
  r.statistic = total / (6.0 * sigma2);
  r.critical_value = chi_square_quantile(1.0 - alpha, u);
  r.p_value = chi_square_sf(r.statistic, u);
  r.reject = r.statistic > r.critical_value;
  r.alpha = alpha;
  r.dof_or_replicates = u;
  std::ostringstream ref;
  ref << "chi2(" << u << ") as Gamma(u/2, 2)";
  r.reference = ref.str();
  r.equal_group_sizes = equal_sizes(data);
  return r;
}

}  // namespace

TestResult lrt_homogeneity_component(std::span<const Partition> data, std::span<const SubPopFit> fits, int k,
                                     double sigma2, double alpha) {
  check_lrt_inputs(data, fits, sigma2, alpha);
  if (k < 0 || k >= fits.front().K()) throw std::invalid_argument("component index out of range");
  return run_lrt(data, fits, {k}, sigma2, alpha, TestMethod::lrt_component);
}

TestResult lrt_homogeneity_joint(std::span<const Partition> data, std::span<const SubPopFit> fits, double sigma2,
                                 double alpha) {
  check_lrt_inputs(data, fits, sigma2, alpha);
  std::vector<int> all(static_cast<std::size_t>(fits.front().K()));
  for (int k = 0; k < fits.front().K(); ++k) all[static_cast<std::size_t>(k)] = k;
  return run_lrt(data, fits, all, sigma2, alpha, TestMethod::lrt_joint);
}

}  // namespace aplm
