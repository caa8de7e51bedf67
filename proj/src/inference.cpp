#include "aplm/inference.hpp"

#include <cmath>
#include <stdexcept>

#include "aplm/distributions.hpp"
#include "aplm/error.hpp"
#include "aplm/linear_solver.hpp"

namespace aplm {

bool CiResult::covers(Eigen::Index i, double truth) const {
  const double slack = 1e-12 * std::max(1.0, std::abs(center(i)));
  return std::abs(truth - center(i)) <= halfwidth(i) + slack;
}

double pooled_sigma2(std::span<const SubPopFit> fits) {
  if (fits.empty()) throw std::invalid_argument("pooled_sigma2: no fits");
  double total = 0.0;
  for (const auto& f : fits) total += f.sigma2_hat;
  return total / static_cast<double>(fits.size());
}

CiResult ci_beta(const Eigen::VectorXd& center, const Eigen::MatrixXd& variance_matrix, double sigma2, Eigen::Index n,
                 double level, CiVariant variant) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must lie in (0,1)");
  if (!(sigma2 >= 0.0)) throw std::invalid_argument("sigma2 must be >= 0");
  if (n <= 0) throw std::invalid_argument("sample size must be positive");
  if (variance_matrix.rows() != center.size() || variance_matrix.cols() != center.size()) {
    throw std::invalid_argument("variance matrix does not match the coefficient dimension");
  }
  const Eigen::MatrixXd inv = inverse_spd(variance_matrix);
  const double z = normal_quantile(0.5 * (1.0 + level));
  CiResult out;
  out.center = center;
  out.level = level;
  out.variant = variant;
  out.halfwidth = (z * std::sqrt(sigma2)) * (inv.diagonal() / static_cast<double>(n)).cwiseSqrt();
  return out;
}

CiResult ci1(const SubPopFit& fit, double sigma2, double level, const Eigen::MatrixXd* d_matrix) {
  return ci_beta(fit.beta_hat, d_matrix ? *d_matrix : fit.D_hat, sigma2, fit.n, level, CiVariant::ci1_d_based);
}

CiResult ci2(const SubPopFit& fit, const Eigen::VectorXd& beta_breve, double sigma2, double level,
             const Eigen::MatrixXd* a_matrix) {
  return ci_beta(beta_breve, a_matrix ? *a_matrix : fit.A_hat, sigma2, fit.n, level, CiVariant::ci2_a_based);
}

}  // namespace aplm
