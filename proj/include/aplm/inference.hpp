#pragma once

#include <Eigen/Dense>
#include <span>

#include "aplm/subpop_fitter.hpp"

namespace aplm {

enum class CiVariant {
  ci1_d_based,  // beta_hat with sigma^2 D^{-1}
  ci2_a_based,  // boosted beta with sigma^2 A^{-1}
};

struct CiResult {
  Eigen::VectorXd center;
  Eigen::VectorXd halfwidth;
  double level = 0.95;
  CiVariant variant = CiVariant::ci1_d_based;

  Eigen::VectorXd lower() const { return center - halfwidth; }
  Eigen::VectorXd upper() const { return center + halfwidth; }
  /// Whether coordinate i covers `truth`; a zero-width interval covers an exact hit.
  bool covers(Eigen::Index i, double truth) const;
};

/// Unweighted mean of the per-group sigma2_hat.
double pooled_sigma2(std::span<const SubPopFit> fits);

/// center +/- z_{(1+level)/2} * sqrt(sigma2) * sqrt(diag(M^{-1}) / n), M = D_hat or A_hat.
CiResult ci_beta(const Eigen::VectorXd& center, const Eigen::MatrixXd& variance_matrix, double sigma2, Eigen::Index n,
                 double level, CiVariant variant);

/// CI1 from a fit's beta_hat; `d_matrix` overrides D_hat when given (e.g. the true D).
CiResult ci1(const SubPopFit& fit, double sigma2, double level, const Eigen::MatrixXd* d_matrix = nullptr);

/// CI2 around a boosted estimate; `a_matrix` overrides A_hat when given.
CiResult ci2(const SubPopFit& fit, const Eigen::VectorXd& beta_breve, double sigma2, double level,
             const Eigen::MatrixXd* a_matrix = nullptr);

}  // namespace aplm
