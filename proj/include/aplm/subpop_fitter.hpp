#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "aplm/dataset.hpp"
#include "aplm/linear_solver.hpp"
#include "aplm/spline_basis.hpp"

namespace aplm {

/// Per-sub-population fit of Y = X'beta + sum_k g_k(Z_k) + eps.
///
/// Each component g_k is represented on the centered basis
/// b*_m = b_m - (mean(b_m)/mean(b_0)) b_0, m = 1..J+degree, where the means are
/// the group's own raw-basis column means (stored in `basis_means`). The basis
/// index 0 is the reference column that is dropped.
struct SubPopFit {
  std::string group_id;
  Eigen::Index n = 0;
  Eigen::VectorXd beta_hat;             // d
  Eigen::VectorXd gamma_hat;            // K * (J + degree), component-major
  Eigen::MatrixXd basis_means;          // K x (J + degree + 1)
  Eigen::VectorXd centering_constants;  // K, group-sample mean of each fitted component
  double level = 0.0;                   // constant removed from the fit by centering
  double sigma2_hat = 0.0;
  double rss = 0.0;
  Eigen::MatrixXd D_hat;  // (1/n) sum of spline-residualized X outer products
  Eigen::MatrixXd A_hat;  // (1/n) sum X_i X_i'
  SplineBasis basis;

  int d() const { return static_cast<int>(beta_hat.size()); }
  int K() const { return basis.components(); }

  Eigen::VectorXd gamma_component(int k) const;

  /// Coefficients theta_k on the raw basis with sum_m theta_m b_m == sum_m gamma_m b*_m.
  Eigen::VectorXd raw_coefficients(int k) const;
};

SubPopFit fit_subpop(const Partition& data, const SplineBasis& basis, const SolverOptions& options = {});

/// Fits every partition on up to `threads` workers; results keep the input order.
std::vector<SubPopFit> fit_all(std::span<const Partition> parts, const SplineBasis& basis, int threads = 1,
                               const SolverOptions& options = {});

/// Centered design block [B*_1 | ... | B*_K] over the partition's own sample.
/// `means` receives the K x raw_size raw-basis column means used for centering.
Eigen::MatrixXd centered_spline_block(const Partition& data, const SplineBasis& basis, Eigen::MatrixXd* means = nullptr);

/// Spline-residual estimate of D = E[(X - E[X|Z])^{(x)2}]: X is regressed on the
/// spline span (centered block plus the constant when free_level is set) and
/// D_hat = (1/n) sum of residual outer products.
Eigen::MatrixXd estimate_D_hat(const Partition& data, const SplineBasis& basis, const SolverOptions& options = {});

/// RSS / (n - d - K (J + degree)); throws UnderdeterminedGroupError if the denominator is <= 0.
double estimate_sigma2(const Eigen::Ref<const Eigen::VectorXd>& residuals, Eigen::Index n, int d, int K,
                       int interior_knots, int degree);

/// Centered spline block, with a trailing column of ones when free_level is set.
Eigen::MatrixXd spline_span(const Partition& data, const SplineBasis& basis, Eigen::MatrixXd* means = nullptr);

/// Fitted values X beta + level + sum_k g_k over a partition's rows, using the
/// fit's own centering.
Eigen::VectorXd fitted_values(const SubPopFit& fit, const Partition& data);

/// Fitted k-th component at raw covariate value `z`, minus `constant`.
double eval_component(const SubPopFit& fit, int k, double z, double constant);

/// k-th component over a column of raw values, minus `constant`.
Eigen::VectorXd component_values(const SubPopFit& fit, int k, const Eigen::Ref<const Eigen::VectorXd>& z,
                                 double constant);

/// g(z) = sum_k [b_k(z_k)' theta_k - c_k] with the group centering constants.
double eval_g(const SubPopFit& fit, std::span<const double> z);

/// Same, with caller-supplied (e.g. whole-sample) centering constants.
double eval_g(const SubPopFit& fit, std::span<const double> z, const Eigen::VectorXd& constants);

/// Constants that center each fitted component over the pooled sample, given the
/// pooled raw-basis column means (K x raw_size).
Eigen::VectorXd whole_sample_constants(const SubPopFit& fit, const Eigen::MatrixXd& pooled_basis_means);

}  // namespace aplm
