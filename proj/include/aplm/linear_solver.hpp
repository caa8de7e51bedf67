#pragma once

#include <Eigen/Dense>

namespace aplm {

struct SolverOptions {
  /// A column is rank deficient when |R_ii| < rank_tolerance * max_j |R_jj|.
  double rank_tolerance = 1e-10;
};

struct LsProblem {
  Eigen::MatrixXd design;    // n x p, rows are observations
  Eigen::VectorXd response;  // n
};

/// Minimizer of 0.5 * ||response - design * coef||^2 via Householder QR.
/// Throws SingularDesignError naming the first dependent column, and
/// UnderdeterminedGroupError when n < p.
Eigen::VectorXd solve_ls(const Eigen::Ref<const Eigen::MatrixXd>& design,
                         const Eigen::Ref<const Eigen::VectorXd>& response, const SolverOptions& options = {});

inline Eigen::VectorXd solve_ls(const LsProblem& problem, const SolverOptions& options = {}) {
  return solve_ls(problem.design, problem.response, options);
}

/// Column-by-column least squares against a shared design (one factorization).
Eigen::MatrixXd solve_ls_multi(const Eigen::Ref<const Eigen::MatrixXd>& design,
                               const Eigen::Ref<const Eigen::MatrixXd>& responses, const SolverOptions& options = {});

/// matrix^{-1} * rhs for symmetric positive definite `matrix` (Cholesky).
/// Throws NotPositiveDefiniteError on a non-positive pivot.
Eigen::VectorXd solve_symmetric(const Eigen::Ref<const Eigen::MatrixXd>& matrix,
                                const Eigen::Ref<const Eigen::VectorXd>& rhs);

Eigen::MatrixXd inverse_spd(const Eigen::Ref<const Eigen::MatrixXd>& matrix);

}  // namespace aplm
