#include "aplm/linear_solver.hpp"

#include <cmath>
#include <sstream>

#include "aplm/error.hpp"

namespace aplm {

namespace {

void require_finite(const Eigen::Ref<const Eigen::MatrixXd>& m, const char* what) {
  if (!m.allFinite()) throw NumericalError(std::string(what) + " contains non-finite entries");
}

Eigen::HouseholderQR<Eigen::MatrixXd> factorize(const Eigen::Ref<const Eigen::MatrixXd>& design,
                                                const SolverOptions& options) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  if (n < p) {
    std::ostringstream msg;
    msg << "least-squares problem is underdetermined: " << n << " rows for " << p << " columns";
    throw UnderdeterminedGroupError(msg.str());
  }
  require_finite(design, "design matrix");

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
  const Eigen::VectorXd diag = qr.matrixQR().diagonal().cwiseAbs();
  const double largest = p > 0 ? diag.maxCoeff() : 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!(diag(j) >= options.rank_tolerance * largest) || largest == 0.0) {
      std::ostringstream msg;
      msg << "design is rank deficient at column " << j << " (|R_jj| = " << diag(j) << ", max " << largest << ")";
      throw SingularDesignError(j, msg.str());
    }
  }
  return qr;
}

Eigen::MatrixXd back_substitute(const Eigen::HouseholderQR<Eigen::MatrixXd>& qr,
                                const Eigen::Ref<const Eigen::MatrixXd>& rhs) {
  const Eigen::Index p = qr.matrixQR().cols();
  Eigen::MatrixXd qty = rhs;
  qty.applyOnTheLeft(qr.householderQ().adjoint());
  return qr.matrixQR().topLeftCorner(p, p).triangularView<Eigen::Upper>().solve(qty.topRows(p));
}

}  // namespace

Eigen::VectorXd solve_ls(const Eigen::Ref<const Eigen::MatrixXd>& design,
                         const Eigen::Ref<const Eigen::VectorXd>& response, const SolverOptions& options) {
  if (design.rows() != response.size()) throw std::invalid_argument("design and response row counts differ");
  require_finite(response, "response");
  const auto qr = factorize(design, options);
  return back_substitute(qr, response);
}

Eigen::MatrixXd solve_ls_multi(const Eigen::Ref<const Eigen::MatrixXd>& design,
                               const Eigen::Ref<const Eigen::MatrixXd>& responses, const SolverOptions& options) {
  if (design.rows() != responses.rows()) throw std::invalid_argument("design and response row counts differ");
  require_finite(responses, "response");
  const auto qr = factorize(design, options);
  return back_substitute(qr, responses);
}

Eigen::VectorXd solve_symmetric(const Eigen::Ref<const Eigen::MatrixXd>& matrix,
                                const Eigen::Ref<const Eigen::VectorXd>& rhs) {
  if (matrix.rows() != matrix.cols() || matrix.rows() != rhs.size()) {
    throw std::invalid_argument("solve_symmetric: dimension mismatch");
  }
  require_finite(matrix, "matrix");
  Eigen::LLT<Eigen::MatrixXd> llt(matrix);
  if (llt.info() != Eigen::Success) throw NotPositiveDefiniteError("matrix is not positive definite");
  return llt.solve(rhs);
}

Eigen::MatrixXd inverse_spd(const Eigen::Ref<const Eigen::MatrixXd>& matrix) {
  if (matrix.rows() != matrix.cols()) throw std::invalid_argument("inverse_spd: matrix is not square");
  require_finite(matrix, "matrix");
  Eigen::LLT<Eigen::MatrixXd> llt(matrix);
  if (llt.info() != Eigen::Success) throw NotPositiveDefiniteError("matrix is not positive definite");
  return llt.solve(Eigen::MatrixXd::Identity(matrix.rows(), matrix.cols()));
}

}  // namespace aplm
