#include "aplm/subpop_fitter.hpp"

#include <cmath>
#include <sstream>

#include "aplm/error.hpp"
#include "aplm/parallel.hpp"

namespace aplm {

namespace {

constexpr Eigen::Index kReference = 0;

void check_partition(const Partition& data, const SplineBasis& basis) {
  if (data.z.cols() != basis.components()) {
    std::ostringstream msg;
    msg << "group '" << data.group_id << "' has " << data.z.cols() << " spline columns, basis expects "
        << basis.components();
    throw DataError(msg.str());
  }
  if (data.x.rows() != data.size() || data.z.rows() != data.size()) {
    throw DataError("group '" + data.group_id + "' has columns of unequal length");
  }
}

}  // namespace

Eigen::VectorXd SubPopFit::gamma_component(int k) const {
  const int c = basis.centered_size();
  return gamma_hat.segment(static_cast<Eigen::Index>(k) * c, c);
}

Eigen::VectorXd SubPopFit::raw_coefficients(int k) const {
  const int m = basis.raw_size();
  const Eigen::VectorXd gamma = gamma_component(k);
  const Eigen::VectorXd mu = basis_means.row(k).transpose();
  Eigen::VectorXd theta(m);
  double ref = 0.0;
  Eigen::Index g = 0;
  for (Eigen::Index c = 0; c < m; ++c) {
    if (c == kReference) continue;
    theta(c) = gamma(g);
    ref -= gamma(g) * mu(c) / mu(kReference);
    ++g;
  }
  theta(kReference) = ref;
  return theta;
}

Eigen::MatrixXd centered_spline_block(const Partition& data, const SplineBasis& basis, Eigen::MatrixXd* means) {
  check_partition(data, basis);
  const int K = basis.components();
  const int c = basis.centered_size();
  if (data.size() == 0) throw UnderdeterminedGroupError("group '" + data.group_id + "' is empty");
  Eigen::MatrixXd block(data.size(), static_cast<Eigen::Index>(K) * c);
  if (means) means->resize(K, basis.raw_size());
  for (int k = 0; k < K; ++k) {
    const Eigen::MatrixXd raw = basis.raw_block(k, data.z.col(k));
    const Eigen::VectorXd mu = raw.colwise().mean().transpose();
    block.middleCols(static_cast<Eigen::Index>(k) * c, c) = center_basis_with_means(raw, mu, kReference);
    if (means) means->row(k) = mu.transpose();
  }
  return block;
}

double estimate_sigma2(const Eigen::Ref<const Eigen::VectorXd>& residuals, Eigen::Index n, int d, int K,
                       int interior_knots, int degree) {
  const Eigen::Index denom = n - d - static_cast<Eigen::Index>(K) * (interior_knots + degree);
  if (denom <= 0) {
    std::ostringstream msg;
    msg << "residual degrees of freedom " << denom << " <= 0 (n = " << n << ")";
    throw UnderdeterminedGroupError(msg.str());
  }
  return residuals.squaredNorm() / static_cast<double>(denom);
}

namespace {

Eigen::MatrixXd residualize(const Eigen::MatrixXd& spline_block, const Eigen::MatrixXd& x,
                            const SolverOptions& options) {
  const Eigen::MatrixXd coef = solve_ls_multi(spline_block, x, options);
  return x - spline_block * coef;
}

}  // namespace

Eigen::MatrixXd spline_span(const Partition& data, const SplineBasis& basis, Eigen::MatrixXd* means) {
  const Eigen::MatrixXd block = centered_spline_block(data, basis, means);
  if (!basis.config().free_level) return block;
  Eigen::MatrixXd span(block.rows(), block.cols() + 1);
  span << block, Eigen::VectorXd::Ones(block.rows());
  return span;
}

Eigen::MatrixXd estimate_D_hat(const Partition& data, const SplineBasis& basis, const SolverOptions& options) {
  const Eigen::MatrixXd span = spline_span(data, basis);
  const Eigen::MatrixXd tilde = residualize(span, data.x, options);
  return tilde.transpose() * tilde / static_cast<double>(data.size() - span.cols());
}

SubPopFit fit_subpop(const Partition& data, const SplineBasis& basis, const SolverOptions& options) {
  check_partition(data, basis);
  const int K = basis.components();
  const int d = data.d();
  const int c = basis.centered_size();
  const Eigen::Index n = data.size();
  const Eigen::Index p = static_cast<Eigen::Index>(K) * c + d + (basis.config().free_level ? 1 : 0);
  if (n <= p) {
    std::ostringstream msg;
    msg << "group '" << data.group_id << "' has " << n << " observations; needs more than " << p
        << " (the number of fitted coefficients)";
    throw UnderdeterminedGroupError(msg.str());
  }

  SubPopFit fit;
  fit.group_id = data.group_id;
  fit.n = n;
  fit.basis = basis;

  try {
    const Eigen::MatrixXd span = spline_span(data, basis, &fit.basis_means);
    const Eigen::Index nb = static_cast<Eigen::Index>(K) * c;
    Eigen::MatrixXd design(n, p);
    design.leftCols(span.cols()) = span;
    design.rightCols(d) = data.x;

    Eigen::VectorXd coef;
    if (basis.config().scale_columns) {
      Eigen::VectorXd scale = (design.colwise().norm() / std::sqrt(static_cast<double>(n))).transpose();
      for (Eigen::Index j = 0; j < p; ++j) {
        if (scale(j) == 0.0) scale(j) = 1.0;
      }
      coef = solve_ls(design * scale.cwiseInverse().asDiagonal(), data.y, options).cwiseQuotient(scale);
    } else {
      coef = solve_ls(design, data.y, options);
    }
    fit.gamma_hat = coef.head(nb);
    fit.beta_hat = coef.tail(d);
    fit.level = basis.config().free_level ? coef(nb) : 0.0;

    fit.centering_constants.resize(K);
    Eigen::VectorXd g_hat = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < K; ++k) {
      const Eigen::VectorXd comp =
          span.middleCols(static_cast<Eigen::Index>(k) * c, c) * fit.gamma_hat.segment(static_cast<Eigen::Index>(k) * c, c);
      fit.centering_constants(k) = comp.mean();
      g_hat += (comp.array() - fit.centering_constants(k)).matrix();
    }
    const Eigen::VectorXd residuals = (data.y - data.x * fit.beta_hat - g_hat).array() - fit.level;
    fit.rss = residuals.squaredNorm();
    fit.sigma2_hat = estimate_sigma2(residuals, n, d, K, basis.config().interior_knots, basis.config().degree);

    fit.A_hat = data.x.transpose() * data.x / static_cast<double>(n);
    const Eigen::MatrixXd tilde = residualize(span, data.x, options);
    fit.D_hat = tilde.transpose() * tilde / static_cast<double>(n - span.cols());
  } catch (const SingularDesignError& e) {
    throw SingularDesignError(e.column(), "group '" + data.group_id + "': " + e.what());
  } catch (const UnderdeterminedGroupError& e) {
    throw UnderdeterminedGroupError("group '" + data.group_id + "': " + e.what());
  }
  return fit;
}

std::vector<SubPopFit> fit_all(std::span<const Partition> parts, const SplineBasis& basis, int threads,
                               const SolverOptions& options) {
  std::vector<SubPopFit> fits(parts.size());
  parallel_for(parts.size(), threads, [&](std::size_t j) { fits[j] = fit_subpop(parts[j], basis, options); });
  return fits;
}

Eigen::VectorXd fitted_values(const SubPopFit& fit, const Partition& data) {
  check_partition(data, fit.basis);
  if (data.x.cols() != fit.d()) throw DataError("group '" + data.group_id + "' has the wrong number of linear columns");
  Eigen::VectorXd out = (data.x * fit.beta_hat).array() + fit.level;
  for (int k = 0; k < fit.K(); ++k) out += component_values(fit, k, data.z.col(k), fit.centering_constants(k));
  return out;
}

double eval_component(const SubPopFit& fit, int k, double z, double constant) {
  const BasisEvaluation b = fit.basis.evaluate(k, z);
  return b.values.dot(fit.raw_coefficients(k)) - constant;
}

Eigen::VectorXd component_values(const SubPopFit& fit, int k, const Eigen::Ref<const Eigen::VectorXd>& z,
                                 double constant) {
  const Eigen::MatrixXd raw = fit.basis.raw_block(k, z);
  return (raw * fit.raw_coefficients(k)).array() - constant;
}

double eval_g(const SubPopFit& fit, std::span<const double> z, const Eigen::VectorXd& constants) {
  const int K = fit.K();
  if (static_cast<int>(z.size()) != K || constants.size() != K) {
    throw std::invalid_argument("eval_g: expected one covariate value and one constant per component");
  }
  double total = 0.0;
  for (int k = 0; k < K; ++k) total += eval_component(fit, k, z[static_cast<std::size_t>(k)], constants(k));
  return total;
}

double eval_g(const SubPopFit& fit, std::span<const double> z) { return eval_g(fit, z, fit.centering_constants); }

Eigen::VectorXd whole_sample_constants(const SubPopFit& fit, const Eigen::MatrixXd& pooled_basis_means) {
  const int K = fit.K();
  if (pooled_basis_means.rows() != K || pooled_basis_means.cols() != fit.basis.raw_size()) {
    throw std::invalid_argument("pooled basis means have the wrong shape");
  }
  Eigen::VectorXd constants(K);
  for (int k = 0; k < K; ++k) constants(k) = pooled_basis_means.row(k).dot(fit.raw_coefficients(k));
  return constants;
}

}  // namespace aplm
