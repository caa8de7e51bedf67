#include "aplm/spline_basis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "aplm/error.hpp"

namespace aplm {

namespace {
constexpr double kDomainSlack = 1e-10;
constexpr double kDegenerateMean = 1e-12;
}  // namespace

DomainTransform fit_domain_transform(std::span<const double> column) {
  if (column.empty()) throw DegenerateCovariateError("cannot fit a domain transform to an empty column");
  auto [lo, hi] = std::minmax_element(column.begin(), column.end());
  if (!(*hi > *lo)) {
    std::ostringstream msg;
    msg << "covariate is constant (" << *lo << "); no spline domain can be fitted";
    throw DegenerateCovariateError(msg.str());
  }
  return DomainTransform{*lo, *hi - *lo};
}

void SplineConfig::validate() const {
  if (degree < 1) throw ConfigError("spline degree must be >= 1, got " + std::to_string(degree));
  if (interior_knots < 0) {
    throw ConfigError("interior knot count must be >= 0, got " + std::to_string(interior_knots));
  }
  for (std::size_t k = 0; k < transforms.size(); ++k) {
    if (!(transforms[k].scale > 0.0) || !std::isfinite(transforms[k].scale) ||
        !std::isfinite(transforms[k].offset)) {
      throw ConfigError("domain transform for spline column " + std::to_string(k) + " must have finite scale > 0");
    }
  }
}

KnotVector make_knots(int degree, int interior_knots) {
  if (degree < 1) throw ConfigError("spline degree must be >= 1, got " + std::to_string(degree));
  if (interior_knots < 0) throw ConfigError("interior knot count must be >= 0");
  KnotVector knots;
  knots.reserve(static_cast<std::size_t>(interior_knots + 2 * degree + 2));
  knots.insert(knots.end(), static_cast<std::size_t>(degree + 1), 0.0);
  const double denom = interior_knots + 1;
  for (int i = 1; i <= interior_knots; ++i) knots.push_back(i / denom);
  knots.insert(knots.end(), static_cast<std::size_t>(degree + 1), 1.0);
  return knots;
}

void eval_raw_basis_into(const KnotVector& knots, int degree, double z, Eigen::Ref<Eigen::VectorXd> out) {
  const auto p = static_cast<std::size_t>(degree);
  const std::size_t nb = knots.size() - p - 1;
  if (out.size() != static_cast<Eigen::Index>(nb)) throw std::invalid_argument("basis output has wrong length");
  const double lo = knots[p];
  const double hi = knots[nb];
  if (!(z >= lo && z <= hi)) {
    std::ostringstream msg;
    msg << "basis argument " << z << " outside [" << lo << ", " << hi << "]";
    throw DomainError(-1, z, msg.str());
  }

  // Knot span i with t_i <= z < t_{i+1}; the final span is closed on the right.
  std::size_t span;
  if (z >= hi) {
    span = nb - 1;
    while (span > p && !(knots[span] < knots[span + 1])) --span;
  } else {
    auto it = std::upper_bound(knots.begin() + static_cast<std::ptrdiff_t>(p),
                               knots.begin() + static_cast<std::ptrdiff_t>(nb) + 1, z);
    span = static_cast<std::size_t>(it - knots.begin()) - 1;
  }

  // Triangular Cox-de Boor recursion over the p+1 functions that are nonzero on the span.
  double local[32];
  double left[32];
  double right[32];
  if (p + 1 > 32) throw std::invalid_argument("spline degree too large");
  local[0] = 1.0;
  for (std::size_t j = 1; j <= p; ++j) {
    left[j] = z - knots[span + 1 - j];
    right[j] = knots[span + j] - z;
    double saved = 0.0;
    for (std::size_t r = 0; r < j; ++r) {
      const double temp = local[r] / (right[r + 1] + left[j - r]);
      local[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    local[j] = saved;
  }

  out.setZero();
  for (std::size_t r = 0; r <= p; ++r) out(static_cast<Eigen::Index>(span - p + r)) = local[r];
}

Eigen::VectorXd eval_raw_basis(const KnotVector& knots, int degree, double z) {
  if (degree < 0 || knots.size() < static_cast<std::size_t>(2 * degree + 2)) {
    throw std::invalid_argument("knot vector too short for the requested degree");
  }
  Eigen::VectorXd out(static_cast<Eigen::Index>(knots.size()) - degree - 1);
  eval_raw_basis_into(knots, degree, z, out);
  return out;
}

Eigen::MatrixXd center_basis_with_means(const Eigen::MatrixXd& raw_block, const Eigen::VectorXd& means,
                                        Eigen::Index reference) {
  const Eigen::Index m = raw_block.cols();
  if (reference < 0 || reference >= m) throw std::invalid_argument("reference column out of range");
  if (means.size() != m) throw std::invalid_argument("centering means have wrong length");
  const double ref_mean = means(reference);
  if (std::abs(ref_mean) < kDegenerateMean) {
    throw DegenerateBasisError("reference basis column " + std::to_string(reference) +
                               " has (near) zero mean over the centering sample");
  }
  Eigen::MatrixXd centered(raw_block.rows(), m - 1);
  Eigen::Index out = 0;
  for (Eigen::Index c = 0; c < m; ++c) {
    if (c == reference) continue;
    centered.col(out++) = raw_block.col(c) - (means(c) / ref_mean) * raw_block.col(reference);
  }
  return centered;
}

Eigen::MatrixXd center_basis(const Eigen::MatrixXd& raw_block, Eigen::Index reference) {
  if (raw_block.rows() == 0) throw DegenerateBasisError("cannot center a basis over an empty sample");
  const Eigen::VectorXd means = raw_block.colwise().mean().transpose();
  return center_basis_with_means(raw_block, means, reference);
}

SplineBasis::SplineBasis(SplineConfig config) : config_(std::move(config)) {
  config_.validate();
  knots_ = make_knots(config_.degree, config_.interior_knots);
}

double SplineBasis::to_unit(int k, double raw) const {
  const double unit = config_.transforms.at(static_cast<std::size_t>(k)).apply(raw);
  if (unit >= 0.0 && unit <= 1.0) return unit;
  if (unit >= -kDomainSlack && unit < 0.0) return 0.0;
  if (unit > 1.0 && unit <= 1.0 + kDomainSlack) return 1.0;
  std::ostringstream msg;
  msg << "spline column " << k << ": raw value " << raw << " maps to " << unit << ", outside [0,1]";
  throw DomainError(k, raw, msg.str());
}

BasisEvaluation SplineBasis::evaluate(int k, double raw) const {
  return BasisEvaluation{eval_raw_basis(knots_, config_.degree, to_unit(k, raw)), k};
}

Eigen::MatrixXd SplineBasis::raw_block(int k, const Eigen::Ref<const Eigen::VectorXd>& raw) const {
  Eigen::MatrixXd block(raw.size(), raw_size());
  Eigen::VectorXd row(raw_size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    eval_raw_basis_into(knots_, config_.degree, to_unit(k, raw(i)), row);
    block.row(i) = row.transpose();
  }
  return block;
}

}  // namespace aplm
