#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

namespace aplm {

/// Affine map carrying a raw covariate range onto the basis domain [0,1]:
/// unit = (raw - offset) / scale.
struct DomainTransform {
  double offset = 0.0;
  double scale = 1.0;

  double apply(double raw) const { return (raw - offset) / scale; }
  double invert(double unit) const { return offset + unit * scale; }

  friend bool operator==(const DomainTransform&, const DomainTransform&) = default;
};

/// Maps [min, max] of the column onto [0,1]. Throws DegenerateCovariateError
/// for a constant (or empty) column.
DomainTransform fit_domain_transform(std::span<const double> column);

struct SplineConfig {
  int degree = 3;          // polynomial degree, >= 1
  int interior_knots = 5;  // J_N, >= 0
  std::vector<DomainTransform> transforms;  // one per spline covariate
  bool scale_columns = false;               // rescale design columns before solving
  // The uncentered basis of each component spans the constants, so the least
  // squares fit carries one free level per group. Centering moves that level
  // out of the component functions; it is kept as SubPopFit::level.
  bool free_level = true;

  int components() const { return static_cast<int>(transforms.size()); }
  int raw_size() const { return interior_knots + degree + 1; }
  int centered_size() const { return interior_knots + degree; }
  double knot_spacing() const { return 1.0 / (interior_knots + 1); }

  /// Throws ConfigError when degree < 1, interior_knots < 0 or a transform has scale <= 0.
  void validate() const;

  friend bool operator==(const SplineConfig&, const SplineConfig&) = default;
};

using KnotVector = std::vector<double>;

/// Clamped uniform knot vector on [0,1]: degree+1 zeros, interior knots at
/// i/(J+1), degree+1 ones.
KnotVector make_knots(int degree, int interior_knots);

/// Cox-de Boor evaluation of every basis function of the clamped knot vector
/// at z in [0,1]. The last span is closed on the right so z = 1 is defined.
/// Result length is knots.size() - degree - 1.
Eigen::VectorXd eval_raw_basis(const KnotVector& knots, int degree, double z);

/// Writes the raw basis at z into `out` (length knots.size() - degree - 1).
void eval_raw_basis_into(const KnotVector& knots, int degree, double z, Eigen::Ref<Eigen::VectorXd> out);

/// Drops the reference column and replaces every other column m by
/// b_m - (mean(b_m) / mean(b_ref)) * b_ref, with means taken over the rows given.
/// Throws DegenerateBasisError when |mean(b_ref)| < 1e-12.
Eigen::MatrixXd center_basis(const Eigen::MatrixXd& raw_block, Eigen::Index reference = 0);

/// Same centering, but with the column means supplied (e.g. pooled means) instead
/// of computed from `raw_block`.
Eigen::MatrixXd center_basis_with_means(const Eigen::MatrixXd& raw_block, const Eigen::VectorXd& means,
                                        Eigen::Index reference = 0);

struct BasisEvaluation {
  Eigen::VectorXd values;
  int component = 0;
};

/// A SplineConfig together with its knot vector. Raw covariates go in; the
/// per-column domain transform is applied before evaluation.
class SplineBasis {
 public:
  SplineBasis() = default;
  explicit SplineBasis(SplineConfig config);

  const SplineConfig& config() const { return config_; }
  const KnotVector& knots() const { return knots_; }
  int components() const { return config_.components(); }
  int raw_size() const { return config_.raw_size(); }
  int centered_size() const { return config_.centered_size(); }

  /// Transformed value of raw covariate `raw` for component k. Values within
  /// 1e-10 of the domain boundary are clamped; anything further out raises
  /// DomainError naming the column and raw value.
  double to_unit(int k, double raw) const;

  BasisEvaluation evaluate(int k, double raw) const;

  /// n x raw_size() block of raw basis values for component k.
  Eigen::MatrixXd raw_block(int k, const Eigen::Ref<const Eigen::VectorXd>& raw) const;

  friend bool operator==(const SplineBasis& a, const SplineBasis& b) { return a.config_ == b.config_; }

 private:
  SplineConfig config_;
  KnotVector knots_;
};

}  // namespace aplm
