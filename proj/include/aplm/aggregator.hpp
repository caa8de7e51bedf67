#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aplm/dataset.hpp"
#include "aplm/subpop_fitter.hpp"

namespace aplm {

enum class WeightMode {
  uniform,  // 1/s
  by_size,  // n_j / sum n_j
};

/// The common additive function g-bar plus the linear-coefficient summaries.
///
/// g-bar is stored on the centered basis built from the pooled raw-basis means,
/// so its components have zero mean over the pooled sample.
struct AggregatedFit {
  Eigen::VectorXd gbar_gamma;              // K * (J + degree)
  Eigen::MatrixXd pooled_basis_means;      // K x (J + degree + 1)
  Eigen::VectorXd whole_sample_centering;  // K
  std::vector<double> weights;             // one per group, sums to 1
  std::vector<std::string> group_ids;
  std::optional<Eigen::VectorXd> beta_bar;
  std::vector<Eigen::VectorXd> beta_breve;  // per group, same order as group_ids; empty until boosted
  SplineBasis basis;

  int K() const { return basis.components(); }
  Eigen::VectorXd raw_coefficients(int k) const;
  double eval_component(int k, double z) const;
  Eigen::VectorXd component_values(int k, const Eigen::Ref<const Eigen::VectorXd>& z) const;
  double eval(std::span<const double> z) const;
  /// g-bar at every row of an n x K matrix of raw covariates.
  Eigen::VectorXd eval_rows(const Eigen::Ref<const Eigen::MatrixXd>& z) const;
};

std::vector<double> make_weights(std::span<const SubPopFit> fits, WeightMode mode);

/// Pooled raw-basis column means, sum_j n_j * mean_j / sum_j n_j.
Eigen::MatrixXd pooled_basis_means(std::span<const SubPopFit> fits);

/// Weighted average of the group component functions, re-centered over the pooled sample.
/// Throws IncompatibleFitError if the fits do not share one spline basis.
AggregatedFit aggregate_g(std::span<const SubPopFit> fits, WeightMode mode = WeightMode::uniform);

/// Weighted average of beta_hat; meaningful only when the linear effects are homogeneous.
Eigen::VectorXd aggregate_beta(std::span<const SubPopFit> fits, WeightMode mode = WeightMode::uniform);

/// Least squares of Y - gbar(Z) on X over one group.
Eigen::VectorXd boost_beta(const Partition& data, const AggregatedFit& agg, const SolverOptions& options = {});

/// Runs boost_beta for every group (in parallel) and stores the results in agg.beta_breve.
void boost_all(std::span<const Partition> parts, AggregatedFit& agg, int threads = 1,
               const SolverOptions& options = {});

}  // namespace aplm
