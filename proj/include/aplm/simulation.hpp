#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aplm/aggregator.hpp"
#include "aplm/dataset.hpp"
#include "aplm/hypothesis_tests.hpp"
#include "aplm/spline_basis.hpp"

namespace aplm {

enum class BetaScheme {
  heterogeneous,  // beta^(j) = j (1-based)
  homogeneous,    // beta^(j) = beta_value
  shifted,        // beta^(1) = beta_value + delta, the rest beta_value
};

std::string to_string(BetaScheme scheme);
BetaScheme parse_beta_scheme(std::string_view name);

/// Simulation design: Y = X beta^(j) + g1(Z1) + g2(Z2) + eps with Z1, Z2, W ~ U(-1,1)
/// independent and X = (W + Z1) / 2.
struct DgpConfig {
  Eigen::Index N = 2048;
  int s = 16;
  BetaScheme beta_scheme = BetaScheme::heterogeneous;
  double beta_value = 1.0;
  double delta = 0.0;
  double g1_shift = 0.0;  // group 1 gets an extra g1_shift * (Z1 + 1)
  double sigma = 1.0;
  std::uint64_t seed = 1;
  int interior_knots = 5;
  int degree = 3;

  /// Throws ConfigError unless N, s >= 1, s divides N and sigma >= 0.
  void validate() const;
  Eigen::Index group_size() const { return N / s; }
  /// True linear coefficient of group j (0-based).
  double beta(int j) const;
};

double g1_true(double z);
double g2_true(double z);
/// Centering constant of g2: the mean of its uncentered form over U(-1,1).
double g2_constant();

/// Spline configuration matching the design: both covariates mapped from [-1,1].
SplineConfig simulation_spline_config(const DgpConfig& config);

/// N rows, group j owning rows [j n, (j+1) n). Group j draws from its own stream
/// derived from (seed, replication, j), so the output is independent of threading.
Dataset generate_dataset(const DgpConfig& config, std::uint64_t replication = 0);

struct ExperimentOptions {
  int replications = 200;
  double alpha = 0.05;
  double level = 0.95;
  WeightMode weights = WeightMode::uniform;
  bool wald = true;
  bool bootstrap = false;
  bool lrt = false;
  int bootstrap_replicates = 500;
  int lrt_component = 0;
  int threads = 1;
};

struct ReplicationResult {
  std::uint64_t replication = 0;
  std::string error;  // nonempty when the fit failed
  double rmse_empirical = 0.0;
  double rmse_grid = 0.0;
  double sigma2 = 0.0;
  double beta_hat = 0.0;    // group 1, first coefficient
  double beta_breve = 0.0;  // group 1, first coefficient
  bool ci1_covers = false;
  bool ci2_covers = false;
  double ci1_length = 0.0;
  double ci2_length = 0.0;
  std::vector<std::optional<TestResult>> tests;  // indexed by TestMethod
  std::vector<std::string> test_errors;

  bool ok() const { return error.empty(); }
};

struct TestSummary {
  TestMethod method = TestMethod::psi1;
  int runs = 0;
  double rejection_rate = 0.0;
  double mean_statistic = 0.0;
  double mean_critical_value = 0.0;
  double dof_or_replicates = 0.0;
};

struct ExperimentReport {
  DgpConfig config;
  ExperimentOptions options;
  int replications = 0;
  int failures = 0;
  double rmse_gbar = 0.0;  // mean empirical-norm RMSE
  double median_rmse_gbar = 0.0;
  double rmse_grid = 0.0;
  double coverage_ci1 = 0.0;
  double coverage_ci2 = 0.0;
  double mean_len_ci1 = 0.0;
  double mean_len_ci2 = 0.0;
  double var_ratio = 0.0;  // Var(beta_breve) / Var(beta_hat), group 1
  double mean_sigma2 = 0.0;
  std::vector<TestSummary> tests;
  std::vector<ReplicationResult> details;

  const TestSummary* find(TestMethod method) const;
};

/// Runs one replication end to end: simulate, fit each group, aggregate, boost,
/// then compute the error metrics, intervals and requested tests.
ReplicationResult run_replication(const DgpConfig& config, const ExperimentOptions& options,
                                  std::uint64_t replication);

/// Replications run in parallel and are reduced in replication order.
ExperimentReport run_experiment(const DgpConfig& config, const ExperimentOptions& options);

std::vector<ExperimentReport> run_grid(const std::vector<DgpConfig>& grid, const ExperimentOptions& options);

struct SimulationPreset {
  std::string name;
  std::vector<DgpConfig> grid;
  ExperimentOptions options;
};

/// Named grids: "smoke", "coverage", "rmse", "wald", "bootstrap", "lrt", "full".
SimulationPreset simulation_preset(std::string_view name, std::uint64_t seed);
std::vector<std::string> preset_names();

}  // namespace aplm
