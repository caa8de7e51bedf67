#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "aplm/aggregator.hpp"
#include "aplm/simulation.hpp"

namespace aplm {

struct ColumnRoles {
  std::string response;
  std::vector<std::string> linear;
  std::vector<std::string> spline;
  std::string group;
};

/// Ingestion-time transforms for one column, applied as log10 first, then min-max.
struct ColumnTransform {
  bool log10 = false;
  bool minmax = false;
};

struct TestSelection {
  bool psi1 = true;
  bool psi2 = true;
  bool bootstrap_max = true;
  bool bootstrap_consecutive = true;
  bool lrt_component = true;
  bool lrt_joint = true;
  double alpha = 0.05;
  double level = 0.95;  // confidence intervals
  int bootstrap_replicates = 500;
  Eigen::MatrixXd contrast;              // empty means the d x d identity
  std::size_t wald_first = 0;            // group pair for the Wald tests, by position
  std::size_t wald_second = 1;
  int lrt_component_index = 0;           // spline column tested by the component LRT
  std::optional<Eigen::VectorXd> nulls;  // hypothesized beta for the max test; zero by default
};

/// Monte Carlo plan for the `simulate` subcommand.
struct SimulationPlan {
  std::string preset;  // empty when the grid is given explicitly
  std::vector<DgpConfig> grid;
  ExperimentOptions options;
};

struct PipelineConfig {
  // Data source for `fit`: a CSV file or one simulated data set.
  std::optional<std::filesystem::path> input;
  std::optional<DgpConfig> simulated_data;
  ColumnRoles roles;
  std::map<std::string, ColumnTransform> transforms;

  int degree = 3;
  int interior_knots = 5;
  bool scale_columns = false;
  WeightMode weights = WeightMode::uniform;
  bool homogeneous = false;  // also report the averaged beta
  TestSelection tests;

  std::optional<SimulationPlan> simulation;

  std::filesystem::path output = "out";
  std::uint64_t seed = 1;
  int threads = 1;

  nlohmann::ordered_json echo;  // the document as read, for the manifest
};

/// Parses and validates a JSON configuration. Unknown keys, conflicting column
/// roles and out-of-range values raise ConfigError.
PipelineConfig parse_config(const nlohmann::ordered_json& doc);
PipelineConfig load_config(const std::filesystem::path& path);

/// Checks the invariants that depend on which subcommand runs.
void validate_for_fit(const PipelineConfig& config);
void validate_for_simulate(const PipelineConfig& config);

std::string to_string(WeightMode mode);

}  // namespace aplm
