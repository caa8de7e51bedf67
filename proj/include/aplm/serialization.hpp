#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "aplm/pipeline.hpp"
#include "aplm/simulation.hpp"

namespace aplm {

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

std::string sha256_hex(std::string_view bytes);

/// Writes `content` to `path` through a temporary file and a rename.
void write_file(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

std::string fits_csv(const LoadedData& loaded, const AnalysisResult& analysis);

/// g-bar at 200 equally spaced points of [0,1] per component, with the point
/// also given in the units the data arrived in.
std::string gbar_grid_csv(const LoadedData& loaded, const AnalysisResult& analysis);

nlohmann::ordered_json tests_json(const PipelineConfig& config, const AnalysisResult& analysis,
                                  const std::vector<TestOutcome>& tests);

std::string report_csv(const std::vector<ExperimentReport>& reports);
nlohmann::ordered_json report_json(const std::string& preset, const std::vector<ExperimentReport>& reports);

/// Full numeric state of the fits and the aggregate, enough to rerun the tests.
nlohmann::ordered_json fit_state_json(const AnalysisResult& analysis);
/// Restores fits and aggregate; sigma2, intervals and tests are left for the caller.
AnalysisResult fit_state_from_json(const nlohmann::ordered_json& doc);

nlohmann::ordered_json spline_config_json(const SplineConfig& config);
SplineConfig spline_config_from_json(const nlohmann::ordered_json& doc);

struct ArtifactRecord {
  std::string file;
  std::string sha256;
  std::size_t bytes = 0;
};

/// Writes each (name, content) pair into `dir` and returns their records in order.
std::vector<ArtifactRecord> write_artifacts(const std::filesystem::path& dir,
                                            const std::vector<std::pair<std::string, std::string>>& files);

nlohmann::ordered_json manifest_json(const std::string& command, const PipelineConfig& config, int threads,
                                     double seconds, const std::vector<ArtifactRecord>& artifacts,
                                     const nlohmann::ordered_json& extra = {});

}  // namespace aplm
