#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "aplm/aggregator.hpp"
#include "aplm/config.hpp"
#include "aplm/csv_ingest.hpp"
#include "aplm/dataset.hpp"
#include "aplm/hypothesis_tests.hpp"
#include "aplm/inference.hpp"
#include "aplm/subpop_fitter.hpp"

namespace aplm {

/// One entry of tests.json. A test that could not be computed keeps its name
/// with status "error" (or "skipped" when it does not apply) and a message.
struct TestOutcome {
  std::string name;
  std::string status = "ok";
  std::string message;
  std::optional<TestResult> result;
};

struct AnalysisResult {
  std::vector<SubPopFit> fits;
  AggregatedFit agg;
  double sigma2 = 0.0;
  std::vector<CiResult> ci1;  // per group
  std::vector<CiResult> ci2;
  std::vector<TestOutcome> tests;
};

/// Data as the pipeline sees it: the pooled sample, how each numeric column was
/// transformed on the way in, and the spline basis spanning the Z ranges.
struct LoadedData {
  Dataset data;
  std::optional<IngestionReport> ingestion;
  SplineBasis basis;
};

/// Reads the CSV (or simulates the configured data set) and builds the basis.
LoadedData load_data(const PipelineConfig& config);

/// Fits every group, aggregates, boosts, builds intervals. No tests, no I/O.
AnalysisResult estimate(const std::vector<Partition>& parts, const SplineBasis& basis, const PipelineConfig& config,
                        int threads);

/// Runs the tests selected in the config on existing estimates.
std::vector<TestOutcome> run_tests(const std::vector<Partition>& parts, const AnalysisResult& analysis,
                                   const PipelineConfig& config, int threads);

/// `fit`: load, estimate, test, then write fits.csv, gbar_grid.csv, tests.json,
/// fit_state.json and manifest.json into config.output.
AnalysisResult run_fit(const PipelineConfig& config);

/// `test`: re-read the data, load fit_state.json from config.output, rerun the
/// tests and rewrite tests.json and manifest.json.
std::vector<TestOutcome> run_saved_tests(const PipelineConfig& config);

/// `simulate`: run the Monte Carlo plan and write report.csv, report.json and manifest.json.
std::vector<ExperimentReport> run_simulate(const PipelineConfig& config);

/// Applies a command-line seed override everywhere the config carries a seed.
void override_seed(PipelineConfig& config, std::uint64_t seed);

}  // namespace aplm
