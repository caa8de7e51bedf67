#include "aplm/pipeline.hpp"

#include <chrono>
#include <filesystem>

#include "aplm/error.hpp"
#include "aplm/parallel.hpp"
#include "aplm/random.hpp"
#include "aplm/serialization.hpp"
#include "aplm/simulation.hpp"

namespace aplm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

ContrastMatrix contrast_for(const PipelineConfig& config, int d) {
  if (config.tests.contrast.size() == 0) return ContrastMatrix::identity(d);
  if (config.tests.contrast.cols() != d) {
    throw ConfigError("tests.contrast has " + std::to_string(config.tests.contrast.cols()) + " columns, data has " +
                      std::to_string(d) + " linear covariates");
  }
  try {
    return ContrastMatrix(config.tests.contrast);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("tests.contrast: ") + e.what());
  }
}

template <class Fn>
TestOutcome attempt(const char* name, Fn&& fn) {
  TestOutcome out;
  out.name = name;
  try {
    out.result = fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    out.status = "error";
    out.message = e.what();
  }
  return out;
}

TestOutcome skipped(const char* name, std::string why) {
  TestOutcome out;
  out.name = name;
  out.status = "skipped";
  out.message = std::move(why);
  return out;
}

const std::vector<std::string> kFitArtifacts = {"fits.csv", "gbar_grid.csv", "tests.json", "fit_state.json"};

std::vector<ArtifactRecord> existing_records(const std::filesystem::path& dir) {
  std::vector<ArtifactRecord> out;
  for (const auto& name : kFitArtifacts) {
    const auto path = dir / name;
    if (!std::filesystem::exists(path)) continue;
    const std::string content = read_file(path);
    out.push_back({name, sha256_hex(content), content.size()});
  }
  return out;
}

nlohmann::ordered_json ingestion_json(const LoadedData& loaded) {
  nlohmann::ordered_json j;
  j["rows"] = loaded.data.rows();
  if (loaded.ingestion) {
    const auto& r = *loaded.ingestion;
    j["rows_read"] = r.rows_read;
    j["rows_kept"] = r.rows_kept;
    j["dropped_nonfinite"] = r.dropped_nonfinite;
    j["dropped_unparseable"] = r.dropped_unparseable;
    j["dropped_empty_group"] = r.dropped_empty_group;
  } else {
    j["source"] = "simulated";
  }
  return j;
}

}  // namespace

void override_seed(PipelineConfig& config, std::uint64_t seed) {
  config.seed = seed;
  if (config.simulated_data) config.simulated_data->seed = seed;
  if (config.simulation) {
    for (auto& c : config.simulation->grid) c.seed = seed;
  }
}

LoadedData load_data(const PipelineConfig& config) {
  validate_for_fit(config);
  LoadedData loaded;
  if (config.simulated_data) {
    loaded.data = generate_dataset(*config.simulated_data);
    auto sc = simulation_spline_config(*config.simulated_data);
    sc.scale_columns = config.scale_columns;
    loaded.basis = SplineBasis(sc);
    return loaded;
  }
  auto ingested = ingest_csv(*config.input, config.roles, config.transforms);
  loaded.data = std::move(ingested.data);
  loaded.ingestion = std::move(ingested.report);
  SplineConfig sc;
  sc.degree = config.degree;
  sc.interior_knots = config.interior_knots;
  sc.scale_columns = config.scale_columns;
  for (int k = 0; k < loaded.data.K(); ++k) {
    const Eigen::VectorXd col = loaded.data.z.col(k);
    try {
      sc.transforms.push_back(fit_domain_transform({col.data(), static_cast<std::size_t>(col.size())}));
    } catch (const DegenerateCovariateError&) {
      throw DegenerateCovariateError("spline column '" + loaded.data.z_names[static_cast<std::size_t>(k)] +
                                     "' is constant");
    }
  }
  loaded.basis = SplineBasis(sc);
  return loaded;
}

AnalysisResult estimate(const std::vector<Partition>& parts, const SplineBasis& basis, const PipelineConfig& config,
                        int threads) {
  AnalysisResult a;
  a.fits = fit_all(parts, basis, threads);
  a.agg = aggregate_g(a.fits, config.weights);
  if (config.homogeneous) a.agg.beta_bar = aggregate_beta(a.fits, config.weights);
  boost_all(parts, a.agg, threads);
  a.sigma2 = pooled_sigma2(a.fits);
  for (std::size_t j = 0; j < a.fits.size(); ++j) {
    a.ci1.push_back(ci1(a.fits[j], a.sigma2, config.tests.level));
    a.ci2.push_back(ci2(a.fits[j], a.agg.beta_breve[j], a.sigma2, config.tests.level));
  }
  return a;
}

std::vector<TestOutcome> run_tests(const std::vector<Partition>& parts, const AnalysisResult& analysis,
                                   const PipelineConfig& config, int threads) {
  const auto& t = config.tests;
  const int d = analysis.fits.front().d();
  const int K = analysis.fits.front().K();
  const auto q = contrast_for(config, d);
  const std::size_t s = parts.size();
  std::vector<TestOutcome> out;
  const std::string one_group = "needs at least two groups";

  for (auto [enabled, method, name] : {std::tuple{t.psi1, TestMethod::psi1, "psi1"},
                                       std::tuple{t.psi2, TestMethod::psi2, "psi2"}}) {
    if (!enabled) continue;
    if (s < 2) {
      out.push_back(skipped(name, one_group));
      continue;
    }
    if (t.wald_first >= s || t.wald_second >= s) throw ConfigError("tests.wald_pair refers to a missing group");
    out.push_back(attempt(name, [&] {
      return psi_pairwise(analysis.fits, analysis.agg.beta_breve, t.wald_first, t.wald_second, q, analysis.sigma2,
                          t.alpha, method);
    }));
  }

  BootstrapOptions bo;
  bo.replicates = t.bootstrap_replicates;
  bo.alpha = t.alpha;
  bo.seed = derive_seed(config.seed, {0x626f6f74ULL});
  bo.threads = threads;
  if (t.bootstrap_max) {
    Eigen::VectorXd null = Eigen::VectorXd::Zero(d);
    if (t.nulls) {
      if (t.nulls->size() != d) throw ConfigError("tests.nulls must have one value per linear covariate");
      null = *t.nulls;
    }
    const std::vector<Eigen::VectorXd> nulls(s, null);
    out.push_back(attempt("bootstrap_max", [&] {
      return bootstrap_max_test(analysis.agg.beta_breve, nulls, q, parts, analysis.sigma2, bo);
    }));
  }
  if (t.bootstrap_consecutive) {
    if (s < 2) {
      out.push_back(skipped("bootstrap_consecutive", one_group));
    } else {
      out.push_back(attempt("bootstrap_consecutive", [&] {
        return bootstrap_consecutive_test(analysis.agg.beta_breve, q, parts, analysis.sigma2, bo);
      }));
    }
  }
  if (t.lrt_component) {
    if (t.lrt_component_index >= K) throw ConfigError("tests.lrt_component is past the last spline column");
    if (s < 2) {
      out.push_back(skipped("lrt_component", one_group));
    } else {
      out.push_back(attempt("lrt_component", [&] {
        return lrt_homogeneity_component(parts, analysis.fits, t.lrt_component_index, analysis.sigma2, t.alpha);
      }));
    }
  }
  if (t.lrt_joint) {
    if (s < 2) {
      out.push_back(skipped("lrt_joint", one_group));
    } else {
      out.push_back(
          attempt("lrt_joint", [&] { return lrt_homogeneity_joint(parts, analysis.fits, analysis.sigma2, t.alpha); }));
    }
  }
  return out;
}

AnalysisResult run_fit(const PipelineConfig& config) {
  const auto start = Clock::now();
  const int threads = resolve_threads(config.threads);
  const LoadedData loaded = load_data(config);
  const auto parts = loaded.data.partition();
  AnalysisResult analysis = estimate(parts, loaded.basis, config, threads);
  analysis.tests = run_tests(parts, analysis, config, threads);

  const auto records = write_artifacts(
      config.output, {{"fits.csv", fits_csv(loaded, analysis)},
                      {"gbar_grid.csv", gbar_grid_csv(loaded, analysis)},
                      {"tests.json", tests_json(config, analysis, analysis.tests).dump(2) + "\n"},
                      {"fit_state.json", fit_state_json(analysis).dump(2) + "\n"}});
  nlohmann::ordered_json extra;
  extra["ingestion"] = ingestion_json(loaded);
  extra["groups"] = analysis.fits.size();
  write_file(config.output / "manifest.json",
             manifest_json("fit", config, threads, seconds_since(start), records, extra).dump(2) + "\n");
  return analysis;
}

std::vector<TestOutcome> run_saved_tests(const PipelineConfig& config) {
  const auto start = Clock::now();
  const int threads = resolve_threads(config.threads);
  const auto state_path = config.output / "fit_state.json";
  if (!std::filesystem::exists(state_path)) {
    throw ConfigError("no saved fits at '" + state_path.string() + "'; run 'fit' first");
  }
  nlohmann::ordered_json state;
  try {
    state = nlohmann::ordered_json::parse(read_file(state_path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("saved fits are unreadable: " + std::string(e.what()));
  }
  AnalysisResult analysis = fit_state_from_json(state);

  const LoadedData loaded = load_data(config);
  const auto parts = loaded.data.partition();
  if (parts.size() != analysis.fits.size()) throw DataError("saved fits do not match the data: group count differs");
  for (std::size_t j = 0; j < parts.size(); ++j) {
    const auto& f = analysis.fits[j];
    if (f.group_id != parts[j].group_id || f.n != parts[j].size()) {
      throw DataError("saved fits do not match the data at group '" + parts[j].group_id + "'");
    }
    if (!(f.basis == loaded.basis)) throw DataError("saved fits use a different spline basis than the data");
  }
  analysis.sigma2 = pooled_sigma2(analysis.fits);
  analysis.tests = run_tests(parts, analysis, config, threads);

  write_file(config.output / "tests.json", tests_json(config, analysis, analysis.tests).dump(2) + "\n");
  nlohmann::ordered_json extra;
  extra["ingestion"] = ingestion_json(loaded);
  extra["groups"] = analysis.fits.size();
  write_file(config.output / "manifest.json",
             manifest_json("test", config, threads, seconds_since(start), existing_records(config.output), extra)
                     .dump(2) +
                 "\n");
  return analysis.tests;
}

std::vector<ExperimentReport> run_simulate(const PipelineConfig& config) {
  validate_for_simulate(config);
  const auto start = Clock::now();
  const int threads = resolve_threads(config.threads);
  const auto& plan = *config.simulation;
  ExperimentOptions options = plan.options;
  options.threads = threads;
  auto reports = run_grid(plan.grid, options);

  const auto records =
      write_artifacts(config.output, {{"report.csv", report_csv(reports)},
                                      {"report.json", report_json(plan.preset, reports).dump(2) + "\n"}});
  nlohmann::ordered_json extra;
  extra["preset"] = plan.preset;
  extra["grid_points"] = plan.grid.size();
  write_file(config.output / "manifest.json",
             manifest_json("simulate", config, threads, seconds_since(start), records, extra).dump(2) + "\n");
  return reports;
}

}  // namespace aplm
