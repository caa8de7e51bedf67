// Command-line front end: fit, simulate, test.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "aplm/config.hpp"
#include "aplm/error.hpp"
#include "aplm/pipeline.hpp"
#include "aplm/serialization.hpp"
#include "aplm/version.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "JSON configuration file")->required();
  cmd->add_option("--seed", flags.seed, "RNG seed, overrides the config");
  cmd->add_option("--threads", flags.threads, "worker threads (0 = all cores)");
  cmd->add_option("--out", flags.out, "output directory, overrides the config");
}

aplm::PipelineConfig resolve(const CommonFlags& flags) {
  auto cfg = aplm::load_config(flags.config);
  if (flags.seed) aplm::override_seed(cfg, *flags.seed);
  if (flags.threads) {
    if (*flags.threads < 0) throw aplm::ConfigError("--threads must be >= 0");
    cfg.threads = *flags.threads;
  }
  if (flags.out) cfg.output = *flags.out;
  return cfg;
}

void print_tests(const std::vector<aplm::TestOutcome>& tests) {
  for (const auto& t : tests) {
    std::cout << "  " << t.name << ": ";
    if (t.result) {
      std::cout << "statistic " << aplm::format_double(t.result->statistic) << ", critical "
                << aplm::format_double(t.result->critical_value) << ", p " << aplm::format_double(t.result->p_value)
                << (t.result->reject ? ", reject" : ", do not reject") << "\n";
    } else {
      std::cout << t.status << " (" << t.message << ")\n";
    }
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Divide-and-conquer additive partially linear models"};
  app.set_version_flag("--version", aplm::kVersion);
  app.require_subcommand(1);

  CommonFlags fit_flags, sim_flags, test_flags;
  auto* fit = app.add_subcommand("fit", "fit every group, aggregate, boost and test");
  add_common(fit, fit_flags);
  auto* simulate = app.add_subcommand("simulate", "run a Monte Carlo preset or grid");
  add_common(simulate, sim_flags);
  auto* test = app.add_subcommand("test", "rerun the tests on fits saved by 'fit'");
  add_common(test, test_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (fit->parsed()) {
    const auto cfg = resolve(fit_flags);
    const auto result = aplm::run_fit(cfg);
    std::cout << "fitted " << result.fits.size() << " groups; pooled sigma2 " << aplm::format_double(result.sigma2)
              << "\n";
    print_tests(result.tests);
    std::cout << "artifacts written to " << cfg.output.string() << "\n";
  } else if (simulate->parsed()) {
    const auto cfg = resolve(sim_flags);
    const auto reports = aplm::run_simulate(cfg);
    for (const auto& r : reports) {
      std::cout << "N=" << r.config.N << " s=" << r.config.s << ": rmse " << aplm::format_double(r.rmse_gbar)
                << ", coverage " << aplm::format_double(r.coverage_ci1) << "/" << aplm::format_double(r.coverage_ci2)
                << ", failures " << r.failures << "\n";
    }
    std::cout << "artifacts written to " << cfg.output.string() << "\n";
  } else if (test->parsed()) {
    const auto cfg = resolve(test_flags);
    print_tests(aplm::run_saved_tests(cfg));
    std::cout << "tests.json written to " << cfg.output.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const aplm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    switch (e.kind()) {
      case aplm::ErrorKind::config: return kExitConfig;
      case aplm::ErrorKind::data: return kExitData;
      case aplm::ErrorKind::numerical: return kExitNumerical;
    }
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
