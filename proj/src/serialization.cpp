#include "aplm/serialization.hpp"

#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include <array>
#include <boost/version.hpp>
#include <charconv>
#include <fstream>
#include <sstream>

#include "aplm/error.hpp"
#include "aplm/version.hpp"

namespace aplm {

using nlohmann::ordered_json;

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc()) throw NumericalError("cannot format a floating-point value");
  return {buf.data(), ptr};
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw NumericalError("SHA-256 computation failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw DataError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + tmp.string() + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw DataError("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw DataError("cannot move '" + tmp.string() + "' into place: " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  CsvWriter& cell(const std::string& s) {
    sep();
    out_ += csv_field(s);
    return *this;
  }
  CsvWriter& num(double v) {
    sep();
    out_ += format_double(v);
    return *this;
  }
  CsvWriter& integer(long long v) {
    sep();
    out_ += std::to_string(v);
    return *this;
  }
  CsvWriter& empty() {
    sep();
    return *this;
  }
  void end_row() {
    out_ += '\n';
    first_ = true;
  }
  std::string str() const { return out_; }

 private:
  void sep() {
    if (!first_) out_ += ',';
    first_ = false;
  }
  std::string out_;
  bool first_ = true;
};

ordered_json vec_json(const Eigen::VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

ordered_json mat_json(const Eigen::MatrixXd& m) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r).transpose()));
  return a;
}

Eigen::VectorXd vec_from(const ordered_json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::MatrixXd mat_from(const ordered_json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return {};
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) throw DataError("ragged matrix in saved state");
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

ordered_json result_json(const TestOutcome& t) {
  ordered_json j;
  j["name"] = t.name;
  j["status"] = t.status;
  if (!t.result) {
    j["message"] = t.message;
    return j;
  }
  const auto& r = *t.result;
  j["statistic"] = r.statistic;
  j["critical_value"] = r.critical_value;
  j["p_value"] = r.p_value;
  j["reject"] = r.reject;
  j["alpha"] = r.alpha;
  j["reference"] = r.reference;
  const bool bootstrap = r.method == TestMethod::bootstrap_max || r.method == TestMethod::bootstrap_consecutive;
  j[bootstrap ? "replicates" : "dof"] = r.dof_or_replicates;
  j["equal_group_sizes"] = r.equal_group_sizes;
  return j;
}

std::string original_value(const LoadedData& loaded, const std::string& column, double v) {
  if (!loaded.ingestion) return format_double(v);
  const auto it = loaded.ingestion->transforms.find(column);
  return format_double(it == loaded.ingestion->transforms.end() ? v : it->second.invert(v));
}

}  // namespace

std::string fits_csv(const LoadedData& loaded, const AnalysisResult& analysis) {
  CsvWriter w;
  w.cell("group").cell("n").cell("sigma2_hat").cell("level");
  for (const auto& x : loaded.data.x_names) {
    for (const char* f : {"beta_hat_", "beta_breve_", "ci1_lower_", "ci1_upper_", "ci2_lower_", "ci2_upper_"}) {
      w.cell(f + x);
    }
  }
  w.end_row();
  for (std::size_t j = 0; j < analysis.fits.size(); ++j) {
    const auto& f = analysis.fits[j];
    w.cell(f.group_id).integer(f.n).num(f.sigma2_hat).num(f.level);
    const auto l1 = analysis.ci1[j].lower(), u1 = analysis.ci1[j].upper();
    const auto l2 = analysis.ci2[j].lower(), u2 = analysis.ci2[j].upper();
    for (Eigen::Index c = 0; c < f.beta_hat.size(); ++c) {
      w.num(f.beta_hat(c)).num(analysis.agg.beta_breve[j](c)).num(l1(c)).num(u1(c)).num(l2(c)).num(u2(c));
    }
    w.end_row();
  }
  return w.str();
}

std::string gbar_grid_csv(const LoadedData& loaded, const AnalysisResult& analysis) {
  constexpr int points = 200;
  CsvWriter w;
  w.cell("component").cell("column").cell("index").cell("unit").cell("z").cell("original").cell("gbar");
  w.end_row();
  const auto& cfg = analysis.agg.basis.config();
  for (int k = 0; k < analysis.agg.K(); ++k) {
    const auto& name = loaded.data.z_names[static_cast<std::size_t>(k)];
    for (int i = 0; i < points; ++i) {
      const double t = static_cast<double>(i) / (points - 1);
      const double z = cfg.transforms[static_cast<std::size_t>(k)].invert(t);
      w.integer(k).cell(name).integer(i).num(t).num(z);
      w.cell(original_value(loaded, name, z));
      w.num(analysis.agg.eval_component(k, z));
      w.end_row();
    }
  }
  return w.str();
}

ordered_json tests_json(const PipelineConfig& config, const AnalysisResult& analysis,
                        const std::vector<TestOutcome>& tests) {
  ordered_json j;
  j["alpha"] = config.tests.alpha;
  ordered_json summary;
  summary["groups"] = analysis.fits.size();
  summary["sigma2_pooled"] = analysis.sigma2;
  bool equal = true;
  for (const auto& f : analysis.fits) equal = equal && f.n == analysis.fits.front().n;
  summary["equal_group_sizes"] = equal;
  if (analysis.agg.beta_bar) summary["beta_bar"] = vec_json(*analysis.agg.beta_bar);
  if (analysis.fits.size() >= 2 && config.tests.wald_first < analysis.fits.size() &&
      config.tests.wald_second < analysis.fits.size()) {
    summary["wald_pair"] = {analysis.fits[config.tests.wald_first].group_id,
                            analysis.fits[config.tests.wald_second].group_id};
  }
  j["summary"] = summary;
  ordered_json arr = ordered_json::array();
  for (const auto& t : tests) arr.push_back(result_json(t));
  j["tests"] = arr;
  return j;
}

namespace {

const std::vector<TestMethod> kAllMethods = {TestMethod::psi1,          TestMethod::psi2,
                                             TestMethod::bootstrap_max, TestMethod::bootstrap_consecutive,
                                             TestMethod::lrt_component, TestMethod::lrt_joint};

}  // namespace

std::string report_csv(const std::vector<ExperimentReport>& reports) {
  CsvWriter w;
  for (const char* h : {"N", "s", "n", "log_s_over_log_N", "beta_scheme", "delta", "g1_shift", "sigma",
                        "interior_knots", "degree", "seed", "replications", "failures", "rmse_empirical_mean",
                        "rmse_empirical_median", "rmse_grid_mean", "coverage_ci1", "coverage_ci2", "mean_len_ci1",
                        "mean_len_ci2", "var_ratio", "mean_sigma2"}) {
    w.cell(h);
  }
  for (auto m : kAllMethods) {
    const auto name = to_string(m);
    w.cell("reject_" + name).cell("mean_stat_" + name).cell("dof_" + name);
  }
  w.end_row();
  for (const auto& r : reports) {
    const auto& c = r.config;
    w.integer(c.N).integer(c.s).integer(c.group_size());
    w.num(c.N > 1 ? std::log(static_cast<double>(c.s)) / std::log(static_cast<double>(c.N)) : 0.0);
    w.cell(to_string(c.beta_scheme)).num(c.delta).num(c.g1_shift).num(c.sigma);
    w.integer(c.interior_knots).integer(c.degree).cell(std::to_string(c.seed));
    w.integer(r.replications).integer(r.failures);
    w.num(r.rmse_gbar).num(r.median_rmse_gbar).num(r.rmse_grid).num(r.coverage_ci1).num(r.coverage_ci2);
    w.num(r.mean_len_ci1).num(r.mean_len_ci2).num(r.var_ratio).num(r.mean_sigma2);
    for (auto m : kAllMethods) {
      if (const auto* t = r.find(m)) {
        w.num(t->rejection_rate).num(t->mean_statistic).num(t->dof_or_replicates);
      } else {
        w.empty().empty().empty();
      }
    }
    w.end_row();
  }
  return w.str();
}

ordered_json report_json(const std::string& preset, const std::vector<ExperimentReport>& reports) {
  ordered_json j;
  j["preset"] = preset;
  ordered_json grid = ordered_json::array();
  for (const auto& r : reports) {
    ordered_json e;
    const auto& c = r.config;
    e["config"] = {{"N", c.N},
                   {"s", c.s},
                   {"beta_scheme", to_string(c.beta_scheme)},
                   {"beta_value", c.beta_value},
                   {"delta", c.delta},
                   {"g1_shift", c.g1_shift},
                   {"sigma", c.sigma},
                   {"interior_knots", c.interior_knots},
                   {"degree", c.degree},
                   {"seed", c.seed}};
    e["options"] = {{"replications", r.options.replications},
                    {"alpha", r.options.alpha},
                    {"level", r.options.level},
                    {"weights", to_string(r.options.weights)},
                    {"wald", r.options.wald},
                    {"bootstrap", r.options.bootstrap},
                    {"bootstrap_replicates", r.options.bootstrap_replicates},
                    {"lrt", r.options.lrt},
                    {"lrt_component", r.options.lrt_component}};
    e["failures"] = r.failures;
    e["rmse_empirical_mean"] = r.rmse_gbar;
    e["rmse_empirical_median"] = r.median_rmse_gbar;
    e["rmse_grid_mean"] = r.rmse_grid;
    e["coverage_ci1"] = r.coverage_ci1;
    e["coverage_ci2"] = r.coverage_ci2;
    e["mean_len_ci1"] = r.mean_len_ci1;
    e["mean_len_ci2"] = r.mean_len_ci2;
    e["var_ratio"] = r.var_ratio;
    e["mean_sigma2"] = r.mean_sigma2;
    ordered_json tests = ordered_json::array();
    for (const auto& t : r.tests) {
      tests.push_back({{"name", to_string(t.method)},
                       {"runs", t.runs},
                       {"rejection_rate", t.rejection_rate},
                       {"mean_statistic", t.mean_statistic},
                       {"mean_critical_value", t.mean_critical_value},
                       {"dof_or_replicates", t.dof_or_replicates}});
    }
    e["tests"] = tests;
    ordered_json errors = ordered_json::array();
    for (const auto& d : r.details) {
      if (!d.ok()) errors.push_back({{"replication", d.replication}, {"error", d.error}});
    }
    e["errors"] = errors;
    grid.push_back(e);
  }
  j["grid"] = grid;
  return j;
}

ordered_json spline_config_json(const SplineConfig& c) {
  ordered_json j;
  j["degree"] = c.degree;
  j["interior_knots"] = c.interior_knots;
  j["scale_columns"] = c.scale_columns;
  j["free_level"] = c.free_level;
  ordered_json t = ordered_json::array();
  for (const auto& tr : c.transforms) t.push_back({{"offset", tr.offset}, {"scale", tr.scale}});
  j["transforms"] = t;
  return j;
}

SplineConfig spline_config_from_json(const ordered_json& j) {
  SplineConfig c;
  c.degree = j.at("degree").get<int>();
  c.interior_knots = j.at("interior_knots").get<int>();
  c.scale_columns = j.at("scale_columns").get<bool>();
  c.free_level = j.at("free_level").get<bool>();
  for (const auto& t : j.at("transforms")) {
    c.transforms.push_back({t.at("offset").get<double>(), t.at("scale").get<double>()});
  }
  c.validate();
  return c;
}

ordered_json fit_state_json(const AnalysisResult& analysis) {
  ordered_json j;
  j["format"] = "aplm-fit-state";
  j["version"] = 1;
  j["spline"] = spline_config_json(analysis.agg.basis.config());
  ordered_json fits = ordered_json::array();
  for (const auto& f : analysis.fits) {
    ordered_json e;
    e["group_id"] = f.group_id;
    e["n"] = f.n;
    e["beta_hat"] = vec_json(f.beta_hat);
    e["gamma_hat"] = vec_json(f.gamma_hat);
    e["basis_means"] = mat_json(f.basis_means);
    e["centering_constants"] = vec_json(f.centering_constants);
    e["level"] = f.level;
    e["sigma2_hat"] = f.sigma2_hat;
    e["rss"] = f.rss;
    e["D_hat"] = mat_json(f.D_hat);
    e["A_hat"] = mat_json(f.A_hat);
    fits.push_back(e);
  }
  j["fits"] = fits;
  const auto& a = analysis.agg;
  ordered_json agg;
  agg["gbar_gamma"] = vec_json(a.gbar_gamma);
  agg["pooled_basis_means"] = mat_json(a.pooled_basis_means);
  agg["whole_sample_centering"] = vec_json(a.whole_sample_centering);
  agg["weights"] = a.weights;
  agg["group_ids"] = a.group_ids;
  if (a.beta_bar) agg["beta_bar"] = vec_json(*a.beta_bar);
  ordered_json breve = ordered_json::array();
  for (const auto& b : a.beta_breve) breve.push_back(vec_json(b));
  agg["beta_breve"] = breve;
  j["aggregate"] = agg;
  return j;
}

AnalysisResult fit_state_from_json(const ordered_json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "aplm-fit-state" || doc.at("version").get<int>() != 1) {
      throw DataError("unsupported saved-fit format");
    }
    const SplineBasis basis(spline_config_from_json(doc.at("spline")));
    AnalysisResult a;
    for (const auto& e : doc.at("fits")) {
      SubPopFit f;
      f.group_id = e.at("group_id").get<std::string>();
      f.n = e.at("n").get<Eigen::Index>();
      f.beta_hat = vec_from(e.at("beta_hat"));
      f.gamma_hat = vec_from(e.at("gamma_hat"));
      f.basis_means = mat_from(e.at("basis_means"));
      f.centering_constants = vec_from(e.at("centering_constants"));
      f.level = e.at("level").get<double>();
      f.sigma2_hat = e.at("sigma2_hat").get<double>();
      f.rss = e.at("rss").get<double>();
      f.D_hat = mat_from(e.at("D_hat"));
      f.A_hat = mat_from(e.at("A_hat"));
      f.basis = basis;
      a.fits.push_back(std::move(f));
    }
    const auto& g = doc.at("aggregate");
    a.agg.gbar_gamma = vec_from(g.at("gbar_gamma"));
    a.agg.pooled_basis_means = mat_from(g.at("pooled_basis_means"));
    a.agg.whole_sample_centering = vec_from(g.at("whole_sample_centering"));
    a.agg.weights = g.at("weights").get<std::vector<double>>();
    a.agg.group_ids = g.at("group_ids").get<std::vector<std::string>>();
    if (g.contains("beta_bar")) a.agg.beta_bar = vec_from(g.at("beta_bar"));
    for (const auto& b : g.at("beta_breve")) a.agg.beta_breve.push_back(vec_from(b));
    a.agg.basis = basis;
    if (a.fits.empty() || a.agg.beta_breve.size() != a.fits.size()) throw DataError("saved fits are incomplete");
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("saved fits are malformed: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("saved fits carry an invalid spline configuration: ") + e.what());
  }
}

std::vector<ArtifactRecord> write_artifacts(const std::filesystem::path& dir,
                                            const std::vector<std::pair<std::string, std::string>>& files) {
  std::vector<ArtifactRecord> out;
  for (const auto& [name, content] : files) {
    write_file(dir / name, content);
    out.push_back({name, sha256_hex(content), content.size()});
  }
  return out;
}

ordered_json manifest_json(const std::string& command, const PipelineConfig& config, int threads, double seconds,
                           const std::vector<ArtifactRecord>& artifacts, const ordered_json& extra) {
  ordered_json j;
  j["tool"] = "aplm";
  j["version"] = kVersion;
  j["command"] = command;
  j["seed"] = config.seed;
  j["threads"] = threads;
  j["elapsed_seconds"] = seconds;
  j["libraries"] = {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                  std::to_string(EIGEN_MINOR_VERSION)},
                    {"boost", BOOST_LIB_VERSION},
                    {"openssl", OPENSSL_VERSION_TEXT},
                    {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                          std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  j["config"] = config.echo;
  ordered_json arr = ordered_json::array();
  for (const auto& a : artifacts) arr.push_back({{"file", a.file}, {"sha256", a.sha256}, {"bytes", a.bytes}});
  j["artifacts"] = arr;
  if (extra.is_object()) {
    for (const auto& [k, v] : extra.items()) j[k] = v;
  }
  return j;
}

}  // namespace aplm
