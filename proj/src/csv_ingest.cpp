#include "aplm/csv_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>

#include "aplm/error.hpp"

namespace aplm {

double AppliedTransform::apply(double raw) const {
  double v = log10 ? std::log10(raw) : raw;
  if (minmax) v = (v - min) / (max - min);
  return v;
}

double AppliedTransform::invert(double stored) const {
  double v = minmax ? min + stored * (max - min) : stored;
  return log10 ? std::pow(10.0, v) : v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  if (quoted) throw DataError("unterminated quoted field");
  fields.push_back(std::move(field));
  return fields;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// nullopt when the text is not a number; NaN and Inf parse and are caught later.
std::optional<double> parse_number(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  const char* first = t.data();
  if (*first == '+') ++first;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), value);
  if (ec == std::errc::result_out_of_range) return std::numeric_limits<double>::infinity();
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  return value;
}

}  // namespace

IngestResult ingest_csv(std::istream& in, const ColumnRoles& roles,
                        const std::map<std::string, ColumnTransform>& transforms) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV input is empty (no header row)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  auto header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  auto locate = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw DataError("column '" + name + "' not found in CSV header");
  };
  // Numeric columns in storage order: response, linear..., spline...
  std::vector<std::string> numeric{roles.response};
  numeric.insert(numeric.end(), roles.linear.begin(), roles.linear.end());
  numeric.insert(numeric.end(), roles.spline.begin(), roles.spline.end());
  std::vector<std::size_t> idx;
  for (const auto& name : numeric) idx.push_back(locate(name));
  const std::size_t group_idx = locate(roles.group);

  std::vector<ColumnTransform> ops;
  for (const auto& name : numeric) {
    const auto it = transforms.find(name);
    ops.push_back(it == transforms.end() ? ColumnTransform{} : it->second);
  }

  IngestResult result;
  auto& report = result.report;
  std::vector<std::vector<double>> columns(numeric.size());
  std::vector<std::string> groups;
  std::size_t line_no = 1;
  std::vector<double> row(numeric.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++report.rows_read;
    std::vector<std::string> fields;
    try {
      fields = split_csv_line(line);
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (fields.size() != header.size()) {
      throw DataError("line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " fields, header has " + std::to_string(header.size()));
    }
    const std::string label = trim(fields[group_idx]);
    if (label.empty()) {
      ++report.dropped_empty_group;
      continue;
    }
    bool unparseable = false;
    bool nonfinite = false;
    for (std::size_t c = 0; c < numeric.size(); ++c) {
      const auto v = parse_number(fields[idx[c]]);
      if (!v) {
        unparseable = true;
        break;
      }
      row[c] = ops[c].log10 ? std::log10(*v) : *v;
      if (!std::isfinite(row[c])) nonfinite = true;
    }
    if (unparseable) {
      ++report.dropped_unparseable;
      continue;
    }
    if (nonfinite) {
      ++report.dropped_nonfinite;
      continue;
    }
    for (std::size_t c = 0; c < numeric.size(); ++c) columns[c].push_back(row[c]);
    groups.push_back(label);
  }
  report.rows_kept = groups.size();
  if (groups.empty()) throw DataError("no usable rows after ingestion filtering");

  for (std::size_t c = 0; c < numeric.size(); ++c) {
    AppliedTransform t;
    t.log10 = ops[c].log10;
    t.minmax = ops[c].minmax;
    if (t.minmax) {
      const auto [lo, hi] = std::minmax_element(columns[c].begin(), columns[c].end());
      t.min = *lo;
      t.max = *hi;
      if (!(t.max > t.min)) throw DegenerateCovariateError("column '" + numeric[c] + "' is constant; cannot min-max scale");
      for (double& v : columns[c]) v = (v - t.min) / (t.max - t.min);
    }
    report.transforms[numeric[c]] = t;
  }

  const auto n = static_cast<Eigen::Index>(groups.size());
  const auto d = static_cast<Eigen::Index>(roles.linear.size());
  const auto K = static_cast<Eigen::Index>(roles.spline.size());
  Dataset& data = result.data;
  data.y = Eigen::Map<const Eigen::VectorXd>(columns[0].data(), n);
  data.x.resize(n, d);
  data.z.resize(n, K);
  for (Eigen::Index c = 0; c < d; ++c) {
    data.x.col(c) = Eigen::Map<const Eigen::VectorXd>(columns[static_cast<std::size_t>(1 + c)].data(), n);
  }
  for (Eigen::Index c = 0; c < K; ++c) {
    data.z.col(c) = Eigen::Map<const Eigen::VectorXd>(columns[static_cast<std::size_t>(1 + d + c)].data(), n);
  }
  data.groups = std::move(groups);
  data.x_names = roles.linear;
  data.z_names = roles.spline;
  data.validate();
  return result;
}

IngestResult ingest_csv(const std::filesystem::path& path, const ColumnRoles& roles,
                        const std::map<std::string, ColumnTransform>& transforms) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file '" + path.string() + "'");
  return ingest_csv(in, roles, transforms);
}

}  // namespace aplm
