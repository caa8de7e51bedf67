#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "aplm/config.hpp"
#include "aplm/dataset.hpp"

namespace aplm {

/// What was done to one numeric column, enough to map values back to the file's units.
struct AppliedTransform {
  bool log10 = false;
  bool minmax = false;
  double min = 0.0;  // range after log10, before min-max
  double max = 1.0;

  double apply(double raw) const;
  double invert(double stored) const;
};

struct IngestionReport {
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::size_t dropped_nonfinite = 0;    // NaN, Inf, or log10 of a nonpositive value
  std::size_t dropped_unparseable = 0;  // not a number at all
  std::size_t dropped_empty_group = 0;
  std::map<std::string, AppliedTransform> transforms;

  std::size_t dropped() const { return dropped_nonfinite + dropped_unparseable + dropped_empty_group; }
};

struct IngestResult {
  Dataset data;
  IngestionReport report;
};

/// Splits one CSV record; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_line(const std::string& line);

/// Reads a comma-separated file with a header row, keeps the columns named by
/// the roles, applies the declared transforms and drops rows that are not
/// usable. Throws DataError for a missing column, a ragged row or no usable rows.
IngestResult ingest_csv(std::istream& in, const ColumnRoles& roles,
                        const std::map<std::string, ColumnTransform>& transforms);
IngestResult ingest_csv(const std::filesystem::path& path, const ColumnRoles& roles,
                        const std::map<std::string, ColumnTransform>& transforms);

}  // namespace aplm
