#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace aplm {

/// Observations belonging to one sub-population G_j.
struct Partition {
  std::string group_id;
  Eigen::VectorXd y;  // n
  Eigen::MatrixXd x;  // n x d, linear covariates
  Eigen::MatrixXd z;  // n x K, raw spline covariates

  Eigen::Index size() const { return y.size(); }
  int d() const { return static_cast<int>(x.cols()); }
  int K() const { return static_cast<int>(z.cols()); }
};

/// Columnar storage of the pooled sample {(Y_i, X_i, Z_i)} with group labels.
struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
  Eigen::MatrixXd z;
  std::vector<std::string> groups;
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;

  Eigen::Index rows() const { return y.size(); }
  int d() const { return static_cast<int>(x.cols()); }
  int K() const { return static_cast<int>(z.cols()); }

  /// Throws DataError on ragged columns, non-finite values, empty labels or no rows.
  void validate() const;

  /// Splits rows by group label; groups appear in order of first occurrence and
  /// rows keep their relative order inside a group.
  std::vector<Partition> partition() const;

  /// All rows as one partition (the s = 1 view).
  Partition as_single_partition(std::string group_id = "all") const;
};

/// Concatenates partitions back into one dataset, in the given order.
Dataset concatenate(const std::vector<Partition>& parts);

}  // namespace aplm
