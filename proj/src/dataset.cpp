#include "aplm/dataset.hpp"

#include <unordered_map>

#include "aplm/error.hpp"

namespace aplm {

void Dataset::validate() const {
  const Eigen::Index n = rows();
  if (n == 0) throw DataError("dataset has no rows");
  if (x.rows() != n || z.rows() != n || static_cast<Eigen::Index>(groups.size()) != n) {
    throw DataError("dataset columns have unequal lengths");
  }
  if (z.cols() == 0) throw DataError("dataset needs at least one spline covariate");
  if (!y.allFinite() || !x.allFinite() || !z.allFinite()) throw DataError("dataset contains non-finite values");
  for (const auto& g : groups) {
    if (g.empty()) throw DataError("dataset contains an empty group label");
  }
}

std::vector<Partition> Dataset::partition() const {
  validate();
  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::vector<Eigen::Index>> members;
  std::vector<std::string> labels;
  for (Eigen::Index i = 0; i < rows(); ++i) {
    const auto& label = groups[static_cast<std::size_t>(i)];
    auto [it, inserted] = slot.try_emplace(label, members.size());
    if (inserted) {
      members.emplace_back();
      labels.push_back(label);
    }
    members[it->second].push_back(i);
  }

  std::vector<Partition> parts(members.size());
  for (std::size_t j = 0; j < members.size(); ++j) {
    const auto& idx = members[j];
    const auto nj = static_cast<Eigen::Index>(idx.size());
    Partition& part = parts[j];
    part.group_id = labels[j];
    part.y.resize(nj);
    part.x.resize(nj, x.cols());
    part.z.resize(nj, z.cols());
    for (Eigen::Index r = 0; r < nj; ++r) {
      const Eigen::Index i = idx[static_cast<std::size_t>(r)];
      part.y(r) = y(i);
      part.x.row(r) = x.row(i);
      part.z.row(r) = z.row(i);
    }
  }
  return parts;
}

Partition Dataset::as_single_partition(std::string group_id) const {
  validate();
  return Partition{std::move(group_id), y, x, z};
}

Dataset concatenate(const std::vector<Partition>& parts) {
  Dataset out;
  if (parts.empty()) return out;
  Eigen::Index n = 0;
  for (const auto& p : parts) n += p.size();
  const auto d = parts.front().x.cols();
  const auto k = parts.front().z.cols();
  out.y.resize(n);
  out.x.resize(n, d);
  out.z.resize(n, k);
  out.groups.reserve(static_cast<std::size_t>(n));
  Eigen::Index row = 0;
  for (const auto& p : parts) {
    if (p.x.cols() != d || p.z.cols() != k) throw DataError("partitions have inconsistent column counts");
    out.y.segment(row, p.size()) = p.y;
    out.x.middleRows(row, p.size()) = p.x;
    out.z.middleRows(row, p.size()) = p.z;
    out.groups.insert(out.groups.end(), static_cast<std::size_t>(p.size()), p.group_id);
    row += p.size();
  }
  return out;
}

}  // namespace aplm
