#include "dcal/samples.hpp"

#include <string>
#include <unordered_map>

#include "dcal/errors.hpp"
#include "dcal/kernel.hpp"

namespace dcal {

void require_nonempty(const Batch& batch) {
  if (batch.empty()) throw InvalidInput("empty batch");
  if (batch.x.cols() != batch.y.cols())
    throw InvalidInput("batch contexts and outcomes differ in length");
}

ColumnGroups group_columns(const Eigen::MatrixXd& m) {
  ColumnGroups g;
  g.group_of.resize(static_cast<std::size_t>(m.cols()));
  std::unordered_map<std::string, Eigen::Index> seen;
  seen.reserve(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.cols(); ++i) {
    auto [it, added] = seen.try_emplace(detail::anchor_key(m.col(i)), g.num_groups());
    if (added) {
      g.representative.push_back(i);
      g.count.push_back(0);
    }
    g.group_of[static_cast<std::size_t>(i)] = it->second;
    ++g.count[static_cast<std::size_t>(it->second)];
  }
  return g;
}

Batch slice(const Batch& batch, Eigen::Index start, Eigen::Index n) {
  Batch out;
  out.x = batch.x.middleCols(start, n);
  out.y = batch.y.middleCols(start, n);
  out.id = batch.id;
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over the pair
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace dcal
