#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dcal {

using Rng = std::mt19937_64;

/// Paired samples: column i of `x` is a context, column i of `y` its outcome.
struct Batch {
  Eigen::MatrixXd x;
  Eigen::MatrixXd y;
  std::string id;

  Eigen::Index size() const { return y.cols(); }
  bool empty() const { return y.cols() == 0; }
};

void require_nonempty(const Batch& batch);

/// Distinct columns of a matrix in order of first appearance.
struct ColumnGroups {
  std::vector<Eigen::Index> representative;  // first column of each group
  std::vector<Eigen::Index> group_of;        // group index per column
  std::vector<Eigen::Index> count;           // group sizes
  Eigen::Index num_groups() const {
    return static_cast<Eigen::Index>(representative.size());
  }
};

ColumnGroups group_columns(const Eigen::MatrixXd& m);

Batch slice(const Batch& batch, Eigen::Index start, Eigen::Index n);

// Child seed for a labelled sub-stream, stable across platforms.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace dcal
