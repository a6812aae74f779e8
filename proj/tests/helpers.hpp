#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "teamcluster/matrix.hpp"
#include "teamcluster/rng.hpp"

namespace testing {

inline teamcluster::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  teamcluster::Rng rng(seed);
  teamcluster::Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

inline teamcluster::Matrix random_symmetric(std::size_t n, std::uint64_t seed) {
  auto a = random_matrix(n, n, seed);
  teamcluster::Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  return s;
}

/// Naive double-loop Euclidean distances.
inline teamcluster::Matrix naive_distances(const teamcluster::Matrix& x) {
  teamcluster::Matrix e(x.rows(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.rows(); ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < x.cols(); ++c) s += (x(i, c) - x(j, c)) * (x(i, c) - x(j, c));
      e(i, j) = std::sqrt(s);
    }
  return e;
}

/// True when the two labelings induce the same partition.
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::map<int, int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto [it, fresh] = ab.emplace(a[i], b[i]);
    if (!fresh && it->second != b[i]) return false;
    auto [jt, fresh2] = ba.emplace(b[i], a[i]);
    if (!fresh2 && jt->second != a[i]) return false;
  }
  return true;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("teamcluster_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
