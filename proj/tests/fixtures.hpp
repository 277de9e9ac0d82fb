#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hybridscreen/seeds.hpp"
#include "hybridscreen/table.hpp"

namespace fixtures {

using hybridscreen::DescriptorTable;
using hybridscreen::Index;
using hybridscreen::Rng;

inline constexpr Index kPlantedColumn = 7;

/// 400 x 21, balanced classes; only column 7 depends on the label.
inline DescriptorTable planted(std::uint64_t seed, Index n = 400, Index p = 21, double shift = 3.0) {
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  DescriptorTable t;
  t.matrix.resize(n, p);
  Eigen::VectorXd y(n);
  for (Index j = 0; j < p; ++j) t.feature_names.push_back("d" + std::to_string(j));
  for (Index i = 0; i < n; ++i) {
    y(i) = static_cast<double>(i % 2);
    t.compound_ids.push_back("m" + std::to_string(i));
    for (Index j = 0; j < p; ++j) t.matrix(i, j) = noise(rng);
    if (p > kPlantedColumn) t.matrix(i, kPlantedColumn) += shift * y(i);
  }
  t.labels = y;
  return t;
}

/// Two well separated Gaussian blobs in two dimensions.
inline DescriptorTable blobs(std::uint64_t seed, Index n = 200) {
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 0.5);
  DescriptorTable t;
  t.matrix.resize(n, 2);
  Eigen::VectorXd y(n);
  t.feature_names = {"a", "b"};
  for (Index i = 0; i < n; ++i) {
    y(i) = static_cast<double>(i % 2);
    const double c = y(i) > 0.5 ? 2.0 : -2.0;
    t.matrix(i, 0) = c + noise(rng);
    t.matrix(i, 1) = c + noise(rng);
    t.compound_ids.push_back("b" + std::to_string(i));
  }
  t.labels = y;
  return t;
}

/// y = 3 x0 - 2 x1 + small noise.
inline DescriptorTable linear_regression(std::uint64_t seed, Index n = 200, double sigma = 0.01) {
  Rng rng(seed);
  std::normal_distribution<double> x(0.0, 1.0);
  std::normal_distribution<double> eps(0.0, sigma);
  DescriptorTable t;
  t.task = hybridscreen::TaskKind::regression;
  t.matrix.resize(n, 2);
  Eigen::VectorXd y(n);
  t.feature_names = {"x0", "x1"};
  for (Index i = 0; i < n; ++i) {
    t.matrix(i, 0) = x(rng);
    t.matrix(i, 1) = x(rng);
    y(i) = 3.0 * t.matrix(i, 0) - 2.0 * t.matrix(i, 1) + eps(rng);
    t.compound_ids.push_back("r" + std::to_string(i));
  }
  t.labels = y;
  return t;
}

/// Writes a table as CSV with a Name column first and an optional label column last.
inline void write_csv(const std::filesystem::path& path, const DescriptorTable& t, const std::string& label = "Tox") {
  std::ofstream out(path);
  out.precision(17);
  out << "Name";
  for (const auto& f : t.feature_names) out << ',' << f;
  if (t.labels) out << ',' << label;
  out << '\n';
  for (Index i = 0; i < t.rows(); ++i) {
    out << t.compound_ids[static_cast<std::size_t>(i)];
    for (Index j = 0; j < t.cols(); ++j) out << ',' << t.matrix(i, j);
    if (t.labels) out << ',' << (*t.labels)(i);
    out << '\n';
  }
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Fresh scratch directory under the system temp path.
inline std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("hybridscreen_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// O(n^2) Mann-Whitney pair count.
inline double pair_count_auc(const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
  double num = 0.0;
  double pairs = 0.0;
  for (Index i = 0; i < s.size(); ++i) {
    if (y(i) < 0.5) continue;
    for (Index j = 0; j < s.size(); ++j) {
      if (y(j) > 0.5) continue;
      pairs += 1.0;
      if (s(i) > s(j)) num += 1.0;
      else if (s(i) == s(j)) num += 0.5;
    }
  }
  return num / pairs;
}

}  // namespace fixtures
