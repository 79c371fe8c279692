#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fgsc/panel.hpp"
#include "fgsc/rng.hpp"

namespace testing {

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("fgsc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline fgsc::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, fgsc::Rng& rng,
                                  double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  fgsc::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = u(rng);
  return m;
}

// Group 0 is the target, labelled g0..g{J-1}, times 1..T.
inline fgsc::PanelData random_panel(std::size_t J, std::size_t T, std::size_t T0,
                                    fgsc::Rng& rng) {
  std::vector<std::string> labels;
  for (std::size_t j = 0; j < J; ++j) labels.push_back("g" + std::to_string(j));
  std::vector<int> times;
  for (std::size_t t = 1; t <= T; ++t) times.push_back(static_cast<int>(t));
  return fgsc::PanelData(random_matrix(static_cast<Eigen::Index>(J),
                                       static_cast<Eigen::Index>(T), rng, 0.0, 10.0),
                         labels, times, 0, T0);
}

inline fgsc::PanelData panel_from_rows(const std::vector<std::vector<double>>& rows,
                                       std::size_t T0) {
  const auto J = rows.size();
  const auto T = rows.front().size();
  fgsc::Matrix m(static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(T));
  std::vector<std::string> labels;
  for (std::size_t j = 0; j < J; ++j) {
    labels.push_back("g" + std::to_string(j));
    for (std::size_t t = 0; t < T; ++t)
      m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t)) = rows[j][t];
  }
  std::vector<int> times;
  for (std::size_t t = 1; t <= T; ++t) times.push_back(static_cast<int>(t));
  return fgsc::PanelData(m, labels, times, 0, T0);
}

}  // namespace testing
