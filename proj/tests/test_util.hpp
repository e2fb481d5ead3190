#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace testutil {

// Fresh scratch directory under the build tree.
inline std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::path(MOLLIA_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

}  // namespace testutil

#include <cmath>
#include <vector>

namespace testutil {

// Pearson statistic against expected counts.
inline double chi_square(const std::vector<double>& observed, const std::vector<double>& expected) {
  double s = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (expected[i] > 0.0) s += (observed[i] - expected[i]) * (observed[i] - expected[i]) / expected[i];
  }
  return s;
}

// Upper 0.1% point of chi-square with df degrees of freedom (Wilson-Hilferty).
inline double chi_square_critical(double df) {
  const double z = 3.090232;
  const double a = 2.0 / (9.0 * df);
  return df * std::pow(1.0 - a + z * std::sqrt(a), 3.0);
}

}  // namespace testutil

#include <doctest.h>

#include "mollia/error.hpp"

namespace testutil {

// Kind of the mollia::Error thrown by fn; fails the test when nothing is thrown.
template <class Fn>
mollia::ErrorKind kind_of(Fn&& fn) {
  try {
    fn();
  } catch (const mollia::Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return mollia::ErrorKind::State;
}

}  // namespace testutil
