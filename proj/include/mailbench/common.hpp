#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mailbench {

using Vec = std::vector<double>;

// Validation tolerances used across the library.
inline constexpr double kProbRowTol = 1e-12;   // probability rows at construction
inline constexpr double kOccupancyTol = 1e-10; // occupancy stage marginals
inline constexpr double kNashTol = 1e-9;       // matrix-game exploitability
inline constexpr double kGapTol = 1e-6;        // Markov-game Nash gap from value iteration

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

// Checks that `row` is a probability vector within `tol` and renormalizes the
// residual drift. Rows that are out of tolerance are rejected.
inline void normalize_prob_row(std::span<double> row, double tol, const std::string& what) {
  double sum = 0.0;
  for (double v : row) {
    require(std::isfinite(v), what + ": non-finite entry");
    require(v >= 0.0, what + ": negative entry");
    sum += v;
  }
  require(std::abs(sum - 1.0) <= tol, what + ": row sum " + std::to_string(sum) + " out of tolerance");
  for (double& v : row) v /= sum;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double l1_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

}  // namespace mailbench
