#pragma once

// Confidence sets by test inversion over a beta grid.  Accepted grid points
// are compacted into closed intervals; disconnected acceptance regions stay
// disconnected, and an everywhere-rejecting test yields an honest empty set.

#include <functional>
#include <vector>

#include "arboot/ar_test.hpp"

namespace arboot {

struct ConfidenceSet {
  std::vector<double> grid;
  std::vector<bool> accepted;
  std::vector<std::pair<double, double>> intervals;
  bool empty = true;
};

inline std::vector<double> linspace(double lo, double hi, Eigen::Index points) {
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (Eigen::Index i = 0; i < points; ++i)
    grid[static_cast<std::size_t>(i)] =
        lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  return grid;
}

inline ConfidenceSet invert_test(
    const std::vector<double>& grid,
    const std::function<TestResult(double beta0)>& run) {
  ConfidenceSet cs;
  cs.grid = grid;
  cs.accepted.resize(grid.size(), false);
  for (std::size_t i = 0; i < grid.size(); ++i)
    cs.accepted[i] = !run(grid[i]).reject;

  std::size_t i = 0;
  while (i < grid.size()) {
    if (!cs.accepted[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < grid.size() && cs.accepted[j + 1]) ++j;
    cs.intervals.emplace_back(grid[i], grid[j]);
    i = j + 1;
  }
  cs.empty = cs.intervals.empty();
  return cs;
}

}  // namespace arboot
