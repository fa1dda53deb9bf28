// Test-only brute-force oracles. Everything here recomputes results by
// direct enumeration or scalar loops, independent of the library's DP and
// low-rank code paths.
#pragma once

#include "jointseg/types.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace oracle {

using jointseg::Matrix;
using jointseg::Vector;

// Sum of squared deviations around the mean, naive two-pass loop.
inline double direct_segment_cost(const Vector& y, int first, int last,
                                  double weight) {
  double mean = 0.0;
  for (int t = first; t < last; ++t) mean += y[t];
  mean /= (last - first);
  double ss = 0.0;
  for (int t = first; t < last; ++t) ss += (y[t] - mean) * (y[t] - mean);
  return weight * ss;
}

// All (k-1)-subsets of {1, ..., n-1} in lexicographic order.
inline std::vector<std::vector<int>> all_breakpoint_sets(int n, int k) {
  std::vector<std::vector<int>> out;
  if (k == 1) {
    out.push_back({});
    return out;
  }
  std::vector<int> comb(k - 1);
  for (int i = 0; i < k - 1; ++i) comb[i] = i + 1;
  while (true) {
    out.push_back(comb);
    int i = k - 2;
    while (i >= 0 && comb[i] == n - 1 - (k - 2 - i)) --i;
    if (i < 0) break;
    ++comb[i];
    for (int j = i + 1; j < k - 1; ++j) comb[j] = comb[j - 1] + 1;
  }
  return out;
}

inline double segmentation_cost(const Vector& y, const std::vector<int>& bps,
                                double weight) {
  double total = 0.0;
  int first = 0;
  for (int bp : bps) {
    total += direct_segment_cost(y, first, bp, weight);
    first = bp;
  }
  total += direct_segment_cost(y, first, static_cast<int>(y.size()), weight);
  return total;
}

struct SingleResult {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<int> breakpoints;
};

// Exhaustive optimum over all k-segmentations; first strictly better wins,
// so ties keep the lexicographically smallest breakpoint vector.
inline SingleResult brute_single(const Vector& y, double weight, int k) {
  SingleResult best;
  for (const auto& bps : all_breakpoint_sets(static_cast<int>(y.size()), k)) {
    const double c = segmentation_cost(y, bps, weight);
    if (c < best.cost) {
      best.cost = c;
      best.breakpoints = bps;
    }
  }
  return best;
}

// All compositions of total into parts.size() parts, each in [1, cap_i],
// lexicographic order.
inline void compositions(int total, const std::vector<int>& caps, size_t idx,
                         std::vector<int>& current,
                         std::vector<std::vector<int>>& out) {
  if (idx + 1 == caps.size()) {
    if (total >= 1 && total <= caps[idx]) {
      current.push_back(total);
      out.push_back(current);
      current.pop_back();
    }
    return;
  }
  for (int take = 1; take <= std::min(total, caps[idx]); ++take) {
    current.push_back(take);
    compositions(total - take, caps, idx + 1, current, out);
    current.pop_back();
  }
}

inline std::vector<std::vector<int>> all_compositions(
    int total, const std::vector<int>& caps) {
  std::vector<std::vector<int>> out;
  std::vector<int> current;
  compositions(total, caps, 0, current, out);
  return out;
}

struct JointResult {
  double cost = std::numeric_limits<double>::infinity();
  std::vector<int> allocation;
  std::vector<std::vector<int>> breakpoints;
};

// Exhaustive optimum over every (allocation, per-series segmentation)
// pair for the weighted joint criterion.
inline JointResult brute_joint(const Matrix& y, const Vector& psi,
                               int total_k) {
  const int m_count = static_cast<int>(y.cols());
  const int n = static_cast<int>(y.rows());
  std::vector<int> caps(m_count, n);

  // per-series exhaustive optima for every feasible k, computed once
  std::vector<std::vector<SingleResult>> table(m_count);
  for (int m = 0; m < m_count; ++m) {
    table[m].resize(n + 1);
    for (int k = 1; k <= n; ++k)
      table[m][k] = brute_single(y.col(m), 1.0 / psi[m], k);
  }

  JointResult best;
  for (const auto& alloc : all_compositions(total_k, caps)) {
    double c = 0.0;
    for (int m = 0; m < m_count; ++m) c += table[m][alloc[m]].cost;
    if (c < best.cost) {
      best.cost = c;
      best.allocation = alloc;
      best.breakpoints.clear();
      for (int m = 0; m < m_count; ++m)
        best.breakpoints.push_back(table[m][alloc[m]].breakpoints);
    }
  }
  return best;
}

}  // namespace oracle
