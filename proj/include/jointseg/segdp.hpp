// Exact least-squares segmentation by dynamic programming.
//
// Stage 1 solves, per series, the classical problem of cutting one signal
// into k segments for every k up to k_max; stage 2 allocates a total of K
// segments across the M series. Together they minimize the additive
// weighted criterion sum_m sum_k sum_t (y_tm - mu_km)^2 / psi_mm in
// O(K n^2 + K^2 M) instead of the naive O(n^2 M^2 K).
#pragma once

#include "jointseg/types.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace jointseg {

namespace detail {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

// Prefix sums of y and y^2 with Neumaier-compensated accumulation, so a
// segment cost is O(1) after O(n) setup and stays accurate on long
// near-constant stretches.
class PrefixSums {
 public:
  explicit PrefixSums(const Vector& y)
      : s_(y.size() + 1), s2_(y.size() + 1), inv_len_(y.size() + 1) {
    s_[0] = s2_[0] = 0.0;
    inv_len_[0] = 0.0;
    double sum = 0.0, sum_c = 0.0;
    double sq = 0.0, sq_c = 0.0;
    for (Eigen::Index t = 0; t < y.size(); ++t) {
      accumulate(sum, sum_c, y[t]);
      accumulate(sq, sq_c, y[t] * y[t]);
      s_[t + 1] = sum + sum_c;
      s2_[t + 1] = sq + sq_c;
      inv_len_[t + 1] = 1.0 / static_cast<double>(t + 1);
    }
  }

  // Within-segment sum of squares around the mean for rows [first, last).
  double cost(int first, int last) const {
    const int len = last - first;
    if (len == 1) return 0.0;
    const double s = s_[last] - s_[first];
    const double s2 = s2_[last] - s2_[first];
    return std::max(0.0, s2 - s * s * inv_len_[len]);
  }

  double sum(int first, int last) const { return s_[last] - s_[first]; }

 private:
  static void accumulate(double& sum, double& comp, double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }

  std::vector<double> s_, s2_, inv_len_;
};

// weight * sum_t (y_t - ybar)^2 for a whole segment.
inline double segment_cost(const Vector& y, double weight) {
  if (y.size() == 0) throw std::invalid_argument("segment_cost: empty segment");
  if (weight <= 0.0) throw std::invalid_argument("segment_cost: weight must be > 0");
  PrefixSums ps(y);
  return weight * ps.cost(0, static_cast<int>(y.size()));
}

// Stage-1 result for one series: optimal costs C(k) for k = 1..k_max plus
// the split table needed to recover breakpoints.
//
// The recursion runs on suffixes, D[k][i] = min_j cost(i,j) + D[k-1][j],
// scanning j upward and keeping strict improvements only. Backtracking
// from the left therefore yields, among all optimal segmentations, the
// lexicographically smallest breakpoint vector (leftmost tie rule).
class SingleSeriesDP {
 public:
  SingleSeriesDP(const Vector& y, double weight, int k_max, int min_len = 1)
      : n_(static_cast<int>(y.size())),
        k_max_(k_max),
        min_len_(min_len),
        weight_(weight) {
    if (weight <= 0.0)
      throw std::invalid_argument("dp_single: weight must be > 0");
    if (min_len < 1) throw std::invalid_argument("dp_single: min_len must be >= 1");
    if (k_max < 1 || static_cast<long>(k_max) * min_len > n_)
      throw std::invalid_argument(
          "dp_single: k_max must satisfy 1 <= k_max * min_len <= n");

    // The recursion runs unweighted; the weight is a common positive
    // factor within one series so it never changes an argmin, and C(k)
    // is rescaled on the way out.
    PrefixSums ps(y);
    cost_.assign(static_cast<size_t>(k_max_) * (n_ + 1), detail::kInf);
    split_.assign(static_cast<size_t>(k_max_) * (n_ + 1), -1);

    // k = 1: one segment covering [i, n)
    for (int i = 0; i + min_len_ <= n_; ++i) d(1, i) = ps.cost(i, n_);
    for (int k = 2; k <= k_max_; ++k) {
      const double* prev = &cost_[static_cast<size_t>(k - 2) * (n_ + 1)];
      const int j_hi = n_ - (k - 1) * min_len_;
      for (int i = 0; i + k * min_len_ <= n_; ++i) {
        double best = detail::kInf;
        int best_j = -1;
        for (int j = i + min_len_; j <= j_hi; ++j) {
          const double c = ps.cost(i, j) + prev[j];
          if (c < best) {
            best = c;
            best_j = j;
          }
        }
        d(k, i) = best;
        arg(k, i) = best_j;
      }
    }
  }

  int n() const { return n_; }
  int k_max() const { return k_max_; }

  // C(k): optimal cost of cutting the series into k segments.
  double cost_for(int k) const {
    check_k(k);
    return weight_ * d(k, 0);
  }

  // Interior breakpoints (1-based segment ends) of the optimal
  // k-segmentation.
  std::vector<int> breakpoints_for(int k) const {
    check_k(k);
    std::vector<int> bps;
    bps.reserve(k - 1);
    int i = 0;
    for (int level = k; level > 1; --level) {
      i = arg(level, i);
      bps.push_back(i);
    }
    return bps;
  }

 private:
  void check_k(int k) const {
    if (k < 1 || k > k_max_)
      throw std::invalid_argument("dp_single: k out of computed range");
  }
  double& d(int k, int i) { return cost_[static_cast<size_t>(k - 1) * (n_ + 1) + i]; }
  double d(int k, int i) const { return cost_[static_cast<size_t>(k - 1) * (n_ + 1) + i]; }
  int& arg(int k, int i) { return split_[static_cast<size_t>(k - 1) * (n_ + 1) + i]; }
  int arg(int k, int i) const { return split_[static_cast<size_t>(k - 1) * (n_ + 1) + i]; }

  int n_, k_max_, min_len_;
  double weight_;
  std::vector<double> cost_;
  std::vector<int> split_;
};

inline SingleSeriesDP dp_single(const Vector& y, double weight, int k_max,
                                int min_len = 1) {
  return SingleSeriesDP(y, weight, k_max, min_len);
}

// Stage-2 allocation: minimize sum_m C_m(K_m) subject to sum K_m = K and
// K_m >= 1. costs[m][k-1] holds C_m(k). Ties resolve to the
// lexicographically smallest (K_1, ..., K_M).
inline std::vector<int> allocate_segments(
    const std::vector<std::vector<double>>& costs, int total_k) {
  const int m_count = static_cast<int>(costs.size());
  if (m_count == 0) throw std::invalid_argument("allocate_segments: no series");
  long capacity = 0;
  for (const auto& c : costs) {
    if (c.empty()) throw std::invalid_argument("allocate_segments: empty cost row");
    capacity += static_cast<long>(c.size());
  }
  if (total_k < m_count || total_k > capacity)
    throw std::invalid_argument("allocate_segments: infeasible K");

  // best[m][k] = optimal cost of covering series m..M-1 with k segments.
  std::vector<std::vector<double>> best(
      m_count + 1, std::vector<double>(total_k + 1, detail::kInf));
  std::vector<std::vector<int>> take(m_count,
                                     std::vector<int>(total_k + 1, -1));
  best[m_count][0] = 0.0;
  for (int m = m_count - 1; m >= 0; --m) {
    const int k_cap = static_cast<int>(costs[m].size());
    const int series_left = m_count - 1 - m;
    for (int k = series_left + 1; k <= total_k; ++k) {
      double b = detail::kInf;
      int b_take = -1;
      const int hi = std::min(k_cap, k - series_left);
      for (int km = 1; km <= hi; ++km) {
        const double c = costs[m][km - 1] + best[m + 1][k - km];
        if (c < b) {
          b = c;
          b_take = km;
        }
      }
      best[m][k] = b;
      take[m][k] = b_take;
    }
  }
  if (!std::isfinite(best[0][total_k]))
    throw std::invalid_argument("allocate_segments: infeasible K");

  std::vector<int> alloc(m_count);
  int k = total_k;
  for (int m = 0; m < m_count; ++m) {
    alloc[m] = take[m][k];
    k -= alloc[m];
  }
  return alloc;
}

// Stage-1 tables for all series of a matrix; reusable across different K.
struct JointCostTables {
  std::vector<SingleSeriesDP> per_series;

  std::vector<std::vector<double>> cost_rows() const {
    std::vector<std::vector<double>> rows;
    rows.reserve(per_series.size());
    for (const auto& dp : per_series) {
      std::vector<double> row(dp.k_max());
      for (int k = 1; k <= dp.k_max(); ++k) row[k - 1] = dp.cost_for(k);
      rows.push_back(std::move(row));
    }
    return rows;
  }
};

inline JointCostTables stage1_tables(const Matrix& y_adj, const Vector& psi,
                                     int k_max, int min_len = 1) {
  if (psi.size() != y_adj.cols())
    throw std::invalid_argument("stage1_tables: psi size must match columns");
  JointCostTables tables;
  tables.per_series.reserve(y_adj.cols());
  for (Eigen::Index m = 0; m < y_adj.cols(); ++m)
    tables.per_series.emplace_back(y_adj.col(m), 1.0 / psi[m], k_max, min_len);
  return tables;
}

struct TwoStageResult {
  Segmentation segmentation;
  SegmentMeans means;
  double cost = 0.0;
};

// Extracts the optimal joint segmentation for a given total K from
// precomputed stage-1 tables. Means are plain per-segment averages of the
// input matrix.
inline TwoStageResult extract_joint(const JointCostTables& tables,
                                    const Matrix& y_adj, int total_k) {
  const auto alloc = allocate_segments(tables.cost_rows(), total_k);
  const int n = static_cast<int>(y_adj.rows());

  TwoStageResult res;
  res.segmentation.n = n;
  res.segmentation.breakpoints.resize(alloc.size());
  res.means.means.resize(alloc.size());
  for (size_t m = 0; m < alloc.size(); ++m) {
    const auto& dp = tables.per_series[m];
    res.cost += dp.cost_for(alloc[m]);
    res.segmentation.breakpoints[m] = dp.breakpoints_for(alloc[m]);
    PrefixSums ps(y_adj.col(static_cast<Eigen::Index>(m)));
    auto& mu = res.means.means[m];
    mu.resize(alloc[m]);
    for (int k = 0; k < alloc[m]; ++k) {
      auto [first, last] = res.segmentation.segment_rows(static_cast<int>(m), k);
      mu[k] = ps.sum(first, last) / (last - first);
    }
  }
  return res;
}

// Globally optimal joint segmentation of y_adj into K total segments for
// the weighted least-squares criterion with per-series weights 1/psi_mm.
inline TwoStageResult two_stage_segment(const Matrix& y_adj, const Vector& psi,
                                        int total_k, int min_len = 1) {
  const int n = static_cast<int>(y_adj.rows());
  const int m_count = static_cast<int>(y_adj.cols());
  if (total_k < m_count || static_cast<long>(total_k) >
                               static_cast<long>(n / min_len) * m_count)
    throw std::invalid_argument("two_stage_segment: K out of range");
  const int k_max = std::min(n / min_len, total_k - m_count + 1);
  const auto tables = stage1_tables(y_adj, psi, k_max, min_len);
  return extract_joint(tables, y_adj, total_k);
}

}  // namespace jointseg
