// Model selection for the pair (K, Q): BIC over the number of factors at
// fixed K, a modified BIC over the number of segments, and the two-stage
// heuristic combining them.
#pragma once

#include "jointseg/factor_em.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace jointseg {

// Effective parameter count of the Q-factor covariance model. Loadings
// contribute MQ - Q(Q-1)/2 free parameters after the rotation constraint;
// noise adds 1 (homoscedastic) or M (heteroscedastic).
inline int count_params(int m, int q, NoiseMode mode) {
  if (m < 1 || q < 0 || q > m - 1)
    throw std::invalid_argument("count_params: requires 0 <= Q <= M-1");
  const int loadings = m * q - q * (q - 1) / 2;
  return loadings + (mode == NoiseMode::homoscedastic ? 1 : m);
}

// BIC_K(Q) = 2 log L - D_Q log(n); the penalty uses the number of time
// points n, not N = nM.
inline double bic_q(const SeriesMatrix& y, const ModelFit& fit) {
  const int d = count_params(y.m(), fit.factor.q(), fit.factor.mode);
  return 2.0 * fit.loglik - d * std::log(static_cast<double>(y.n()));
}

// Modified BIC for the number of segments (Zhang-Siegmund form adapted to
// joint segmentation):
//   ((K-M)/2) log(SS_all/2) + ((N-K)/2 + 1) log(1 + SS_bg/SS_wg)
//   + log Gamma((N-K)/2 + 1) - (1/2) sum_{m,k} log n_k^m - (K-M) log N
// with Sigma_Q^{-1}-weighted quadratic forms and mu_hat the raw per-segment
// averages under the fitted segmentation. Returns -inf and sets the flag
// when SS_wg degenerates to zero (exact-fit data).
inline double mbic_k(const SeriesMatrix& y, const ModelFit& fit,
                     bool* degenerate = nullptr) {
  const Segmentation& seg = fit.segmentation;
  if (seg.n != y.n() || seg.num_series() != y.m())
    throw std::invalid_argument("mbic_k: segmentation does not conform");
  if (degenerate) *degenerate = false;

  const int k_total = seg.total_segments();
  const int m_count = y.m();
  const double n_obs = static_cast<double>(y.total());
  const LowRankSigma lr(fit.factor);

  SegmentMeans raw;
  raw.means.resize(m_count);
  double log_len_sum = 0.0;
  for (int m = 0; m < m_count; ++m) {
    raw.means[m].resize(seg.segments_in(m));
    for (int k = 0; k < seg.segments_in(m); ++k) {
      auto [first, last] = seg.segment_rows(m, k);
      raw.means[m][k] = y.values.col(m).segment(first, last - first).mean();
      log_len_sum += std::log(static_cast<double>(last - first));
    }
  }

  const double ss_wg = lr.quad_rows(y.values - expand_means(seg, raw));
  const double grand = y.values.sum() / n_obs;
  const double ss_all =
      lr.quad_rows((y.values.array() - grand).matrix());
  const double ss_bg = ss_all - ss_wg;
  if (ss_wg <= 0.0) {
    if (degenerate) *degenerate = true;
    return -std::numeric_limits<double>::infinity();
  }

  const double half_free = 0.5 * (n_obs - k_total);
  return 0.5 * (k_total - m_count) * std::log(ss_all / 2.0) +
         (half_free + 1.0) * std::log1p(ss_bg / ss_wg) +
         std::lgamma(half_free + 1.0) - 0.5 * log_len_sum -
         (k_total - m_count) * std::log(n_obs);
}

struct SelectionGrid {
  std::vector<int> k_values;
  std::vector<int> q_values;

  // Defaults: K in M .. M + floor(N/25), Q in 0 .. M-1; either bound can
  // be overridden (-1 keeps the default).
  static SelectionGrid defaults(int n, int m, int k_max = -1, int q_max = -1) {
    if (k_max < 0)
      k_max = m + static_cast<int>(static_cast<long>(n) * m / 25);
    k_max = std::min(k_max, n * m);
    if (q_max < 0) q_max = m - 1;
    q_max = std::min(q_max, m - 1);
    SelectionGrid g;
    for (int k = m; k <= k_max; ++k) g.k_values.push_back(k);
    for (int q = 0; q <= q_max; ++q) g.q_values.push_back(q);
    return g;
  }
};

struct CellResult {
  int k = 0;
  int q = 0;
  bool ok = false;
  double loglik = std::numeric_limits<double>::quiet_NaN();
  double bic = std::numeric_limits<double>::quiet_NaN();
  std::string error;
};

struct KRow {
  int k = 0;
  bool ok = false;
  int q_hat = -1;
  double mbic = -std::numeric_limits<double>::infinity();
  bool mbic_degenerate = false;
  ModelFit fit;  // the fit at (k, q_hat)
  std::string error;
};

struct CriterionTable {
  std::vector<CellResult> cells;  // K-major, Q ascending within K
  std::vector<KRow> per_k;        // ascending K
  int k_hat = -1;
  int q_hat = -1;
  ModelFit best;
  int failures = 0;
};

// Two-stage heuristic: Q_hat(K) = argmax_Q BIC_K(Q) for every K, then
// K_hat = argmax_K mBIC at (K, Q_hat(K)). Ties break toward smaller Q and
// smaller K. Per-cell failures are recorded and skipped. K rows run
// independently (optionally in parallel); within a row the Q sweep warm
// starts each fit from the previous one's segmentation, which keeps the
// fits of one K comparable while never sharing state across K.
inline CriterionTable select(const SeriesMatrix& y, const SelectionGrid& grid,
                             const EmOptions& opts = {}, int threads = 1,
                             bool warm_start_within_k = true) {
  if (grid.k_values.empty() || grid.q_values.empty())
    throw std::invalid_argument("select: empty grid");

  CriterionTable table;
  table.per_k.resize(grid.k_values.size());
  table.cells.resize(grid.k_values.size() * grid.q_values.size());

  auto run_k = [&](size_t ki) {
    const int k = grid.k_values[ki];
    KRow& row = table.per_k[ki];
    row.k = k;

    // The default initial segmentation depends on (Y, K) only; compute it
    // once and share it across the Q sweep.
    EmOptions cell_opts = opts;
    try {
      if (!cell_opts.init_segmentation) {
        cell_opts.init_segmentation =
            two_stage_segment(y.values, Vector::Ones(y.m()), k,
                              opts.min_seg_len)
                .segmentation;
      }
    } catch (const std::exception& e) {
      for (size_t qi = 0; qi < grid.q_values.size(); ++qi) {
        CellResult& cell = table.cells[ki * grid.q_values.size() + qi];
        cell.k = k;
        cell.q = grid.q_values[qi];
        cell.error = e.what();
      }
      row.error = e.what();
      return;
    }

    double best_bic = -std::numeric_limits<double>::infinity();
    for (size_t qi = 0; qi < grid.q_values.size(); ++qi) {
      CellResult& cell = table.cells[ki * grid.q_values.size() + qi];
      cell.k = k;
      cell.q = grid.q_values[qi];
      try {
        ModelFit fit = em_fit(y, k, cell.q, cell_opts);
        cell.loglik = fit.loglik;
        cell.bic = bic_q(y, fit);
        cell.ok = true;
        if (warm_start_within_k)
          cell_opts.init_segmentation = fit.segmentation;
        if (cell.bic > best_bic) {
          best_bic = cell.bic;
          row.q_hat = cell.q;
          row.fit = std::move(fit);
          row.ok = true;
        }
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
    if (row.ok) row.mbic = mbic_k(y, row.fit, &row.mbic_degenerate);
  };

  const size_t jobs = grid.k_values.size();
  if (threads <= 1 || jobs <= 1) {
    for (size_t ki = 0; ki < jobs; ++ki) run_k(ki);
  } else {
    std::atomic<size_t> next{0};
    auto worker = [&] {
      for (size_t ki = next.fetch_add(1); ki < jobs; ki = next.fetch_add(1))
        run_k(ki);
    };
    std::vector<std::thread> pool;
    const size_t width = std::min<size_t>(threads, jobs);
    pool.reserve(width);
    for (size_t i = 0; i < width; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (const auto& cell : table.cells)
    if (!cell.ok) ++table.failures;

  // Exact-fit rows (SS_wg = 0, flagged degenerate) dominate: the criterion
  // diverges to +inf as SS_wg -> 0. Among them parsimony picks the
  // smallest K; otherwise the usual argmax applies.
  const KRow* winner = nullptr;
  for (const auto& row : table.per_k) {
    if (!row.ok) continue;
    if (!winner) {
      winner = &row;
      continue;
    }
    if (row.mbic_degenerate != winner->mbic_degenerate) {
      if (row.mbic_degenerate) winner = &row;
    } else if (row.mbic_degenerate) {
      if (row.k < winner->k) winner = &row;
    } else if (row.mbic > winner->mbic) {
      winner = &row;
    }
  }
  if (!winner) throw numeric_error("select: every grid cell failed");
  table.k_hat = winner->k;
  table.q_hat = winner->q_hat;
  table.best = winner->fit;
  return table;
}

}  // namespace jointseg
