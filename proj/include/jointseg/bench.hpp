// Monte-Carlo benchmark harness: simulate -> select -> score, replicated
// with independent RNG streams, parallel over replicates only so each fit
// stays numerically deterministic.
#pragma once

#include "jointseg/io.hpp"
#include "jointseg/simulate.hpp"

#include <atomic>
#include <chrono>
#include <optional>
#include <thread>

namespace jointseg {

struct BenchConfig {
  SimConfig sim;  // sim.seed is the base seed; replicate r uses seed + r
  int replicates = 100;
  int k_max = -1;  // -1: selection default M + floor(N/25)
  int q_max = -1;  // -1: M-1
  std::optional<int> force_q;  // restrict the factor grid to one Q
  bool force_true_k = false;   // fit at K = K* instead of selecting K
  EmOptions em;
  int window = 0;
  int threads = 0;  // 0: hardware concurrency
};

struct BenchRow {
  std::uint64_t seed = 0;
  int m = 0, n = 0;
  double sigma = 0.0, rho = 0.0;
  std::string noise_kind;
  int k_true = 0;
  int k_hat = 0;
  int q_hat = 0;
  double fpr = 0.0, tpr = 0.0, rmse_sigma = 0.0, rmse_mean = 0.0;
  double wall_ms = 0.0;
  bool ok = false;
  std::string error;
};

struct BenchSummaryStat {
  double mean = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0;
};

struct BenchSummary {
  int replicates = 0;
  int failures = 0;
  BenchSummaryStat k_hat, q_hat, fpr, tpr, rmse_sigma, rmse_mean;
  double mean_k_true = 0.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  BenchSummary summary;
};

namespace detail {

inline BenchSummaryStat summarize(std::vector<double> v) {
  BenchSummaryStat s;
  if (v.empty()) return s;
  double total = 0.0;
  for (double x : v) total += x;
  s.mean = total / v.size();
  std::sort(v.begin(), v.end());
  auto quantile = [&](double p) {
    const double idx = p * (v.size() - 1);
    const size_t lo = static_cast<size_t>(idx);
    const size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = idx - lo;
    return v[lo] * (1.0 - frac) + v[hi] * frac;
  };
  s.q1 = quantile(0.25);
  s.median = quantile(0.5);
  s.q3 = quantile(0.75);
  return s;
}

}  // namespace detail

inline BenchRow run_replicate(const BenchConfig& cfg, int replicate) {
  BenchRow row;
  SimConfig sim = cfg.sim;
  sim.seed = cfg.sim.seed + static_cast<std::uint64_t>(replicate);
  row.seed = sim.seed;
  row.m = sim.m;
  row.n = sim.n;
  row.sigma = sim.sigma;
  row.rho = sim.rho;
  row.noise_kind = to_string(sim.noise_kind);

  const auto t0 = std::chrono::steady_clock::now();
  try {
    auto [y, truth] = simulate(sim);
    row.k_true = truth.segmentation.total_segments();

    ModelFit fit;
    int q_lo = 0, q_hi = -1;
    if (cfg.force_q) q_lo = q_hi = *cfg.force_q;

    if (cfg.force_true_k) {
      // Fit at the true number of segments, still choosing Q by BIC.
      SelectionGrid grid;
      grid.k_values = {row.k_true};
      for (int q = q_lo; q <= (q_hi < 0 ? sim.m - 1 : q_hi); ++q)
        grid.q_values.push_back(q);
      const CriterionTable t = select(y, grid, cfg.em);
      fit = t.best;
      row.k_hat = t.k_hat;
      row.q_hat = t.q_hat;
    } else {
      SelectionGrid grid =
          SelectionGrid::defaults(sim.n, sim.m, cfg.k_max, cfg.q_max);
      if (cfg.force_q) grid.q_values = {*cfg.force_q};
      const CriterionTable t = select(y, grid, cfg.em);
      fit = t.best;
      row.k_hat = t.k_hat;
      row.q_hat = t.q_hat;
    }

    const ScoreReport rep = evaluate_fit(fit, truth, cfg.window);
    row.fpr = rep.fpr;
    row.tpr = rep.tpr;
    row.rmse_sigma = rep.rmse_sigma;
    row.rmse_mean = rep.rmse_mean;
    row.ok = true;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  row.wall_ms = std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - t0)
                    .count();
  return row;
}

inline BenchResult run_bench(const BenchConfig& cfg) {
  if (cfg.replicates < 1)
    throw std::invalid_argument("run_bench: need at least one replicate");
  BenchResult result;
  result.rows.resize(cfg.replicates);

  const int width = cfg.threads > 0
                        ? cfg.threads
                        : std::max(1u, std::thread::hardware_concurrency());
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int r = next.fetch_add(1); r < cfg.replicates; r = next.fetch_add(1))
      result.rows[r] = run_replicate(cfg, r);
  };
  if (width <= 1 || cfg.replicates == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    const int spawn = std::min(width, cfg.replicates);
    pool.reserve(spawn);
    for (int i = 0; i < spawn; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  BenchSummary& s = result.summary;
  s.replicates = cfg.replicates;
  std::vector<double> k_hat, q_hat, fpr, tpr, rs, rm;
  double k_true_sum = 0.0;
  int ok_count = 0;
  for (const auto& row : result.rows) {
    if (!row.ok) {
      ++s.failures;
      continue;
    }
    ++ok_count;
    k_hat.push_back(row.k_hat);
    q_hat.push_back(row.q_hat);
    fpr.push_back(row.fpr);
    tpr.push_back(row.tpr);
    rs.push_back(row.rmse_sigma);
    rm.push_back(row.rmse_mean);
    k_true_sum += row.k_true;
  }
  s.k_hat = detail::summarize(k_hat);
  s.q_hat = detail::summarize(q_hat);
  s.fpr = detail::summarize(fpr);
  s.tpr = detail::summarize(tpr);
  s.rmse_sigma = detail::summarize(rs);
  s.rmse_mean = detail::summarize(rm);
  s.mean_k_true = ok_count ? k_true_sum / ok_count : 0.0;
  return result;
}

// One row per replicate; wall_ms is the only non-deterministic column.
inline void write_bench_csv(const std::vector<BenchRow>& rows,
                            const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write '" + path + "'");
  out << "seed,M,n,sigma,rho,noise_kind,K_true,K_hat,Q_hat,fpr,tpr,"
         "rmse_sigma,rmse_mean,wall_ms\n";
  for (const auto& r : rows) {
    out << r.seed << ',' << r.m << ',' << r.n << ','
        << detail::fmt_double(r.sigma) << ',' << detail::fmt_double(r.rho)
        << ',' << r.noise_kind << ',' << r.k_true << ',' << r.k_hat << ','
        << r.q_hat << ',' << detail::fmt_double(r.fpr) << ','
        << detail::fmt_double(r.tpr) << ',' << detail::fmt_double(r.rmse_sigma)
        << ',' << detail::fmt_double(r.rmse_mean) << ','
        << detail::fmt_double(r.wall_ms) << '\n';
  }
  if (!out) throw data_error("write failed for '" + path + "'");
}

inline void write_summary_csv(const BenchConfig& cfg, const BenchSummary& s,
                              const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write '" + path + "'");
  out << "M,n,sigma,rho,noise_kind,replicates,failures,mean_k_true,"
         "mean_k_hat,mean_q_hat,mean_fpr,mean_tpr,mean_rmse_sigma,"
         "mean_rmse_mean,"
         "q1_fpr,med_fpr,q3_fpr,q1_tpr,med_tpr,q3_tpr,"
         "q1_rmse_sigma,med_rmse_sigma,q3_rmse_sigma\n";
  out << cfg.sim.m << ',' << cfg.sim.n << ','
      << detail::fmt_double(cfg.sim.sigma) << ','
      << detail::fmt_double(cfg.sim.rho) << ',' << to_string(cfg.sim.noise_kind)
      << ',' << s.replicates << ',' << s.failures << ','
      << detail::fmt_double(s.mean_k_true) << ','
      << detail::fmt_double(s.k_hat.mean) << ','
      << detail::fmt_double(s.q_hat.mean) << ','
      << detail::fmt_double(s.fpr.mean) << ','
      << detail::fmt_double(s.tpr.mean) << ','
      << detail::fmt_double(s.rmse_sigma.mean) << ','
      << detail::fmt_double(s.rmse_mean.mean) << ','
      << detail::fmt_double(s.fpr.q1) << ',' << detail::fmt_double(s.fpr.median)
      << ',' << detail::fmt_double(s.fpr.q3) << ','
      << detail::fmt_double(s.tpr.q1) << ',' << detail::fmt_double(s.tpr.median)
      << ',' << detail::fmt_double(s.tpr.q3) << ','
      << detail::fmt_double(s.rmse_sigma.q1) << ','
      << detail::fmt_double(s.rmse_sigma.median) << ','
      << detail::fmt_double(s.rmse_sigma.q3) << '\n';
  if (!out) throw data_error("write failed for '" + path + "'");
}

}  // namespace jointseg
