// Scoring of estimated segmentations and covariance against simulation
// truth: breakpoint FPR/TPR, RMSE(Sigma) and RMSE(T mu).
#pragma once

#include "jointseg/types.hpp"

#include <cmath>

namespace jointseg {

struct BreakpointCounts {
  long true_total = 0;
  long detected_total = 0;
  long matched = 0;
};

struct ScoreReport {
  double fpr = 0.0;
  double tpr = 1.0;
  double rmse_sigma = 0.0;
  double rmse_mean = 0.0;
  BreakpointCounts counts;
};

// FPR = unmatched detected / detected, TPR = matched true / true, pooled
// over series. A detected breakpoint matches an unmatched true breakpoint
// within +-window. Matching scans both sorted lists left to right, pairing
// each detected position with the earliest feasible true position, which
// attains the maximum number of matches for this interval structure.
// No detections gives FPR 0; no true breakpoints gives TPR 1.
inline ScoreReport score_breakpoints(const Segmentation& detected,
                                     const Segmentation& truth,
                                     int window = 0) {
  if (detected.n != truth.n || detected.num_series() != truth.num_series())
    throw std::invalid_argument("score_breakpoints: dimension mismatch");
  if (window < 0) throw std::invalid_argument("score_breakpoints: window < 0");

  ScoreReport rep;
  for (int m = 0; m < detected.num_series(); ++m) {
    const auto& det = detected.breakpoints[m];
    const auto& tru = truth.breakpoints[m];
    rep.counts.detected_total += static_cast<long>(det.size());
    rep.counts.true_total += static_cast<long>(tru.size());
    size_t ti = 0;
    for (int d : det) {
      while (ti < tru.size() && tru[ti] < d - window) ++ti;
      if (ti < tru.size() && tru[ti] <= d + window) {
        ++rep.counts.matched;
        ++ti;
      }
    }
  }
  rep.fpr = rep.counts.detected_total == 0
                ? 0.0
                : static_cast<double>(rep.counts.detected_total -
                                      rep.counts.matched) /
                      rep.counts.detected_total;
  rep.tpr = rep.counts.true_total == 0
                ? 1.0
                : static_cast<double>(rep.counts.matched) /
                      rep.counts.true_total;
  return rep;
}

// [M^{-2} sum_{m,m'} (est - truth)^2]^{1/2}
inline double rmse_sigma(const Matrix& est, const Matrix& truth) {
  if (est.rows() != truth.rows() || est.cols() != truth.cols() ||
      est.rows() != est.cols())
    throw std::invalid_argument("rmse_sigma: dimension mismatch");
  const double m2 = static_cast<double>(est.rows()) * est.cols();
  return std::sqrt((est - truth).squaredNorm() / m2);
}

// Entrywise RMSE over all N = nM entries of the expanded mean matrices.
inline double rmse_mean(const Matrix& est, const Matrix& truth) {
  if (est.rows() != truth.rows() || est.cols() != truth.cols())
    throw std::invalid_argument("rmse_mean: dimension mismatch");
  return std::sqrt((est - truth).squaredNorm() / est.size());
}

// Full per-replicate score of a fit against simulation truth.
inline ScoreReport evaluate_fit(const ModelFit& fit, const SimTruth& truth,
                                int window = 0) {
  ScoreReport rep = score_breakpoints(fit.segmentation, truth.segmentation, window);
  rep.rmse_sigma = rmse_sigma(assemble_sigma(fit.factor), truth.sigma);
  rep.rmse_mean =
      rmse_mean(expand_means(fit.segmentation, fit.means), truth.mean_matrix);
  return rep;
}

}  // namespace jointseg
