// Likelihoods and the EM algorithm for joint segmentation under a factor
// model.
//
// Model: Y = T mu + Z B' + E with Z_t ~ N(0, I_Q) latent and E_t ~ N(0, Psi)
// diagonal, so marginally Y_t ~ N(mu_t, Sigma) with Sigma = B B' + Psi.
// Conditionally on Z the series are independent, which makes the M-step
// segmentation criterion additive across segments and lets exact DP run
// inside EM.
//
// All Sigma^{-1} algebra goes through the factorization
//   Sigma^{-1} = Psi^{-1} - Psi^{-1} B (I_Q + B' Psi^{-1} B)^{-1} B' Psi^{-1}
//   log|Sigma| = log|Psi| + log|I_Q + B' Psi^{-1} B|
// so the dense M x M covariance is never formed or inverted when Q < M.
#pragma once

#include "jointseg/segdp.hpp"
#include "jointseg/types.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <random>

namespace jointseg {

// Variances are floored here to keep 1/psi finite on noiseless inputs.
constexpr double kNoiseFloor = 1e-12;

struct EmOptions {
  int max_iter = 200;
  double rel_tol = 1e-6;  // on relative change of -2 loglik
  NoiseMode noise_mode = NoiseMode::homoscedastic;
  int min_seg_len = 1;
  // Extra EM runs from randomly drawn initial segmentations; the best
  // final loglik wins. 0 keeps the deterministic warm start only.
  int random_restarts = 0;
  std::uint64_t seed = 0;
  // Overrides the default initial segmentation (used to share the raw-data
  // segmentation across Q values at fixed K during model selection).
  std::optional<Segmentation> init_segmentation;
  // When set, receives the full log-likelihood after every EM iteration.
  std::vector<double>* loglik_trace = nullptr;
};

// Sigma^{-1} as an operator plus log|Sigma|, via the Q x Q capacitance
// G = I_Q + B' Psi^{-1} B.
class LowRankSigma {
 public:
  explicit LowRankSigma(const FactorParams& f)
      : b_(f.loadings), psi_inv_(f.psi.cwiseInverse()) {
    if ((f.psi.array() <= 0.0).any())
      throw std::invalid_argument("LowRankSigma: psi must be > 0");
    log_det_ = f.psi.array().log().sum();
    if (f.q() > 0) {
      Matrix g = Matrix::Identity(f.q(), f.q());
      g.selfadjointView<Eigen::Lower>().rankUpdate(
          (psi_inv_.cwiseSqrt().asDiagonal() * b_).transpose());
      llt_.compute(g);
      if (llt_.info() != Eigen::Success)
        throw numeric_error("LowRankSigma: capacitance factorization failed");
      log_det_ +=
          2.0 * llt_.matrixL().toDenseMatrix().diagonal().array().log().sum();
    }
  }

  double log_det() const { return log_det_; }

  // W = G^{-1} = (I_Q + B' Psi^{-1} B)^{-1}, the conditional variance of
  // the latent factors.
  Matrix w() const {
    const int q = static_cast<int>(b_.cols());
    if (q == 0) return Matrix(0, 0);
    return llt_.solve(Matrix::Identity(q, q));
  }

  // Rows of r are vectors; returns r * Sigma^{-1}.
  Matrix apply_rows(const Matrix& r) const {
    Matrix u = r * psi_inv_.asDiagonal();
    if (b_.cols() == 0) return u;
    Matrix v = u * b_;                                    // n x Q
    Matrix vw = llt_.solve(v.transpose()).transpose();    // v G^{-1}
    u.noalias() -= (vw * b_.transpose()) * psi_inv_.asDiagonal();
    return u;
  }

  // sum_t r_t Sigma^{-1} r_t'
  double quad_rows(const Matrix& r) const {
    const Matrix u = r * psi_inv_.asDiagonal();
    double quad = (u.array() * r.array()).sum();
    if (b_.cols() > 0) {
      const Matrix v = u * b_;
      const Matrix vw = llt_.solve(v.transpose()).transpose();
      quad -= (vw.array() * v.array()).sum();
    }
    return quad;
  }

 private:
  Matrix b_;
  Vector psi_inv_;
  Eigen::LLT<Matrix> llt_;
  double log_det_ = 0.0;
};

inline LowRankSigma lowrank_inverse_logdet(const FactorParams& f) {
  return LowRankSigma(f);
}

namespace detail {
inline void check_fit_dims(const SeriesMatrix& y, const Segmentation& seg,
                           const FactorParams& factor) {
  if (seg.n != y.n() || seg.num_series() != y.m())
    throw std::invalid_argument("fit does not conform to data dimensions");
  if (factor.m() != y.m())
    throw std::invalid_argument("factor parameters do not match series count");
}
}  // namespace detail

// Observed-data log-likelihood
//   -2 log L = N log(2 pi) + n log|Sigma| + sum_t ||Y_t - mu_t||^2_{Sigma^-1}
inline double full_loglik(const SeriesMatrix& y, const Segmentation& seg,
                          const SegmentMeans& means,
                          const FactorParams& factor) {
  detail::check_fit_dims(y, seg, factor);
  const LowRankSigma lr(factor);
  const Matrix resid = y.values - expand_means(seg, means);
  const double m2ll = y.total() * std::log(2.0 * std::numbers::pi) +
                      y.n() * lr.log_det() + lr.quad_rows(resid);
  return -0.5 * m2ll;
}

inline double full_loglik(const SeriesMatrix& y, const ModelFit& fit) {
  return full_loglik(y, fit.segmentation, fit.means, fit.factor);
}

// E-step: W = (I_Q + B' Psi^{-1} B)^{-1} once (time-invariant) and
// Zhat_t = (Y_t - mu_t) Psi^{-1} B W for every t. Returns empty moments
// for Q = 0.
inline LatentMoments e_step(const SeriesMatrix& y, const Segmentation& seg,
                            const SegmentMeans& means,
                            const FactorParams& factor) {
  detail::check_fit_dims(y, seg, factor);
  LatentMoments mom;
  if (factor.q() == 0) {
    mom.zhat = Matrix(y.n(), 0);
    mom.w = Matrix(0, 0);
    return mom;
  }
  const LowRankSigma lr(factor);
  mom.w = lr.w();
  const Matrix resid = y.values - expand_means(seg, means);
  // (R Psi^{-1} B) G^{-1} equals R Psi^{-1} B W
  mom.zhat = (resid * factor.psi.cwiseInverse().asDiagonal() * factor.loadings) *
             mom.w;
  return mom;
}

inline LatentMoments e_step(const SeriesMatrix& y, const ModelFit& fit) {
  return e_step(y, fit.segmentation, fit.means, fit.factor);
}

// M-step loadings: B = [sum_t (Y_t-mu_t)' Zhat_t][sum_t (Zhat_t'Zhat_t + W)]^{-1}
inline Matrix m_step_loadings(const SeriesMatrix& y, const Segmentation& seg,
                              const SegmentMeans& means,
                              const LatentMoments& mom) {
  const int q = static_cast<int>(mom.zhat.cols());
  if (q == 0) return Matrix(y.m(), 0);
  const Matrix resid = y.values - expand_means(seg, means);
  const Matrix cross = resid.transpose() * mom.zhat;          // M x Q
  Matrix gram = mom.zhat.transpose() * mom.zhat + y.n() * mom.w;
  return gram.ldlt().solve(cross.transpose()).transpose();
}

// M-step noise. E_t = Y_t - mu_t - Zhat_t B' with the freshly updated B.
// Heteroscedastic: diag of (1/n) sum_t (Y_t - mu_t)' E_t.
// Homoscedastic: sigma^2 = (1/N) sum_t [E_t E_t' + Tr(B' B W)].
inline Vector m_step_noise(const SeriesMatrix& y, const Segmentation& seg,
                           const SegmentMeans& means, const LatentMoments& mom,
                           const Matrix& b, NoiseMode mode) {
  const Matrix resid = y.values - expand_means(seg, means);
  Matrix e = resid;
  if (b.cols() > 0) e.noalias() -= mom.zhat * b.transpose();
  if (mode == NoiseMode::heteroscedastic) {
    Vector psi = (resid.array() * e.array()).colwise().sum() / y.n();
    return psi.cwiseMax(kNoiseFloor);
  }
  double s = e.squaredNorm();
  if (b.cols() > 0) s += y.n() * (b.transpose() * b * mom.w).trace();
  const double sigma2 = std::max(s / y.total(), kNoiseFloor);
  return Vector::Constant(y.m(), sigma2);
}

// M-step segmentation: segments the factor-adjusted data
// Ybreve = Y - Zhat B' with weights 1/psi_mm by exact two-stage DP.
inline TwoStageResult m_step_segmentation(const SeriesMatrix& y,
                                          const LatentMoments& mom,
                                          const Matrix& b, const Vector& psi,
                                          int total_k, int min_len = 1) {
  Matrix adjusted = y.values;
  if (b.cols() > 0) adjusted.noalias() -= mom.zhat * b.transpose();
  return two_stage_segment(adjusted, psi, total_k, min_len);
}

// -2 log L(Y | Z) at a given latent matrix z (Eq.-style conditional
// likelihood): N log(2 pi) + n log|Psi| + sum_t ||Y_t - mu_t - z_t B'||^2_{Psi^-1}
inline double conditional_m2ll(const SeriesMatrix& y, const Segmentation& seg,
                               const SegmentMeans& means,
                               const FactorParams& factor, const Matrix& z) {
  detail::check_fit_dims(y, seg, factor);
  Matrix e = y.values - expand_means(seg, means);
  if (factor.q() > 0) e.noalias() -= z * factor.loadings.transpose();
  const Vector psi_inv = factor.psi.cwiseInverse();
  const double quad = (e * psi_inv.asDiagonal()).cwiseProduct(e).sum();
  return y.total() * std::log(2.0 * std::numbers::pi) +
         y.n() * factor.psi.array().log().sum() + quad;
}

// Expected complete-data -2 Q(phi; phi) via sufficient statistics:
// N log(2 pi) + n log|Psi| + Tr(Psi^{-1}[R'R - 2 R'Zhat B' + B(Zhat'Zhat + nW)B'])
inline double expected_complete_m2ll(const SeriesMatrix& y,
                                     const Segmentation& seg,
                                     const SegmentMeans& means,
                                     const FactorParams& factor,
                                     const LatentMoments& mom) {
  detail::check_fit_dims(y, seg, factor);
  const Matrix resid = y.values - expand_means(seg, means);
  const Vector psi_inv = factor.psi.cwiseInverse();
  Matrix s = resid.transpose() * resid;
  if (factor.q() > 0) {
    const Matrix& b = factor.loadings;
    const Matrix cross = resid.transpose() * mom.zhat;
    const Matrix gram = mom.zhat.transpose() * mom.zhat + y.n() * mom.w;
    s.noalias() -= cross * b.transpose();
    s.noalias() -= b * cross.transpose();
    s.noalias() += b * gram * b.transpose();
  }
  return y.total() * std::log(2.0 * std::numbers::pi) +
         y.n() * factor.psi.array().log().sum() +
         (psi_inv.asDiagonal() * s).trace();
}

namespace detail {

// PCA warm start on the empirical covariance of segmentation residuals:
// top-Q eigenpairs give B = U_Q (Lambda_Q - sigma0^2)^{1/2}, sigma0^2 is
// the mean of the discarded eigenvalues.
inline FactorParams pca_init(const Matrix& resid, int q, NoiseMode mode) {
  const int m = static_cast<int>(resid.cols());
  const int n = static_cast<int>(resid.rows());
  Matrix s = Matrix::Zero(m, m);
  s.selfadjointView<Eigen::Lower>().rankUpdate(resid.transpose(), 1.0 / n);
  s = s.selfadjointView<Eigen::Lower>();

  Eigen::SelfAdjointEigenSolver<Matrix> eig(s);
  if (eig.info() != Eigen::Success)
    throw numeric_error("pca_init: eigendecomposition failed");
  const Vector& lambda = eig.eigenvalues();  // ascending

  double sigma0 = 0.0;
  for (int i = 0; i < m - q; ++i) sigma0 += std::max(lambda[i], 0.0);
  sigma0 = std::max(sigma0 / std::max(m - q, 1), kNoiseFloor);

  Matrix b(m, q);
  for (int j = 0; j < q; ++j) {
    const int idx = m - 1 - j;
    b.col(j) =
        eig.eigenvectors().col(idx) * std::sqrt(std::max(lambda[idx] - sigma0, 0.0));
  }
  if (mode == NoiseMode::homoscedastic)
    return FactorParams::homoscedastic(std::move(b), sigma0);
  Vector psi = (s.diagonal() - (b * b.transpose()).diagonal()).cwiseMax(kNoiseFloor);
  return FactorParams::heteroscedastic(std::move(b), std::move(psi));
}

// Q = 0: exact two-stage segmentation plus residual variance, no EM loop.
// The homoscedastic argmin is scale-invariant so a single pass suffices;
// the heteroscedastic weights need one re-segmentation.
inline ModelFit fit_diagonal(const SeriesMatrix& y, int total_k,
                             const EmOptions& opts,
                             const std::optional<Segmentation>& init) {
  ModelFit fit;
  TwoStageResult ts;
  if (init) {
    ts.segmentation = *init;
    ts.means.means.resize(y.m());
    for (int m = 0; m < y.m(); ++m) {
      ts.means.means[m].resize(ts.segmentation.segments_in(m));
      for (int k = 0; k < ts.segmentation.segments_in(m); ++k) {
        auto [first, last] = ts.segmentation.segment_rows(m, k);
        ts.means.means[m][k] =
            y.values.col(m).segment(first, last - first).mean();
      }
    }
  } else {
    ts = two_stage_segment(y.values, Vector::Ones(y.m()), total_k,
                           opts.min_seg_len);
  }

  auto residual_psi = [&](const TwoStageResult& r) -> Vector {
    const Matrix resid = y.values - expand_means(r.segmentation, r.means);
    if (opts.noise_mode == NoiseMode::homoscedastic)
      return Vector::Constant(
          y.m(), std::max(resid.squaredNorm() / y.total(), kNoiseFloor));
    Vector psi = resid.array().square().colwise().sum() / y.n();
    return psi.cwiseMax(kNoiseFloor);
  };

  Vector psi = residual_psi(ts);
  int passes = 1;
  if (opts.noise_mode == NoiseMode::heteroscedastic) {
    ts = two_stage_segment(y.values, psi, total_k, opts.min_seg_len);
    psi = residual_psi(ts);
    passes = 2;
  }
  fit.segmentation = std::move(ts.segmentation);
  fit.means = std::move(ts.means);
  fit.factor = FactorParams::diagonal(std::move(psi), opts.noise_mode);
  fit.loglik = full_loglik(y, fit.segmentation, fit.means, fit.factor);
  fit.iterations = passes;
  fit.converged = true;
  return fit;
}

inline ModelFit em_run(const SeriesMatrix& y, int total_k, int q,
                       const EmOptions& opts,
                       const std::optional<Segmentation>& init) {
  if (q == 0) return fit_diagonal(y, total_k, opts, init);

  TwoStageResult seg;
  if (init) {
    seg.segmentation = *init;
    seg.means.means.resize(y.m());
    for (int m = 0; m < y.m(); ++m) {
      seg.means.means[m].resize(seg.segmentation.segments_in(m));
      for (int k = 0; k < seg.segmentation.segments_in(m); ++k) {
        auto [first, last] = seg.segmentation.segment_rows(m, k);
        seg.means.means[m][k] =
            y.values.col(m).segment(first, last - first).mean();
      }
    }
  } else {
    seg = two_stage_segment(y.values, Vector::Ones(y.m()), total_k,
                            opts.min_seg_len);
  }
  FactorParams factor = pca_init(
      y.values - expand_means(seg.segmentation, seg.means), q, opts.noise_mode);

  ModelFit fit;
  fit.segmentation = seg.segmentation;
  fit.means = seg.means;
  fit.factor = factor;
  double prev_m2ll = std::numeric_limits<double>::infinity();
  int h = 0;
  for (h = 1; h <= opts.max_iter; ++h) {
    const LatentMoments mom = e_step(y, fit.segmentation, fit.means, fit.factor);
    const Matrix b_new = m_step_loadings(y, fit.segmentation, fit.means, mom);
    const Vector psi_new = m_step_noise(y, fit.segmentation, fit.means, mom,
                                        b_new, opts.noise_mode);
    TwoStageResult ts = m_step_segmentation(y, mom, b_new, psi_new, total_k,
                                            opts.min_seg_len);
    fit.segmentation = std::move(ts.segmentation);
    fit.means = std::move(ts.means);
    fit.factor = opts.noise_mode == NoiseMode::homoscedastic
                     ? FactorParams::homoscedastic(b_new, psi_new[0])
                     : FactorParams::heteroscedastic(b_new, psi_new);
    fit.loglik = full_loglik(y, fit.segmentation, fit.means, fit.factor);
    if (!std::isfinite(fit.loglik))
      throw numeric_error("em_fit: non-finite log-likelihood");
    if (opts.loglik_trace) opts.loglik_trace->push_back(fit.loglik);

    const double m2ll = -2.0 * fit.loglik;
    const double rel =
        std::abs(m2ll - prev_m2ll) / std::max(std::abs(prev_m2ll), 1e-10);
    prev_m2ll = m2ll;
    if (rel < opts.rel_tol) break;
  }
  fit.iterations = std::min(h, opts.max_iter);
  fit.converged = h <= opts.max_iter;
  return fit;
}

inline Segmentation random_segmentation(int n, int m_count, int total_k,
                                        std::mt19937_64& rng) {
  // Random composition of total_k into m_count parts >= 1, then uniform
  // distinct breakpoints per series.
  std::vector<int> alloc(m_count, 1);
  for (int extra = total_k - m_count; extra > 0; --extra)
    alloc[std::uniform_int_distribution<int>(0, m_count - 1)(rng)]++;
  for (auto& a : alloc) a = std::min(a, n);

  Segmentation seg;
  seg.n = n;
  seg.breakpoints.resize(m_count);
  std::vector<int> pool(n - 1);
  for (int i = 0; i < n - 1; ++i) pool[i] = i + 1;
  for (int m = 0; m < m_count; ++m) {
    std::shuffle(pool.begin(), pool.end(), rng);
    seg.breakpoints[m].assign(pool.begin(), pool.begin() + (alloc[m] - 1));
    std::sort(seg.breakpoints[m].begin(), seg.breakpoints[m].end());
  }
  return seg;
}

}  // namespace detail

// Fits phi = (T, mu, Psi, B) for fixed (K, Q) by EM with an exact DP
// segmentation update each iteration. Deterministic given y, K, Q and
// options.
inline ModelFit em_fit(const SeriesMatrix& y, int total_k, int q,
                       const EmOptions& opts = {}) {
  if (total_k < y.m() || total_k > y.n() * y.m())
    throw std::invalid_argument("em_fit: K must satisfy M <= K <= n*M");
  if (q < 0 || q > y.m() - 1)
    throw std::invalid_argument("em_fit: Q must satisfy 0 <= Q <= M-1");
  if (opts.max_iter < 1 || opts.rel_tol <= 0.0)
    throw std::invalid_argument("em_fit: invalid EM options");

  ModelFit best = detail::em_run(y, total_k, q, opts, opts.init_segmentation);
  if (opts.random_restarts > 0) {
    std::mt19937_64 rng(opts.seed);
    for (int r = 0; r < opts.random_restarts; ++r) {
      const Segmentation s0 =
          detail::random_segmentation(y.n(), y.m(), total_k, rng);
      ModelFit cand = detail::em_run(y, total_k, q, opts, s0);
      if (cand.loglik > best.loglik) best = std::move(cand);
    }
  }
  return best;
}

}  // namespace jointseg
