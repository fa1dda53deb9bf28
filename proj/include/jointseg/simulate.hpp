// Simulation designs: Poisson breakpoint counts at uniform positions,
// means alternating between 0 and a draw from {-2,-1,+1,+2}, spatial
// covariance sigma^2((1-alpha) rho^d + alpha I) over random station
// locations, and Gaussian / multivariate-t / Wishart-mixture noise.
#pragma once

#include "jointseg/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

namespace jointseg {

enum class NoiseKind { gaussian, student, wishart_hetero };

inline const char* to_string(NoiseKind k) {
  switch (k) {
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::student: return "student";
    case NoiseKind::wishart_hetero: return "wishart";
  }
  return "?";
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent stream per (seed, stream) pair; used to give each replicate
// its own generator.
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(splitmix64(seed ^ splitmix64(stream)));
}

struct SimConfig {
  int m = 10;
  int n = 100;
  double kbar = 5.0;   // mean breakpoint count per series
  double sigma = 0.2;  // residual standard deviation
  double rho = 0.8;    // spatial decay
  double alpha = 0.2;  // nugget fraction
  NoiseKind noise_kind = NoiseKind::gaussian;
  double df = 0.0;  // degrees of freedom for student / wishart noise
  std::uint64_t seed = 0;

  void validate() const {
    if (m < 1 || n < 2) throw std::invalid_argument("SimConfig: need M >= 1, n >= 2");
    if (!(kbar > 0.0)) throw std::invalid_argument("SimConfig: kbar must be > 0");
    if (!(sigma > 0.0)) throw std::invalid_argument("SimConfig: sigma must be > 0");
    if (!(rho > 0.0 && rho < 1.0))
      throw std::invalid_argument("SimConfig: rho must be in (0, 1)");
    if (!(alpha >= 0.0 && alpha <= 1.0))
      throw std::invalid_argument("SimConfig: alpha must be in [0, 1]");
    if (noise_kind == NoiseKind::student && !(df > 2.0))
      throw std::invalid_argument("SimConfig: student noise needs df > 2");
    if (noise_kind == NoiseKind::wishart_hetero && !(df > m - 1))
      throw std::invalid_argument("SimConfig: wishart noise needs df > M-1");
  }
};

// K_m - 1 ~ Poisson(kbar) truncated to n-1, positions uniform without
// replacement in {1, ..., n-1}; every segment has length >= 1.
inline std::vector<int> gen_segmentation(int n, double kbar,
                                         std::mt19937_64& rng) {
  if (!(kbar > 0.0)) throw std::invalid_argument("gen_segmentation: kbar must be > 0");
  int count = std::poisson_distribution<int>(kbar)(rng);
  count = std::min(count, n - 1);
  std::vector<int> pool(n - 1);
  for (int i = 0; i < n - 1; ++i) pool[i] = i + 1;
  // partial Fisher-Yates
  for (int i = 0; i < count; ++i) {
    const int j = std::uniform_int_distribution<int>(i, n - 2)(rng);
    std::swap(pool[i], pool[j]);
  }
  std::vector<int> bps(pool.begin(), pool.begin() + count);
  std::sort(bps.begin(), bps.end());
  return bps;
}

// Segment means alternate between 0 (1st, 3rd, ... segment) and a value
// drawn uniformly from {-2, -1, +1, +2}, redrawn per segment.
inline SegmentMeans gen_means(const Segmentation& seg, std::mt19937_64& rng) {
  static constexpr double kLevels[4] = {-2.0, -1.0, 1.0, 2.0};
  SegmentMeans out;
  out.means.resize(seg.num_series());
  for (int m = 0; m < seg.num_series(); ++m) {
    out.means[m].resize(seg.segments_in(m));
    for (int k = 0; k < seg.segments_in(m); ++k) {
      out.means[m][k] =
          (k % 2 == 0)
              ? 0.0
              : kLevels[std::uniform_int_distribution<int>(0, 3)(rng)];
    }
  }
  return out;
}

struct SigmaDraw {
  Matrix sigma;      // M x M
  Matrix distances;  // M x M pairwise distances of the drawn points
  int resamples = 0;
};

// Spatial covariance over M station points drawn i.i.d. from N(0, I_2):
// Sigma_mm' = sigma^2 ((1-alpha) rho^{d_mm'} + alpha 1{m = m'}), so the
// diagonal is exactly sigma^2. The exponential-decay kernel plus nugget is
// positive definite; the Cholesky check only guards numerics.
inline SigmaDraw gen_sigma(int m, double sigma, double rho, double alpha,
                           std::mt19937_64& rng) {
  std::normal_distribution<double> stdnorm(0.0, 1.0);
  SigmaDraw draw;
  for (int attempt = 0;; ++attempt) {
    Matrix pts(m, 2);
    for (int i = 0; i < m; ++i) {
      pts(i, 0) = stdnorm(rng);
      pts(i, 1) = stdnorm(rng);
    }
    draw.distances.resize(m, m);
    draw.sigma.resize(m, m);
    for (int i = 0; i < m; ++i) {
      draw.distances(i, i) = 0.0;
      draw.sigma(i, i) = sigma * sigma;
      for (int j = i + 1; j < m; ++j) {
        const double d = (pts.row(i) - pts.row(j)).norm();
        draw.distances(i, j) = draw.distances(j, i) = d;
        const double cov = sigma * sigma * (1.0 - alpha) * std::pow(rho, d);
        draw.sigma(i, j) = draw.sigma(j, i) = cov;
      }
    }
    if (Eigen::LLT<Matrix>(draw.sigma).info() == Eigen::Success) break;
    if (attempt >= 100)
      throw numeric_error("gen_sigma: could not draw a positive definite matrix");
    ++draw.resamples;
  }
  return draw;
}

// n i.i.d. noise rows driven by sigma_mat.
//  - gaussian: N(0, Sigma) by Cholesky.
//  - student(df): multivariate t with scale matrix Sigma (the rmvt-style
//    parametrization), so the realized covariance is Sigma * df/(df-2);
//    small df means both heavier tails and larger spread.
//  - wishart(df): per row, S_t ~ W(Sigma/df, df) via Bartlett so
//    E[S_t] = Sigma, then row ~ N(0, S_t).
inline Matrix gen_noise(int n, const Matrix& sigma_mat, NoiseKind kind,
                        double df, std::mt19937_64& rng) {
  const int m = static_cast<int>(sigma_mat.rows());
  Eigen::LLT<Matrix> llt(sigma_mat);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("gen_noise: covariance must be positive definite");
  std::normal_distribution<double> stdnorm(0.0, 1.0);
  Matrix out(n, m);
  Vector z(m);

  switch (kind) {
    case NoiseKind::gaussian: {
      const Matrix l = llt.matrixL();
      for (int t = 0; t < n; ++t) {
        for (int i = 0; i < m; ++i) z[i] = stdnorm(rng);
        out.row(t) = (l * z).transpose();
      }
      break;
    }
    case NoiseKind::student: {
      if (!(df > 2.0))
        throw std::invalid_argument("gen_noise: student needs df > 2");
      const Matrix l_scale = llt.matrixL();
      std::chi_squared_distribution<double> chi(df);
      for (int t = 0; t < n; ++t) {
        for (int i = 0; i < m; ++i) z[i] = stdnorm(rng);
        const double g = chi(rng) / df;
        out.row(t) = (l_scale * z).transpose() / std::sqrt(g);
      }
      break;
    }
    case NoiseKind::wishart_hetero: {
      if (!(df > m - 1))
        throw std::invalid_argument("gen_noise: wishart needs df > M-1");
      const Matrix l_mean = Matrix(llt.matrixL()) / std::sqrt(df);
      Matrix bartlett(m, m);
      for (int t = 0; t < n; ++t) {
        bartlett.setZero();
        for (int i = 0; i < m; ++i) {
          bartlett(i, i) =
              std::sqrt(std::chi_squared_distribution<double>(df - i)(rng));
          for (int j = 0; j < i; ++j) bartlett(i, j) = stdnorm(rng);
        }
        for (int i = 0; i < m; ++i) z[i] = stdnorm(rng);
        // chol(S_t) = l_mean * bartlett
        out.row(t) = (l_mean * (bartlett * z)).transpose();
      }
      break;
    }
  }
  return out;
}

// Full design: Y = T mu + F. Pure function of the configuration,
// including the seed. Draw order: covariance, then per-series
// segmentations, then means, then noise rows.
inline std::pair<SeriesMatrix, SimTruth> simulate(const SimConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng = make_rng(cfg.seed);

  SimTruth truth;
  truth.sigma = gen_sigma(cfg.m, cfg.sigma, cfg.rho, cfg.alpha, rng).sigma;
  truth.segmentation.n = cfg.n;
  truth.segmentation.breakpoints.resize(cfg.m);
  for (int m = 0; m < cfg.m; ++m)
    truth.segmentation.breakpoints[m] = gen_segmentation(cfg.n, cfg.kbar, rng);
  truth.means = gen_means(truth.segmentation, rng);
  truth.mean_matrix = expand_means(truth.segmentation, truth.means);

  const Matrix noise =
      gen_noise(cfg.n, truth.sigma, cfg.noise_kind, cfg.df, rng);
  return {SeriesMatrix(truth.mean_matrix + noise), std::move(truth)};
}

}  // namespace jointseg
