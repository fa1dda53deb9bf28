// Core domain types for joint segmentation of correlated series:
// observation matrix, per-series segmentations, segment means, and the
// low-rank-plus-diagonal covariance parametrization Sigma = B B' + Psi.
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace jointseg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Malformed or unreadable input data (CSV/JSON). CLI exit code 2.
class data_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure during fitting (non-finite likelihood, failed
// factorization). CLI exit code 3.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// n x M observation matrix, rows = time, columns = series.
struct SeriesMatrix {
  Matrix values;

  SeriesMatrix() = default;
  explicit SeriesMatrix(Matrix v) : values(std::move(v)) {
    if (values.rows() < 2 || values.cols() < 1)
      throw std::invalid_argument("SeriesMatrix requires n >= 2 and M >= 1");
    if (!values.allFinite())
      throw std::invalid_argument("SeriesMatrix entries must be finite");
  }

  int n() const { return static_cast<int>(values.rows()); }
  int m() const { return static_cast<int>(values.cols()); }
  long total() const { return static_cast<long>(values.size()); }
};

// Per-series breakpoints. Positions are 1-based segment end indices:
// breakpoint t means segment k of series m covers times t_{k-1}+1 .. t_k,
// with implicit t_0 = 0 and t_{K_m} = n. Only interior ends (1 .. n-1)
// are stored.
struct Segmentation {
  int n = 0;
  std::vector<std::vector<int>> breakpoints;

  Segmentation() = default;
  Segmentation(int n_points, std::vector<std::vector<int>> bps)
      : n(n_points), breakpoints(std::move(bps)) {
    validate();
  }

  int num_series() const { return static_cast<int>(breakpoints.size()); }
  int segments_in(int m) const {
    return static_cast<int>(breakpoints[m].size()) + 1;
  }
  int total_segments() const {
    int k = 0;
    for (const auto& bp : breakpoints) k += static_cast<int>(bp.size()) + 1;
    return k;
  }

  // Row range [first, last) in 0-based indexing covered by segment k of
  // series m.
  std::pair<int, int> segment_rows(int m, int k) const {
    const auto& bp = breakpoints[m];
    int first = (k == 0) ? 0 : bp[k - 1];
    int last = (k + 1 == segments_in(m)) ? n : bp[k];
    return {first, last};
  }

  void validate() const {
    if (n < 1) throw std::invalid_argument("Segmentation: n must be positive");
    if (breakpoints.empty())
      throw std::invalid_argument("Segmentation: needs at least one series");
    for (const auto& bp : breakpoints) {
      int prev = 0;
      for (int t : bp) {
        if (t <= prev || t >= n)
          throw std::invalid_argument(
              "Segmentation: breakpoints must be strictly increasing in "
              "[1, n-1], got " +
              std::to_string(t));
        prev = t;
      }
    }
  }

  bool operator==(const Segmentation& o) const {
    return n == o.n && breakpoints == o.breakpoints;
  }
};

// Segment means conforming to a Segmentation: means[m][k] pairs with
// segment k of series m.
struct SegmentMeans {
  std::vector<std::vector<double>> means;

  void check_conforms(const Segmentation& seg) const {
    if (static_cast<int>(means.size()) != seg.num_series())
      throw std::invalid_argument("SegmentMeans: series count mismatch");
    for (int m = 0; m < seg.num_series(); ++m)
      if (static_cast<int>(means[m].size()) != seg.segments_in(m))
        throw std::invalid_argument(
            "SegmentMeans: segment count mismatch in series " +
            std::to_string(m));
  }
};

enum class NoiseMode { homoscedastic, heteroscedastic };

inline const char* to_string(NoiseMode m) {
  return m == NoiseMode::homoscedastic ? "homoscedastic" : "heteroscedastic";
}

// Loading matrix B (M x Q, Q = 0 allowed) and diagonal noise Psi > 0.
// The implied covariance is Sigma = B B' + Psi.
struct FactorParams {
  Matrix loadings;  // M x Q
  Vector psi;       // M diagonal noise variances, all > 0
  NoiseMode mode = NoiseMode::homoscedastic;

  static FactorParams homoscedastic(Matrix b, double sigma2) {
    FactorParams f;
    f.psi = Vector::Constant(b.rows(), sigma2);
    f.loadings = std::move(b);
    f.mode = NoiseMode::homoscedastic;
    f.validate();
    return f;
  }

  static FactorParams heteroscedastic(Matrix b, Vector psi_diag) {
    FactorParams f;
    f.loadings = std::move(b);
    f.psi = std::move(psi_diag);
    f.mode = NoiseMode::heteroscedastic;
    f.validate();
    return f;
  }

  // Q = 0 model: independent series with diagonal covariance.
  static FactorParams diagonal(Vector psi_diag, NoiseMode mode) {
    FactorParams f;
    f.loadings = Matrix::Zero(psi_diag.size(), 0);
    f.psi = std::move(psi_diag);
    f.mode = mode;
    f.validate();
    return f;
  }

  int m() const { return static_cast<int>(psi.size()); }
  int q() const { return static_cast<int>(loadings.cols()); }

  double sigma2() const {
    if (mode != NoiseMode::homoscedastic)
      throw std::logic_error("sigma2() on heteroscedastic FactorParams");
    return psi[0];
  }

  void validate() const {
    if (psi.size() < 1 || loadings.rows() != psi.size())
      throw std::invalid_argument("FactorParams: B rows must match Psi size");
    if (q() > m() - 1 && q() != 0)
      throw std::invalid_argument("FactorParams: requires Q <= M-1");
    if ((psi.array() <= 0.0).any())
      throw std::invalid_argument("FactorParams: noise variances must be > 0");
    if (!loadings.allFinite() || !psi.allFinite())
      throw std::invalid_argument("FactorParams: entries must be finite");
  }
};

// Conditional moments of the latent factors given the data: zhat is n x Q
// with rows E[Z_t | Y], w is the time-invariant conditional variance
// W = (I_Q + B' Psi^{-1} B)^{-1}.
struct LatentMoments {
  Matrix zhat;
  Matrix w;
};

// Full fitted parameter bundle phi = (T, mu, Psi, B) with diagnostics.
struct ModelFit {
  Segmentation segmentation;
  SegmentMeans means;
  FactorParams factor;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Ground truth emitted by the simulator for scoring.
struct SimTruth {
  Segmentation segmentation;
  SegmentMeans means;
  Matrix sigma;        // M x M
  Matrix mean_matrix;  // n x M, piecewise constant
};

// Sigma = B B' + Psi, exactly symmetric.
inline Matrix assemble_sigma(const FactorParams& f) {
  const int m = f.m();
  Matrix s = Matrix::Zero(m, m);
  if (f.q() > 0) s.selfadjointView<Eigen::Lower>().rankUpdate(f.loadings);
  s = s.selfadjointView<Eigen::Lower>();
  s.diagonal() += f.psi;
  return s;
}

// Expands (segmentation, means) into the n x M piecewise-constant mean
// matrix T mu.
inline Matrix expand_means(const Segmentation& seg, const SegmentMeans& means) {
  means.check_conforms(seg);
  Matrix out(seg.n, seg.num_series());
  for (int m = 0; m < seg.num_series(); ++m) {
    for (int k = 0; k < seg.segments_in(m); ++k) {
      auto [first, last] = seg.segment_rows(m, k);
      out.col(m).segment(first, last - first).setConstant(means.means[m][k]);
    }
  }
  return out;
}

}  // namespace jointseg
