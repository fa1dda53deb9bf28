#include "jointseg/simulate.hpp"

#include "jointseg/segdp.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace jointseg;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("gen_segmentation draws valid, sorted interior positions") {
  auto rng = make_rng(1);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto bps = gen_segmentation(20, 4.0, rng);
    int prev = 0;
    for (int bp : bps) {
      REQUIRE(bp > prev);
      REQUIRE(bp <= 19);
      prev = bp;
    }
  }
}

TEST_CASE("gen_segmentation with a vanishing rate gives one segment") {
  auto rng = make_rng(2);
  const auto bps = gen_segmentation(50, 1e-12, rng);
  REQUIRE(bps.empty());
}

TEST_CASE("gen_segmentation mean breakpoint count is Poisson(kbar)") {
  auto rng = make_rng(3);
  const int draws = 10000;
  double total = 0.0;
  for (int i = 0; i < draws; ++i)
    total += static_cast<double>(gen_segmentation(100, 5.0, rng).size());
  REQUIRE_THAT(total / draws, WithinAbs(5.0, 0.15));
}

TEST_CASE("gen_means alternates zero and drawn levels") {
  auto rng = make_rng(4);
  Segmentation one(10, {{}});
  REQUIRE(gen_means(one, rng).means[0] == std::vector<double>{0.0});

  Segmentation two(10, {{5}});
  const auto mm = gen_means(two, rng);
  REQUIRE(mm.means[0][0] == 0.0);
  const double v = mm.means[0][1];
  REQUIRE((v == -2.0 || v == -1.0 || v == 1.0 || v == 2.0));

  Segmentation many(10, {{2, 4, 6, 8}});
  const auto mm2 = gen_means(many, rng);
  REQUIRE(mm2.means[0][0] == 0.0);
  REQUIRE(mm2.means[0][2] == 0.0);
  REQUIRE(mm2.means[0][4] == 0.0);
}

TEST_CASE("gen_means level frequencies are uniform") {
  auto rng = make_rng(5);
  Segmentation two(10, {{5}});
  int counts[4] = {0, 0, 0, 0};
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const double v = gen_means(two, rng).means[0][1];
    if (v == -2.0) ++counts[0];
    if (v == -1.0) ++counts[1];
    if (v == 1.0) ++counts[2];
    if (v == 2.0) ++counts[3];
  }
  for (int c : counts)
    REQUIRE_THAT(static_cast<double>(c) / draws, WithinAbs(0.25, 0.02));
}

TEST_CASE("gen_sigma diagonal is sigma^2 exactly and off-diagonals follow "
          "the kernel") {
  auto rng = make_rng(6);
  const double sigma = 0.7, rho = 0.6, alpha = 0.2;
  const auto draw = gen_sigma(5, sigma, rho, alpha, rng);
  for (int i = 0; i < 5; ++i) REQUIRE(draw.sigma(i, i) == sigma * sigma);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      if (i == j) continue;
      const double expect =
          sigma * sigma * (1.0 - alpha) * std::pow(rho, draw.distances(i, j));
      REQUIRE_THAT(draw.sigma(i, j), WithinRel(expect, 1e-12));
      REQUIRE(draw.sigma(i, j) == draw.sigma(j, i));
    }
  REQUIRE(draw.resamples == 0);
}

TEST_CASE("gen_sigma decorrelates as rho approaches zero") {
  auto rng = make_rng(7);
  const auto draw = gen_sigma(4, 1.0, 1e-200, 0.2, rng);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (i != j) REQUIRE(std::abs(draw.sigma(i, j)) < 1e-12);
  REQUIRE((draw.sigma - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gaussian noise empirical covariance matches Sigma") {
  auto rng = make_rng(8);
  const auto draw = gen_sigma(4, 1.0, 0.8, 0.2, rng);
  const int n = 100000;
  const Matrix f = gen_noise(n, draw.sigma, NoiseKind::gaussian, 0.0, rng);
  const Matrix emp = f.transpose() * f / n;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      const double se = std::sqrt((draw.sigma(i, i) * draw.sigma(j, j) +
                                   draw.sigma(i, j) * draw.sigma(i, j)) /
                                  n);
      REQUIRE_THAT(emp(i, j), WithinAbs(draw.sigma(i, j), 3.0 * se));
    }
}

TEST_CASE("student noise has the target covariance and kurtosis") {
  auto rng = make_rng(9);
  const double nu = 50.0;
  Matrix sigma = Matrix::Identity(2, 2);
  sigma(0, 1) = sigma(1, 0) = 0.3;

  const int batches = 20, per_batch = 10000;
  std::vector<double> kurt(batches);
  double cov01 = 0.0;
  for (int b = 0; b < batches; ++b) {
    const Matrix f =
        gen_noise(per_batch, sigma, NoiseKind::student, nu, rng);
    const double m2 = f.col(0).squaredNorm() / per_batch;
    const double m4 = f.col(0).array().pow(4).sum() / per_batch;
    kurt[b] = m4 / (m2 * m2);
    cov01 += (f.col(0).dot(f.col(1))) / per_batch;
  }
  double mean_k = 0.0;
  for (double k : kurt) mean_k += k;
  mean_k /= batches;
  double var_k = 0.0;
  for (double k : kurt) var_k += (k - mean_k) * (k - mean_k);
  const double se_k = std::sqrt(var_k / (batches - 1) / batches);

  const double target = 3.0 * (nu - 2.0) / (nu - 4.0);
  REQUIRE_THAT(mean_k, WithinAbs(target, 3.0 * se_k + 1e-9));
  // Sigma is the scale matrix, so the covariance carries nu/(nu-2)
  REQUIRE_THAT(cov01 / batches, WithinAbs(0.3 * nu / (nu - 2.0), 0.02));
  REQUIRE_THROWS_AS(gen_noise(10, sigma, NoiseKind::student, 2.0, rng),
                    std::invalid_argument);
}

TEST_CASE("wishart noise with large df looks Gaussian") {
  auto rng = make_rng(10);
  const auto draw = gen_sigma(3, 0.5, 0.8, 0.2, rng);
  const int n = 100000;
  const Matrix f =
      gen_noise(n, draw.sigma, NoiseKind::wishart_hetero, 1000.0, rng);
  const Matrix emp = f.transpose() * f / n;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double se = std::sqrt((draw.sigma(i, i) * draw.sigma(j, j) +
                                   draw.sigma(i, j) * draw.sigma(i, j)) /
                                  n);
      REQUIRE_THAT(emp(i, j), WithinAbs(draw.sigma(i, j), 4.0 * se));
    }
}

TEST_CASE("simulate is a pure function of the config") {
  SimConfig cfg;
  cfg.m = 4;
  cfg.n = 30;
  cfg.kbar = 3.0;
  cfg.sigma = 0.5;
  cfg.rho = 0.8;
  cfg.seed = 99;
  auto [y1, t1] = simulate(cfg);
  auto [y2, t2] = simulate(cfg);
  REQUIRE(y1.values == y2.values);
  REQUIRE(t1.segmentation == t2.segmentation);
  REQUIRE(t1.sigma == t2.sigma);

  cfg.seed = 100;
  auto [y3, t3] = simulate(cfg);
  REQUIRE(y1.values != y3.values);
}

TEST_CASE("a noise floor turns simulate into visible steps") {
  SimConfig cfg;
  cfg.m = 3;
  cfg.n = 40;
  cfg.kbar = 2.0;
  cfg.sigma = 1e-6;
  cfg.rho = 0.5;
  cfg.seed = 7;
  auto [y, truth] = simulate(cfg);
  REQUIRE((y.values - truth.mean_matrix).cwiseAbs().maxCoeff() < 1e-4);

  // any segmenter given the true K recovers the truth
  const auto res = two_stage_segment(y.values, Vector::Ones(3),
                                     truth.segmentation.total_segments());
  REQUIRE(res.segmentation.breakpoints == truth.segmentation.breakpoints);
}

TEST_CASE("mean per-series breakpoint count tracks kbar over replicates") {
  SimConfig cfg;
  cfg.m = 10;
  cfg.n = 100;
  cfg.kbar = 5.0;
  cfg.sigma = 0.2;
  cfg.rho = 0.8;
  double bps = 0.0;
  const int reps = 100;
  for (int r = 0; r < reps; ++r) {
    cfg.seed = 1000 + r;
    auto [y, truth] = simulate(cfg);
    bps += truth.segmentation.total_segments() - cfg.m;
  }
  const double per_series = bps / (reps * cfg.m);
  // SE = sqrt(5 / 1000) ~ 0.07
  REQUIRE_THAT(per_series, WithinAbs(5.0, 0.25));
}

TEST_CASE("config validation") {
  SimConfig cfg;
  cfg.rho = 1.5;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.rho = 0.5;
  cfg.noise_kind = NoiseKind::student;
  cfg.df = 2.0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.df = 3.0;
  REQUIRE_NOTHROW(cfg.validate());
  cfg.noise_kind = NoiseKind::wishart_hetero;
  cfg.df = 5.0;
  REQUIRE_THROWS_AS(cfg.validate(), std::invalid_argument);  // df <= M-1
}
