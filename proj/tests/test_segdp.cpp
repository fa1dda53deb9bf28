#include "jointseg/segdp.hpp"

#include "test_oracles.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace jointseg;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Vector step_series() {
  Vector y(6);
  y << 0, 0, 0, 5, 5, 5;
  return y;
}

Vector random_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> norm(0.0, 1.0);
  Vector y(n);
  for (int i = 0; i < n; ++i) y[i] = norm(rng);
  return y;
}

}  // namespace

TEST_CASE("segment_cost basics") {
  Vector constant(3);
  constant << 3, 3, 3;
  REQUIRE(segment_cost(constant, 1.0) == 0.0);
  REQUIRE_THAT(segment_cost(step_series(), 1.0), WithinAbs(37.5, 1e-12));
  REQUIRE_THAT(segment_cost(step_series(), 2.0), WithinAbs(75.0, 1e-12));
  REQUIRE_THROWS_AS(segment_cost(Vector(0), 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(segment_cost(constant, 0.0), std::invalid_argument);
}

TEST_CASE("dp_single perfect split and k=1") {
  const SingleSeriesDP dp(step_series(), 1.0, 2);
  REQUIRE_THAT(dp.cost_for(1), WithinAbs(37.5, 1e-12));
  REQUIRE(dp.breakpoints_for(1).empty());
  REQUIRE_THAT(dp.cost_for(2), WithinAbs(0.0, 1e-12));
  REQUIRE(dp.breakpoints_for(2) == std::vector<int>{3});
}

TEST_CASE("dp_single rejects more segments than points") {
  Vector y(3);
  y << 1, 2, 3;
  REQUIRE_THROWS_AS(SingleSeriesDP(y, 1.0, 4), std::invalid_argument);
}

TEST_CASE("dp_single ties resolve to the leftmost breakpoints") {
  Vector y = Vector::Constant(5, 1.0);
  const SingleSeriesDP dp(y, 1.0, 3);
  REQUIRE(dp.cost_for(3) == 0.0);
  REQUIRE(dp.breakpoints_for(3) == std::vector<int>{1, 2});
}

TEST_CASE("dp_single equals exhaustive enumeration on random data") {
  std::mt19937_64 rng(101);
  for (int trial = 0; trial < 25; ++trial) {
    const Vector y = random_vector(10, rng);
    const SingleSeriesDP dp(y, 1.0, 3);
    for (int k = 1; k <= 3; ++k) {
      const auto expect = oracle::brute_single(y, 1.0, k);
      if (expect.cost == 0.0)
        REQUIRE_THAT(dp.cost_for(k), WithinAbs(0.0, 1e-12));
      else
        REQUIRE_THAT(dp.cost_for(k), WithinRel(expect.cost, 1e-9));
      REQUIRE(dp.breakpoints_for(k) == expect.breakpoints);
    }
  }
}

TEST_CASE("dp_single respects a minimum segment length") {
  std::mt19937_64 rng(17);
  const Vector y = random_vector(9, rng);
  const SingleSeriesDP dp(y, 1.0, 3, 2);
  for (int k = 1; k <= 3; ++k) {
    const auto bps = dp.breakpoints_for(k);
    int prev = 0;
    for (int bp : bps) {
      REQUIRE(bp - prev >= 2);
      prev = bp;
    }
    REQUIRE(9 - prev >= 2);
  }
}

TEST_CASE("allocate_segments forced and two-option cases") {
  REQUIRE(allocate_segments({{10.0, 1.0}, {20.0, 2.0}}, 2) ==
          std::vector<int>{1, 1});
  // C_1 = (10, 0), C_2 = (8, 7): K=3 -> (2,1) with total 8 beats (1,2)=17
  REQUIRE(allocate_segments({{10.0, 0.0}, {8.0, 7.0}}, 3) ==
          std::vector<int>{2, 1});
  REQUIRE_THROWS_AS(allocate_segments({{1.0}, {2.0}}, 3),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(allocate_segments({{1.0}, {2.0}}, 1),
                    std::invalid_argument);
}

TEST_CASE("allocate_segments equals composition enumeration") {
  std::mt19937_64 rng(211);
  std::uniform_real_distribution<double> unif(0.0, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> costs(3, std::vector<double>(4));
    for (auto& row : costs) {
      // non-increasing in k, as stage-1 tables always are
      double c = unif(rng) + 10.0;
      for (auto& v : row) {
        v = c;
        c -= unif(rng) * 0.2;
      }
    }
    const auto got = allocate_segments(costs, 7);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_alloc;
    for (const auto& alloc : oracle::all_compositions(7, {4, 4, 4})) {
      double c = 0.0;
      for (int m = 0; m < 3; ++m) c += costs[m][alloc[m] - 1];
      if (c < best) {
        best = c;
        best_alloc = alloc;
      }
    }
    REQUIRE(got == best_alloc);
    double got_cost = 0.0;
    for (int m = 0; m < 3; ++m) got_cost += costs[m][got[m] - 1];
    REQUIRE_THAT(got_cost, WithinRel(best, 1e-12));
  }
}

TEST_CASE("two_stage_segment recovers noiseless steps exactly") {
  Matrix y(6, 2);
  y.col(0) = step_series();
  Vector second(6);
  second << 1, 1, 1, 1, -3, -3;
  y.col(1) = second;
  const auto res = two_stage_segment(y, Vector::Ones(2), 4);
  REQUIRE(res.segmentation.breakpoints[0] == std::vector<int>{3});
  REQUIRE(res.segmentation.breakpoints[1] == std::vector<int>{4});
  REQUIRE_THAT(res.cost, WithinAbs(0.0, 1e-12));
  REQUIRE_THAT(res.means.means[0][0], WithinAbs(0.0, 1e-12));
  REQUIRE_THAT(res.means.means[0][1], WithinAbs(5.0, 1e-12));
  REQUIRE_THAT(res.means.means[1][1], WithinAbs(-3.0, 1e-12));
}

TEST_CASE("two_stage_segment with K=M gives column means") {
  std::mt19937_64 rng(31);
  Matrix y(8, 2);
  y.col(0) = random_vector(8, rng);
  y.col(1) = random_vector(8, rng);
  Vector psi(2);
  psi << 0.5, 2.0;
  const auto res = two_stage_segment(y, psi, 2);
  REQUIRE(res.segmentation.breakpoints[0].empty());
  REQUIRE(res.segmentation.breakpoints[1].empty());
  double expect = 0.0;
  for (int m = 0; m < 2; ++m) {
    REQUIRE_THAT(res.means.means[m][0], WithinRel(y.col(m).mean(), 1e-12));
    expect += oracle::direct_segment_cost(y.col(m), 0, 8, 1.0 / psi[m]);
  }
  REQUIRE_THAT(res.cost, WithinRel(expect, 1e-10));
}

TEST_CASE("two_stage_segment equals the exhaustive joint oracle") {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix y(6, 2);
    y.col(0) = random_vector(6, rng);
    y.col(1) = random_vector(6, rng);
    Vector psi(2);
    psi << 0.7, 1.3;
    const auto got = two_stage_segment(y, psi, 4);
    const auto expect = oracle::brute_joint(y, psi, 4);
    REQUIRE_THAT(got.cost, WithinRel(expect.cost, 1e-9));
    REQUIRE(got.segmentation.breakpoints == expect.breakpoints);
  }
}

TEST_CASE("two_stage_segment cost is non-increasing in K") {
  std::mt19937_64 rng(53);
  Matrix y(10, 3);
  for (int m = 0; m < 3; ++m) y.col(m) = random_vector(10, rng);
  const Vector psi = Vector::Ones(3);
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 3; k <= 12; ++k) {
    const double c = two_stage_segment(y, psi, k).cost;
    REQUIRE(c <= prev + 1e-12);
    prev = c;
  }
}

TEST_CASE("scaling all weights leaves the argmin unchanged") {
  std::mt19937_64 rng(59);
  Matrix y(9, 2);
  y.col(0) = random_vector(9, rng);
  y.col(1) = random_vector(9, rng);
  Vector psi(2);
  psi << 0.4, 1.7;
  const auto base = two_stage_segment(y, psi, 5);
  const double c = 3.7;
  const auto scaled = two_stage_segment(y, Vector(c * psi), 5);
  REQUIRE(base.segmentation.breakpoints == scaled.segmentation.breakpoints);
  REQUIRE_THAT(scaled.cost, WithinRel(base.cost / c, 1e-10));
}

TEST_CASE("stage-1 tables reach k_max = K - M + 1 when one series takes all") {
  // one flat series and one with many steps: the stepped series should be
  // able to absorb K - M + 1 segments
  Matrix y(8, 2);
  y.col(0).setZero();
  Vector busy(8);
  busy << 0, 4, -4, 4, -4, 4, -4, 4;
  y.col(1) = busy;
  const int total_k = 8;  // k_max must reach 7 for series 2
  const auto res = two_stage_segment(y, Vector::Ones(2), total_k);
  REQUIRE(res.segmentation.segments_in(0) == 1);
  REQUIRE(res.segmentation.segments_in(1) == 7);
}
