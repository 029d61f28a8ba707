#include <cmath>
#include <random>

#include "doctest.h"

#include "core/simplex_lp.hpp"
#include "oracles.hpp"

using treatsel::DeterministicProblem;
using treatsel::LpStatus;
using treatsel::saa_solve;

namespace {

DeterministicProblem make(int n, int J, std::vector<std::vector<double>> mu,
                          std::vector<double> c) {
  DeterministicProblem p;
  p.n = n;
  p.J = J;
  p.K = static_cast<int>(c.size());
  p.mu = std::move(mu);
  p.c = std::move(c);
  return p;
}

}  // namespace

TEST_CASE("single cohort argmax with no constraints") {
  auto p = make(1, 2, {{1.0, 2.0}}, {});
  auto sol = saa_solve(p);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(2.0));
  CHECK(sol.x[0] == doctest::Approx(0.0));
  CHECK(sol.x[1] == doctest::Approx(1.0));
}

TEST_CASE("binding constraint forces an even split") {
  // Face enumeration by hand: vertices (1,0) obj 1 feasible, (0,1) obj 2
  // infeasible, constraint face 10*x1 = 5 -> x = (0.5, 0.5) obj 1.5.
  auto p = make(1, 2, {{1.0, 2.0}, {0.0, 10.0}}, {5.0});
  auto sol = saa_solve(p);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(1.5));
  CHECK(sol.x[0] == doctest::Approx(0.5));
  CHECK(sol.x[1] == doctest::Approx(0.5));
  CHECK(sol.gap <= 1e-6 * (1.0 + std::fabs(sol.objective)));
}

TEST_CASE("constraint unreachable on the simplex reports infeasible") {
  auto p = make(1, 2, {{1.0, 2.0}, {10.0, 10.0}}, {5.0});
  auto sol = saa_solve(p);
  CHECK(sol.status == LpStatus::Infeasible);
}

TEST_CASE("unconstrained problems decompose into per-cohort argmax") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> vd(-3.0, 3.0);
  for (int rep = 0; rep < 40; ++rep) {
    int n = 1 + static_cast<int>(rng() % 6);
    int J = 2 + static_cast<int>(rng() % 4);
    DeterministicProblem p = make(n, J, {std::vector<double>(static_cast<std::size_t>(n) * J)}, {});
    double want = 0.0;
    for (int i = 0; i < n; ++i) {
      double mx = -1e300;
      for (int j = 0; j < J; ++j) {
        double v = vd(rng);
        p.mu[0][static_cast<std::size_t>(i) * J + j] = v;
        mx = std::max(mx, v);
      }
      want += mx;
    }
    auto sol = saa_solve(p);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("positive scaling of the objective keeps the argmax face") {
  std::mt19937_64 rng(43);
  for (int rep = 0; rep < 20; ++rep) {
    auto p = oracles::random_lp(rng, 3, 3, 2, true);
    auto base = saa_solve(p);
    REQUIRE(base.status == LpStatus::Optimal);
    DeterministicProblem scaled = p;
    for (double& v : scaled.mu[0]) v *= 3.5;
    auto s2 = saa_solve(scaled);
    REQUIRE(s2.status == LpStatus::Optimal);
    CHECK(s2.objective == doctest::Approx(3.5 * base.objective).epsilon(1e-7));

    DeterministicProblem shifted = p;
    double shift_total = 0.0;
    for (int i = 0; i < p.n; ++i) {
      double s = 0.25 * (i + 1);
      shift_total += s;
      for (int j = 0; j < p.J; ++j) shifted.mu[0][static_cast<std::size_t>(i) * p.J + j] += s;
    }
    auto s3 = saa_solve(shifted);
    REQUIRE(s3.status == LpStatus::Optimal);
    CHECK(s3.objective == doctest::Approx(base.objective + shift_total).epsilon(1e-7));
  }
}

TEST_CASE("matches exhaustive basic-solution enumeration on tiny instances") {
  std::mt19937_64 rng(7);
  int solved = 0;
  for (int rep = 0; rep < 300; ++rep) {
    auto p = oracles::random_lp(rng, 3, 3, 2);
    auto oracle = oracles::enumerate_lp(p);
    auto sol = saa_solve(p);
    if (!oracle.feasible) {
      CHECK(sol.status == LpStatus::Infeasible);
      continue;
    }
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(oracle.objective).epsilon(1e-6));
    ++solved;
  }
  CHECK(solved > 100);
}

TEST_CASE("duality certificate fields are populated and consistent") {
  std::mt19937_64 rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    auto p = oracles::random_lp(rng, 8, 4, 2, true);
    auto sol = saa_solve(p);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(std::fabs(sol.gap) <= 1e-6 * (1.0 + std::fabs(sol.objective)));
    CHECK(sol.max_violation <= 1e-6);
    REQUIRE(sol.duals.size() == static_cast<std::size_t>(p.K + p.n));
    for (int k = 0; k < p.K; ++k) CHECK(sol.duals[k] >= -1e-6);
  }
}

TEST_CASE("heavily tied coefficients with zero-threshold band rows terminate") {
  // Mimics member-level problems built from bagged tree predictions: many
  // duplicated rows, paired <= / >= constraints both at zero.
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> level(-2, 2);
  for (int rep = 0; rep < 12; ++rep) {
    const int n = 120, J = 4;
    DeterministicProblem p;
    p.n = n;
    p.J = J;
    p.K = 4;
    p.mu.assign(5, std::vector<double>(static_cast<std::size_t>(n) * J, 0.0));
    std::vector<double> proto0(static_cast<std::size_t>(8) * J), proto1(proto0.size()),
        proto2(proto0.size());
    for (std::size_t q = 0; q < proto0.size(); ++q) {
      proto0[q] = 0.25 * level(rng);
      proto1[q] = 0.25 * level(rng);
      proto2[q] = 0.25 * level(rng);
    }
    for (int i = 0; i < n; ++i) {
      const std::size_t g = static_cast<std::size_t>(rng() % 8) * J;
      for (int j = 0; j < J; ++j) {
        p.mu[0][static_cast<std::size_t>(i) * J + j] = j == 0 ? 0.0 : proto0[g + j];
        double g1 = j == 0 ? 0.0 : proto1[g + j];
        double g2 = j == 0 ? 0.0 : proto2[g + j];
        p.mu[1][static_cast<std::size_t>(i) * J + j] = g1;
        p.mu[2][static_cast<std::size_t>(i) * J + j] = -g1;
        p.mu[3][static_cast<std::size_t>(i) * J + j] = g2;
        p.mu[4][static_cast<std::size_t>(i) * J + j] = -g2;
      }
    }
    p.c = {0.0, 0.0, 0.0, 0.0};
    auto sol = saa_solve(p);  // all-control is feasible, so this must solve
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.objective >= -1e-9);
    CHECK(std::fabs(sol.gap) <= 1e-6 * (1.0 + std::fabs(sol.objective)));
  }
}
