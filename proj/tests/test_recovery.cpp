// Copyright 2026 The CAD Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <random>

#include <gtest/gtest.h>

#include "cad/attack.hpp"
#include "cad/recovery.hpp"
#include "support/oracles.hpp"

namespace cad {
namespace {

Vector gaussian(Index n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

L1Problem problem_for(const Vector& c, double radius) {
  const auto op = SensingOperator::dct(c.size());
  return L1Problem{.observed = synthesize(SpectralVector(c), op), .op = op, .radius = radius,
                   .warm_start = std::nullopt};
}

// --- CoSaMP ---------------------------------------------------------------

TEST(Cosamp, OneStepRecoversNoiselessSparse) {
  const auto op = SensingOperator::dct(64);
  const auto x = make_clean_sparse(64, 6, 1.0, 3.0, 21);
  const Signal y = synthesize(x, op);
  const auto s1 = cosamp_step(CosampState::initial(y, op, 6), y, op, 6);
  EXPECT_LE((s1.estimate.coeffs - x.coeffs).norm(), 1e-12 * x.coeffs.norm());
  EXPECT_LE(s1.residual.values.norm(), 1e-12);
  EXPECT_EQ(s1.iteration, 1U);
}

TEST(Cosamp, ZeroInputStaysZero) {
  const auto op = SensingOperator::dct(32);
  const Signal y = Signal::zeros(32);
  const auto s = cosamp_run(y, op, 4, 5).final;
  EXPECT_TRUE(s.estimate.coeffs.isZero(0.0));
  EXPECT_TRUE(s.residual.values.isZero(0.0));
}

TEST(Cosamp, NoisyErrorBoundedByPerturbation) {
  const auto op = SensingOperator::dct(16);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto x = make_clean_sparse(16, 2, 1.0, 2.0, seed);
    AttackSpec spec;
    spec.family = AttackFamily::kL2;
    spec.eta = 0.1;
    spec.seed = seed + 1000;
    const auto inst = perturb(x, spec, op);
    const auto s = cosamp_run(inst.observed, op, 2, 10).final;
    // With an orthonormal operator the error lives on the true support and is
    // the restriction of e there.
    EXPECT_LE((s.estimate.coeffs - x.coeffs).norm(), 0.1 + 1e-12) << "seed " << seed;
  }
}

TEST(Cosamp, ExactWithinFiveIterationsAndMonotone) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Index n = 64;
    const auto op = SensingOperator::dct(n);
    const std::size_t k = 1 + seed % 8;
    const auto x = make_clean_sparse(n, k, 0.5, 2.0, seed);
    const auto run = cosamp_run(synthesize(x, op), op, k, 5);
    EXPECT_LE((run.final.estimate.coeffs - x.coeffs).norm(), 1e-8 * x.coeffs.norm());
    for (std::size_t i = 1; i < run.history.size(); ++i) {
      EXPECT_LE((run.history[i].coeffs - x.coeffs).norm(),
                (run.history[i - 1].coeffs - x.coeffs).norm() + 1e-12);
    }
  }
}

TEST(Cosamp, PartialOperatorConverges) {
  // 48 of 64 rows; 4-sparse signals are recovered by the iteration.
  std::vector<Index> rows;
  for (Index i = 0; i < 64; ++i) {
    if (i % 4 != 3) rows.push_back(i);
  }
  const auto op = SensingOperator::partial_dct(64, rows);
  int exact = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto x = make_clean_sparse(64, 4, 1.0, 2.0, seed);
    const auto run = cosamp_run(synthesize(x, op), op, 4, 30);
    for (const auto& h : run.history) ASSERT_LE((h.coeffs.array() != 0.0).count(), 4);
    exact += (run.final.estimate.coeffs - x.coeffs).norm() <= 1e-8 * x.coeffs.norm();
  }
  EXPECT_GE(exact, 45);
}

TEST(Cosamp, SparsityAndMergedSupportInvariants) {
  const auto op = SensingOperator::dct(128);
  const auto x = make_compressible(128, 10, 1.0, 2.0, 0.2, 4);
  const Signal y = synthesize(x, op);
  auto state = CosampState::initial(y, op, 10);
  for (int i = 0; i < 8; ++i) {
    state = cosamp_step(state, y, op, 10);
    EXPECT_LE((state.estimate.coeffs.array() != 0.0).count(), 10);
    EXPECT_LE(state.merged_support, 30U);
    EXPECT_LE((state.residual.values - (y.values - synthesize(state.estimate, op).values)).norm(), 1e-10);
  }
}

TEST(Cosamp, HeadInitialisationStaysAtNoiseLevel) {
  const auto op = SensingOperator::dct(256);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto x = make_compressible(256, 12, 2.0, 4.0, 0.05, seed);
    const SpectralVector head = top_k(x, 12);
    const Signal y = synthesize(x, op);
    const auto run = cosamp_run(y, op, 12, 10, head);
    const double tail = (x.coeffs - head.coeffs).norm();
    for (const auto& h : run.history) {
      EXPECT_LE((h.coeffs - head.coeffs).norm(), 2.0 * tail);
    }
  }
}

TEST(Cosamp, InitialPrunesWarmStart) {
  const auto op = SensingOperator::dct(8);
  const SpectralVector x0(Vector{{1.0, -3.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.5}});
  const Signal y = synthesize(x0, op);
  const auto s = CosampState::initial(y, op, 2, x0);
  EXPECT_EQ(s.estimate.coeffs, top_k(x0, 2).coeffs);
}

// --- Orthonormal l1 ------------------------------------------------------

TEST(L1Orthonormal, RadiusAboveNormGivesZero) {
  const Vector c{{3.0, 1.0}};
  auto p = problem_for(c, 1.0);
  p.radius = analyze(p.observed, p.op).coeffs.norm();
  EXPECT_TRUE(l1_min_orthonormal(p).coeffs.isZero(0.0));
  EXPECT_TRUE(l1_min_orthonormal(problem_for(c, 5.0)).coeffs.isZero(0.0));
}

TEST(L1Orthonormal, ZeroRadiusReturnsAnalysis) {
  const Vector c = gaussian(16, 3);
  const auto p = problem_for(c, 0.0);
  EXPECT_EQ(l1_min_orthonormal(p).coeffs, analyze(p.observed, p.op).coeffs);
}

TEST(L1Orthonormal, TwoCoefficientExample) {
  const auto z = l1_min_orthonormal(problem_for(Vector{{3.0, 1.0}}, 1.0));
  const double shift = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(z[0], 3.0 - shift, 1e-9);
  EXPECT_NEAR(z[1], 1.0 - shift, 1e-9);
  EXPECT_NEAR(shrinkage_threshold(Vector{{3.0, 1.0}}, 1.0), shift, 1e-9);
}

// Objectives computed offline with an epigraph LP/SOCP solver (cvxpy) and
// cross-checked by water filling.
struct FrozenL1 {
  std::vector<double> c;
  double radius;
  double objective;
};

TEST(L1Orthonormal, MatchesFrozenEpigraphSolutions) {
  const std::vector<FrozenL1> cases = {
      {{3.0, 1.0}, 1.0, 2.585786437627},
      {{0.8, -1.3, 0.2, 2.5, -0.4, 0.05, 1.1, -2.0}, 1.5, 4.500390648845},
      {{0.8, -1.3, 0.2, 2.5, -0.4, 0.05, 1.1, -2.0}, 0.3, 7.517376207875},
      {{1.0, 1.0, 1.0, 1.0}, 1.0, 2.0},
      {{5.0, -0.1, 0.1, 0.0, 0.0, 2.0}, 4.0, 1.538786340025},
      {{0.5, -0.25, 0.125, -0.0625, 1.5, -3.0, 0.75, 0.0, 2.25, -1.0, 0.3, -0.6}, 2.0, 4.490878185768},
  };
  for (const auto& fc : cases) {
    const Vector c = Eigen::Map<const Vector>(fc.c.data(), static_cast<Index>(fc.c.size()));
    const auto z = l1_min_orthonormal(problem_for(c, fc.radius));
    EXPECT_NEAR(z.coeffs.lpNorm<1>(), fc.objective, 1e-8);
    EXPECT_NEAR(testing::l1_ball_oracle(c, fc.radius), fc.objective, 1e-9);
  }
}

TEST(L1Orthonormal, MatchesSupportEnumerationOracle) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Index n = 2 + static_cast<Index>(seed % 11);
    const Vector c = gaussian(n, seed, 2.0);
    std::mt19937_64 rng(seed + 99);
    const double radius = std::uniform_real_distribution<double>(0.0, 1.2)(rng) * c.norm();
    const auto p = problem_for(c, radius);
    const Vector z = l1_min_orthonormal(p).coeffs;
    const Vector cc = analyze(p.observed, p.op).coeffs;
    EXPECT_LE((z - cc).norm(), radius + 1e-9);
    EXPECT_NEAR(z.lpNorm<1>(), testing::l1_ball_oracle(cc, radius), 1e-6) << "seed " << seed;
  }
}

TEST(L1Orthonormal, ShrinkageNeverFlipsOrGrows) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Vector c = gaussian(32, seed);
    const auto p = problem_for(c, 0.1 * static_cast<double>(seed % 30));
    const Vector cc = analyze(p.observed, p.op).coeffs;
    const Vector z = l1_min_orthonormal(p).coeffs;
    for (Index i = 0; i < 32; ++i) {
      EXPECT_LE(std::abs(z[i]), std::abs(cc[i]));
      EXPECT_GE(z[i] * cc[i], 0.0);
    }
  }
}

TEST(L1Orthonormal, RejectsPartialOperator) {
  const auto op = SensingOperator::partial_dct(8, {0, 1, 2});
  L1Problem p{.observed = Signal::zeros(3), .op = op, .radius = 0.1, .warm_start = std::nullopt};
  EXPECT_THROW(l1_min_orthonormal(p), std::invalid_argument);
}

TEST(L1Problem, ValidatesInputs) {
  auto p = problem_for(Vector{{1.0, 2.0}}, -0.1);
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.radius = 0.1;
  p.tolerance = 0.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.tolerance = 1e-6;
  p.observed = Signal::zeros(3);
  EXPECT_THROW(p.validate(), DimensionError);
}

// --- General l1 (ADMM) -----------------------------------------------------

TEST(L1General, AgreesWithOrthonormalSolver) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const Index n = seed < 40 ? 16 : 64;
    const Vector c = gaussian(n, seed, 1.5);
    const double radius = 0.05 * static_cast<double>(seed % 20) * c.norm();
    auto p = problem_for(c, radius);
    const auto general = l1_min_general(p);
    const Vector exact = l1_min_orthonormal(p).coeffs;
    EXPECT_TRUE(general.converged) << "seed " << seed;
    EXPECT_LE((general.solution.coeffs - exact).norm(), 1e-6) << "seed " << seed;
    EXPECT_LE(general.feasibility_violation, 1e-9);
  }
}

TEST(L1General, ZeroObservationGivesZero) {
  const auto op = SensingOperator::partial_dct(12, {0, 2, 5, 7, 11});
  for (double r : {0.0, 0.5, 3.0}) {
    L1Problem p{.observed = Signal::zeros(5), .op = op, .radius = r, .warm_start = std::nullopt};
    EXPECT_LE(l1_min_general(p).solution.coeffs.norm(), 1e-12);
  }
}

TEST(L1General, RecoversOneSparseFromSixRows) {
  const std::vector<std::vector<Index>> row_sets = {
      {0, 1, 2, 3, 4, 5}, {0, 1, 2, 4, 5, 7}, {0, 2, 3, 4, 5, 7}};
  for (const auto& rows : row_sets) {
    const auto op = SensingOperator::partial_dct(8, rows);
    const Matrix& a = op.matrix();
    for (Index pos = 0; pos < 8; ++pos) {
      for (double amp : {1.0, -0.7}) {
        Vector x = Vector::Zero(8);
        x[pos] = amp;
        const Vector y = a * x;
        // Enumeration oracle: the observation admits exactly one 1-sparse explanation.
        int consistent = 0;
        for (Index j = 0; j < 8; ++j) {
          const double v = a.col(j).dot(y) / a.col(j).squaredNorm();
          consistent += (a.col(j) * v - y).norm() <= 1e-12;
        }
        ASSERT_EQ(consistent, 1);
        L1Problem p{.observed = Signal(y), .op = op, .radius = 0.0, .warm_start = std::nullopt};
        const auto r = l1_min_general(p);
        EXPECT_LE((r.solution.coeffs - x).norm(), 1e-6) << "pos " << pos;
      }
    }
  }
}

TEST(L1General, FlagsNonConvergence) {
  const auto op = SensingOperator::partial_dct(64, {0, 5, 9, 13, 20, 31, 40, 41, 50, 63});
  L1Problem p{.observed = Signal(gaussian(10, 5)), .op = op, .radius = 0.1, .warm_start = std::nullopt};
  p.max_iters = 3;
  const auto r = l1_min_general(p);
  EXPECT_FALSE(r.converged);
  EXPECT_EQ(r.iterations, 3U);
  EXPECT_LE(r.feasibility_violation, 1e-9);
}

TEST(L1General, WarmStartReducesIterations) {
  const auto op = SensingOperator::partial_dct(64, [] {
    std::vector<Index> rows;
    // Mixed row parity; even rows alone duplicate columns i and n-1-i.
    for (Index i = 0; i < 64; ++i) {
      if (i % 3 != 1) rows.push_back(i);
    }
    return rows;
  }());
  const auto x = make_clean_sparse(64, 4, 1.0, 2.0, 3);
  L1Problem p{.observed = synthesize(x, op), .op = op, .radius = 0.05, .warm_start = std::nullopt};
  const auto cold = l1_min_general(p);
  p.warm_start = cold.solution;
  const auto warm = l1_min_general(p);
  EXPECT_LT(warm.iterations, cold.iterations);
  EXPECT_LE((warm.solution.coeffs - cold.solution.coeffs).norm(), 1e-5);
}

// --- Radii and bound reports ----------------------------------------------

TEST(ActionRadius, MnistParameters) {
  const FeedbackConfig cfg;
  EXPECT_NEAR(action_radius(Action::kL1Sparse, cfg, 784), 2.25, 1e-12);
  EXPECT_NEAR(action_radius(Action::kL1Energy, cfg, 784), 0.3, 1e-12);
  EXPECT_NEAR(action_radius(Action::kL1Dense, cfg, 784), 1.12, 1e-12);
  EXPECT_THROW(action_radius(Action::kCosamp, cfg, 784), std::invalid_argument);
}

TEST(CheckBound, ExactRecoveryIsZero) {
  const auto x = make_compressible(64, 8, 1, 2, 0.1, 2);
  const auto r = check_bound(x, x, 8, 0.3);
  EXPECT_EQ(r.empirical_l2_error, 0.0);
  EXPECT_EQ(r.empirical_l1_error, 0.0);
  ASSERT_TRUE(r.ratio.has_value());
  EXPECT_EQ(*r.ratio, 0.0);
  EXPECT_GT(r.sigma_k_l1, 0.0);
  EXPECT_FALSE(check_bound(x, x, 8, 0.0).ratio.has_value());
}

TEST(CheckBound, SparseCleanErrorWithinBudgetMultiple) {
  const auto op = SensingOperator::dct(128);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto x = make_clean_sparse(128, 8, 1, 2, seed);
    AttackSpec s;
    s.family = AttackFamily::kL2;
    s.eta = 0.3;
    s.seed = seed + 7;
    const auto inst = perturb(x, s, op);
    L1Problem p{.observed = inst.observed, .op = op, .radius = 0.3, .warm_start = std::nullopt};
    const auto r = check_bound(x, l1_min_orthonormal(p), 8, 0.3);
    EXPECT_EQ(r.sigma_k_l1, 0.0);
    EXPECT_LE(*r.ratio, 2.0 + 1e-9);
  }
}

TEST(CheckBound, ErrorGrowsAtMostLinearlyInBudget) {
  // Mean error at budget b and 2b over 100 seeds; the ratio stays near 2.
  const auto op = SensingOperator::dct(64);
  for (double budget : {0.1, 0.2, 0.4}) {
    double e1 = 0.0, e2 = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto x = make_clean_sparse(64, 6, 1, 2, seed);
      for (int twice = 0; twice < 2; ++twice) {
        AttackSpec s;
        s.family = AttackFamily::kL2;
        s.eta = budget * (1 + twice);
        s.seed = seed + 500;
        const auto inst = perturb(x, s, op);
        L1Problem p{.observed = inst.observed, .op = op, .radius = s.eta, .warm_start = std::nullopt};
        const double err = check_bound(x, l1_min_orthonormal(p), 6, s.eta).empirical_l2_error;
        (twice ? e2 : e1) += err;
      }
    }
    EXPECT_LE(e2 / e1, 2.0 * 1.1) << "budget " << budget;
  }
}

}  // namespace
}  // namespace cad
