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

#include <gtest/gtest.h>

#include "cad/bandit.hpp"
#include "cad/cad.hpp"
#include "support/ensembles.hpp"

namespace cad {
namespace {

const SensingOperator& op784() {
  static const SensingOperator op = SensingOperator::dct(784);
  return op;
}

CadConfig seeded(CadConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  return cfg;
}

void expect_trace_consistent(const CadOutcome& o, const CadConfig& cfg) {
  ASSERT_EQ(o.trace.records.size(), o.stopped_at);
  BanditState replay{{}, cfg.bandit, 0};
  for (const auto& rec : o.trace.records) {
    const auto dist = probabilities(replay);
    for (std::size_t i = 0; i < kActionCount; ++i) {
      ASSERT_DOUBLE_EQ(rec.probs[i], dist.probs[i]);
    }
    ASSERT_EQ(rec.reward, reward(rec.feedback, dist[rec.action], cfg.bandit.lambda).value);
    replay = update(replay, rec.action, rec.reward);
    ASSERT_EQ(rec.scores, replay.scores);
  }
}

void expect_stop_consistent(const CadOutcome& o, const CadConfig& cfg) {
  ASSERT_FALSE(o.trace.records.empty());
  const auto& last = o.trace.records.back();
  const double pmax = *std::max_element(last.probs.begin(), last.probs.end());
  switch (o.stop_reason) {
    case StopReason::kProbability:
      EXPECT_GT(pmax, cfg.feedback.delta_prob);
      break;
    case StopReason::kResidual:
      EXPECT_LE(pmax, cfg.feedback.delta_prob);
      EXPECT_LT(last.residual_l2, cfg.feedback.delta_res);
      break;
    case StopReason::kTMax:
      EXPECT_EQ(o.stopped_at, cfg.feedback.t_max);
      for (const auto& rec : o.trace.records) {
        EXPECT_LE(*std::max_element(rec.probs.begin(), rec.probs.end()), cfg.feedback.delta_prob);
        EXPECT_GE(rec.residual_l2, cfg.feedback.delta_res);
      }
      break;
  }
}

TEST(InnerIterations, Schedule) {
  CadConfig cfg;
  EXPECT_EQ(inner_iterations(Action::kCosamp, 1, cfg), 3U);
  EXPECT_EQ(inner_iterations(Action::kCosamp, 3, cfg), 7U);
  EXPECT_EQ(inner_iterations(Action::kL1Dense, 3, cfg), 7U);
  cfg.schedule.increment = 0;
  EXPECT_EQ(inner_iterations(Action::kL1Sparse, 9, cfg), 3U);
  EXPECT_THROW(inner_iterations(Action::kCosamp, 0, cfg), std::invalid_argument);
  cfg.schedule.increment = 2;
  for (std::size_t t = 1; t < 20; ++t) {
    EXPECT_LE(inner_iterations(Action::kCosamp, t, cfg), inner_iterations(Action::kCosamp, t + 1, cfg));
  }
}

TEST(Presets, ParameterSets) {
  const auto m = mnist_preset();
  EXPECT_EQ(m.k, 80U);
  EXPECT_EQ(m.feedback.alpha, 8.0);
  EXPECT_EQ(m.feedback.beta, 5.0);
  EXPECT_EQ(m.feedback.m_low, 1.8);
  EXPECT_EQ(m.feedback.tau, 15U);
  EXPECT_EQ(m.feedback.theta, 65.0);
  EXPECT_EQ(m.bandit.gamma, 0.07);
  EXPECT_EQ(m.bandit.sigma, 1.01);
  EXPECT_EQ(m.bandit.lambda, 1.25);
  EXPECT_EQ(m.feedback.l0_count_gate, std::optional<std::size_t>(15));
  const auto c = cifar_preset();
  EXPECT_EQ(c.k, 300U);
  EXPECT_EQ(c.channels, 3U);
  EXPECT_EQ(c.channel_theta, (std::vector<double>{3.3, 3.0, 3.2}));
  EXPECT_EQ(c.bandit.gamma, 0.45);
  EXPECT_EQ(c.bandit.lambda, 5.0);
}

TEST(CadConfigTest, Validation) {
  auto cfg = mnist_preset();
  EXPECT_NO_THROW(cfg.validate(784));
  EXPECT_THROW(cfg.validate(40), std::invalid_argument);
  cfg.bandit.gamma = 0.0;
  EXPECT_THROW(cfg.validate(784), std::invalid_argument);
  cfg = mnist_preset();
  cfg.channels = 2;
  EXPECT_THROW(cfg.validate(784), std::invalid_argument);
  cfg = mnist_preset();
  cfg.schedule.base = 0;
  EXPECT_THROW(cfg.validate(784), std::invalid_argument);
  cfg = mnist_preset();
  cfg.channel_theta = {1.0, 2.0};
  EXPECT_THROW(cfg.validate(784), std::invalid_argument);
}

TEST(CadConfigTest, JsonRoundTrip) {
  auto cfg = cifar_preset();
  cfg.seed = 99;
  cfg.x0_mode = InitMode::kRandom;
  cfg.feedback.a1_precedence = A1Precedence::kAndLast;
  cfg.feedback.l0_count_gate = 7;
  cfg.schedule = {4, 1};
  auto j = nlohmann::json::parse(to_json(cfg).dump());
  j["preset"] = "none";
  const auto back = cad_config_from_json(j);
  EXPECT_EQ(to_json(back), to_json(cfg));

  EXPECT_EQ(to_json(cad_config_from_json({{"preset", "mnist"}})), to_json(mnist_preset()));
  EXPECT_EQ(cad_config_from_json({{"preset", "mnist"}, {"l0_count_gate", nullptr}}).feedback.l0_count_gate,
            std::nullopt);
  EXPECT_THROW(cad_config_from_json({{"preset", "imagenet"}}), std::invalid_argument);
  EXPECT_THROW(cad_config_from_json({{"x0_mode", "ones"}}), std::invalid_argument);
}

TEST(CadRun, CleanSparseStopsOnResidualAndRecoversExactly) {
  const auto cfg0 = mnist_preset();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto inst = testing::calibrated_instance(AttackFamily::kNone, seed, op784());
    const auto cfg = seeded(cfg0, seed);
    const auto o = cad_run(inst.observed, cfg, nullptr, op784());
    EXPECT_EQ(o.stop_reason, StopReason::kResidual);
    EXPECT_TRUE(o.final_method.is_cosamp());
    EXPECT_LE((o.estimate.coeffs - inst.clean_spectral.coeffs).norm(),
              1e-8 * inst.clean_spectral.coeffs.norm());
    expect_trace_consistent(o, cfg);
    expect_stop_consistent(o, cfg);
  }
}

TEST(CadRun, IdentifiesCalibratedAttacks) {
  const auto cfg0 = mnist_preset();
  const std::vector<std::pair<AttackFamily, Action>> cases = {
      {AttackFamily::kL0, Action::kL1Sparse},
      {AttackFamily::kL2, Action::kL1Energy},
      {AttackFamily::kLinf, Action::kL1Dense},
  };
  for (const auto& [family, want] : cases) {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      const auto inst = testing::calibrated_instance(family, 100 + seed, op784());
      const auto cfg = seeded(cfg0, seed);
      const auto o = cad_run(inst.observed, cfg, nullptr, op784());
      hits += !o.final_method.fallback && o.final_method.action == want;
      expect_trace_consistent(o, cfg);
      expect_stop_consistent(o, cfg);
    }
    EXPECT_GE(hits, 24) << to_string(family);
  }
}

TEST(CadRun, AllZeroFeedbackFallsBackToCosamp) {
  auto cfg = mnist_preset();
  // No predicate can fire: a1 needs l2 < 0, a2 a count below 0, a3/a4 a
  // count of at least N + 1.
  cfg.feedback.alpha = 0.0;
  cfg.feedback.tau = 0;
  cfg.feedback.l0_count_gate = 785;
  for (auto family : {AttackFamily::kNone, AttackFamily::kL2, AttackFamily::kLinf}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto inst = testing::calibrated_instance(family, seed, op784());
      const auto o = cad_run(inst.observed, seeded(cfg, seed), nullptr, op784());
      EXPECT_TRUE(o.final_method.fallback);
      EXPECT_EQ(o.final_method.name(), "cosamp_fallback");
      for (const auto& rec : o.trace.records) EXPECT_FALSE(rec.feedback);
      for (double s : o.trace.records.back().scores) EXPECT_LE(s, 0.0);
    }
  }
}

TEST(CadRun, OutcomeInvariants) {
  const auto cfg = seeded(mnist_preset(), 3);
  const auto inst = testing::calibrated_instance(AttackFamily::kL2, 3, op784());
  const auto o = cad_run(inst.observed, cfg, nullptr, op784());
  EXPECT_LE((o.estimate.coeffs.array() != 0.0).count(), 80);
  EXPECT_EQ(o.reconstruction.values, synthesize(o.estimate, op784()).values);
  EXPECT_EQ(o.trace.records.size(), o.stopped_at);
  for (std::size_t i = 0; i < o.trace.records.size(); ++i) EXPECT_EQ(o.trace.records[i].t, i + 1);
  // Final method is the argmax with lowest-index ties.
  const auto& scores = o.trace.records.back().scores;
  const auto best = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) - scores.begin());
  if (scores[best] > 0.0) {
    EXPECT_EQ(index_of(o.final_method.action), best);
  }
  EXPECT_GE(o.timing.total_seconds, o.timing.loop_seconds);
}

TEST(CadRun, DeterministicForFixedSeed) {
  const auto inst = testing::calibrated_instance(AttackFamily::kLinf, 8, op784());
  for (auto mode : {InitMode::kZero, InitMode::kRandom}) {
    auto cfg = seeded(mnist_preset(), 8);
    cfg.x0_mode = mode;
    const auto a = cad_run(inst.observed, cfg, nullptr, op784());
    const auto b = cad_run(inst.observed, cfg, nullptr, op784());
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
    EXPECT_EQ(a.estimate.coeffs, b.estimate.coeffs);
  }
}

TEST(CadRun, InnerBudgetsFollowSchedule) {
  const auto cfg = seeded(mnist_preset(), 12);
  const auto inst = testing::calibrated_instance(AttackFamily::kL2, 12, op784());
  const auto o = cad_run(inst.observed, cfg, nullptr, op784());
  std::array<std::size_t, kActionCount> times{};
  for (const auto& rec : o.trace.records) {
    EXPECT_EQ(rec.inner_iters, inner_iterations(rec.action, ++times[index_of(rec.action)], cfg));
  }
}

TEST(CadRun, MahalanobisRecordedOnlyForCosamp) {
  const auto op = SensingOperator::dct(64);
  auto cfg = seeded(mnist_preset(), 2);
  cfg.k = 6;
  const CleanStats stats(Vector::Zero(64), Matrix::Identity(64, 64), 0.0);
  const auto clean = make_clean_sparse(64, 6, 4, 8, 2);
  AttackSpec s;
  s.family = AttackFamily::kL2;
  s.eta = 12.0;
  s.seed = 3;
  const auto o = cad_run(perturb(clean, s, op).observed, cfg, &stats, op);
  for (const auto& rec : o.trace.records) {
    EXPECT_EQ(rec.md.has_value(), rec.action == Action::kCosamp);
  }
}

TEST(CadRun, PartialOperatorUsesGeneralSolver) {
  std::vector<Index> rows;
  for (Index i = 0; i < 128; ++i) {
    if (i % 4 != 2) rows.push_back(i);
  }
  const auto op = SensingOperator::partial_dct(128, rows);
  auto cfg = seeded(mnist_preset(), 5);
  cfg.k = 6;
  cfg.feedback.t_max = 12;
  cfg.feedback.delta_res = 0.0;  // run to the cap
  cfg.feedback.delta_prob = 1.0;
  const auto clean = make_clean_sparse(128, 6, 4, 8, 5);
  const auto o = cad_run(synthesize(clean, op), cfg, nullptr, op);
  EXPECT_EQ(o.stopped_at, 12U);
  EXPECT_EQ(o.stop_reason, StopReason::kTMax);
  EXPECT_LE((o.estimate.coeffs.array() != 0.0).count(), 6);
}

TEST(CadRun, RejectsMismatchedInputs) {
  const auto cfg = mnist_preset();
  EXPECT_THROW(cad_run(Signal::zeros(100), cfg, nullptr, op784()), DimensionError);
  const CleanStats small(Vector::Zero(4), Matrix::Identity(4, 4), 0.0);
  EXPECT_THROW(cad_run(Signal::zeros(784), cfg, &small, op784()), DimensionError);
}

TEST(CadRunChannels, IndependentChannelsAndMajority) {
  const auto op = SensingOperator::dct(256);
  auto cfg = seeded(mnist_preset(), 21);
  cfg.k = 20;
  cfg.channels = 3;
  cfg.channel_theta = {3.3, 3.0, 3.2};
  std::vector<Signal> channels;
  for (std::uint64_t c = 0; c < 3; ++c) {
    channels.push_back(synthesize(make_clean_sparse(256, 20, 4, 8, 40 + c), op));
  }
  Vector joined(3 * 256);
  for (Index c = 0; c < 3; ++c) joined.segment(c * 256, 256) = channels[static_cast<std::size_t>(c)].values;
  const auto out = cad_run_channels(Signal(joined), cfg, {}, op);
  ASSERT_EQ(out.channels.size(), 3U);
  for (std::size_t c = 0; c < 3; ++c) {
    CadConfig single = cfg;
    single.channels = 1;
    single.channel_theta.clear();
    single.feedback.theta = cfg.channel_theta[c];
    single.seed = derive_seed(cfg.seed, c);
    const auto alone = cad_run(channels[c], single, nullptr, op);
    EXPECT_EQ(to_json(alone).dump(), to_json(out.channels[c]).dump());
  }
  EXPECT_TRUE(out.majority.is_cosamp());
  EXPECT_THROW(cad_run_channels(Signal::zeros(256), cfg, {}, op), DimensionError);
}

TEST(CadOutcomeJson, SparseEstimateAndTrace) {
  const auto cfg = seeded(mnist_preset(), 1);
  const auto inst = testing::calibrated_instance(AttackFamily::kNone, 1, op784());
  const auto o = cad_run(inst.observed, cfg, nullptr, op784());
  const auto j = to_json(o);
  EXPECT_EQ(j.at("estimate").size(), 80U);
  EXPECT_EQ(j.at("trace").size(), o.stopped_at);
  EXPECT_EQ(j.at("stop_reason"), "residual");
  EXPECT_FALSE(j.contains("timing"));
}

}  // namespace
}  // namespace cad
