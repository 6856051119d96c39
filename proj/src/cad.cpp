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

#include "cad/cad.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

#include "cad/random.hpp"
#include "cad/recovery.hpp"

namespace cad {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

SpectralVector initial_estimate(const CadConfig& cfg, Index n, std::uint64_t seed) {
  if (cfg.x0_mode == InitMode::kZero) {
    return SpectralVector::zeros(n);
  }
  Rng rng(derive_seed(seed, 0x5eed));
  std::uniform_real_distribution<double> u(-0.01, 0.01);
  Vector x(n);
  for (Index i = 0; i < n; ++i) {
    x[i] = u(rng);
  }
  return SpectralVector(std::move(x));
}

// Runs one action with the given schedule units. For partial operators the
// l1 actions warm-start from `warm` and store their solution back.
SpectralVector run_action(Action action, std::size_t units, const Signal& y, const CadConfig& cfg,
                          const SensingOperator& op, const SpectralVector& x0,
                          std::optional<SpectralVector>* warm, std::size_t cosamp_iters) {
  if (action == Action::kCosamp) {
    return cosamp_run(y, op, cfg.k, cosamp_iters, x0).final.estimate;
  }
  L1Problem problem{.observed = y, .op = op, .radius = 0.0, .warm_start = std::nullopt};
  problem.radius = action_radius(action, cfg.feedback, static_cast<std::size_t>(op.n()));
  if (op.is_full()) {
    return l1_min_orthonormal(problem);
  }
  if (units > 0) {
    problem.max_iters = units * cfg.l1_iters_per_unit;
  }
  if (warm != nullptr) {
    problem.warm_start = *warm;
  }
  L1Result result = l1_min_general(problem);
  if (warm != nullptr) {
    *warm = result.solution;
  }
  return std::move(result.solution);
}

}  // namespace

void CadConfig::validate(Index n) const {
  if (k < 1 || static_cast<Index>(k) > n) {
    throw std::invalid_argument("sparsity k must lie in [1, N]");
  }
  feedback.validate();
  bandit.validate();
  if (!(bandit.gamma > 0.0)) {
    throw std::invalid_argument("gamma must lie in (0, 1)");
  }
  if (schedule.base < 1) {
    throw std::invalid_argument("inner schedule base must be at least 1");
  }
  if (channels != 1 && channels != 3) {
    throw std::invalid_argument("channels must be 1 or 3");
  }
  if (!channel_theta.empty() && channel_theta.size() != channels) {
    throw std::invalid_argument("channel_theta needs one entry per channel");
  }
  if (final_cosamp_iters < 1 || l1_iters_per_unit < 1) {
    throw std::invalid_argument("iteration budgets must be positive");
  }
}

CadConfig mnist_preset() {
  CadConfig cfg;
  cfg.k = 80;
  cfg.feedback.alpha = 8.0;
  cfg.feedback.beta = 5.0;
  cfg.feedback.m_low = 1.8;
  cfg.feedback.tau = 15;
  cfg.feedback.theta = 65.0;
  cfg.feedback.eta = 0.3;
  cfg.feedback.eta_prime = 0.15;
  cfg.feedback.eta_dprime = 0.04;
  cfg.feedback.delta_prob = 0.8;
  cfg.feedback.delta_res = 2.0;
  cfg.feedback.l0_count_gate = cfg.feedback.tau;
  cfg.bandit = {0.07, 1.01, 1.25};
  cfg.channels = 1;
  return cfg;
}

CadConfig cifar_preset() {
  CadConfig cfg;
  cfg.k = 300;
  cfg.feedback.alpha = 7.0;
  cfg.feedback.beta = 2.8;
  cfg.feedback.m_low = 1.4;
  cfg.feedback.tau = 35;
  cfg.feedback.theta = 3.3;
  cfg.feedback.eta = 0.5;
  cfg.feedback.eta_prime = 0.05;
  cfg.feedback.eta_dprime = 0.05;
  cfg.feedback.delta_prob = 0.8;
  cfg.feedback.delta_res = 2.0;
  cfg.feedback.l0_count_gate.reset();
  cfg.bandit = {0.45, 1.0, 5.0};
  cfg.channels = 3;
  cfg.channel_theta = {3.3, 3.0, 3.2};
  return cfg;
}

std::size_t inner_iterations(Action /*action*/, std::size_t times_selected, const CadConfig& cfg) {
  if (times_selected < 1) {
    throw std::invalid_argument("times_selected must be at least 1");
  }
  return cfg.schedule.base + cfg.schedule.increment * (times_selected - 1);
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kProbability: return "prob";
    case StopReason::kResidual: return "residual";
    case StopReason::kTMax: return "t_max";
  }
  return "unknown";
}

std::string FinalMethod::name() const {
  return fallback ? std::string("cosamp_fallback") : std::string(action_name(action));
}

CadOutcome cad_run(const Signal& y, const CadConfig& cfg, const CleanStats* stats,
                   const SensingOperator& op) {
  const auto start = Clock::now();
  cfg.validate(op.n());
  if (y.size() != op.rows()) {
    throw DimensionError("cad_run: observation length does not match the operator");
  }
  if (stats != nullptr && stats->n() != op.rows()) {
    throw DimensionError("cad_run: clean statistics length does not match the observation");
  }

  const SpectralVector x0 = initial_estimate(cfg, op.n(), cfg.seed);
  Rng rng(cfg.seed);
  BanditState bandit{{}, cfg.bandit, 0};
  std::array<std::size_t, kActionCount> times{};
  std::array<std::optional<SpectralVector>, kActionCount> warm{};

  CadOutcome out;
  out.stop_reason = StopReason::kTMax;
  try {
    for (std::size_t t = 1; t <= cfg.feedback.t_max; ++t) {
      const ActionDistribution dist = probabilities(bandit);
      const Action action = sample_action(dist, rng);
      const std::size_t slot = index_of(action);
      const std::size_t units = inner_iterations(action, ++times[slot], cfg);

      SpectralVector est =
          top_k(run_action(action, units, y, cfg, op, x0, &warm[slot], units), cfg.k);
      const Signal v = residual(y, est, op);
      const FeedbackEval eval = evaluate_feedback(action, v, cfg.feedback, stats);
      const RewardValue r = reward(eval.bit, dist[action], cfg.bandit.lambda);
      bandit = update(bandit, action, r.value);

      CadIteration rec;
      rec.t = t;
      rec.action = action;
      rec.inner_iters = units;
      rec.residual_l0 = eval.norms.count;
      rec.residual_l2 = eval.norms.l2;
      rec.residual_linf = eval.norms.linf;
      rec.md = eval.md;
      rec.feedback = eval.bit;
      rec.reward = r.value;
      rec.penalty_clamped = r.clamped;
      rec.scores = bandit.scores;
      rec.probs = dist.probs;
      out.trace.records.push_back(rec);

      if (should_stop(dist, v, cfg.feedback)) {
        out.stop_reason = dist.max() > cfg.feedback.delta_prob ? StopReason::kProbability
                                                               : StopReason::kResidual;
        break;
      }
    }
    out.stopped_at = out.trace.records.size();
    out.timing.loop_seconds = seconds_since(start);

    // Argmax with lowest-index ties; non-positive maximum means CoSaMP.
    std::size_t best = 0;
    for (std::size_t i = 1; i < kActionCount; ++i) {
      if (bandit.scores[i] > bandit.scores[best]) {
        best = i;
      }
    }
    if (bandit.scores[best] <= 0.0) {
      out.final_method = {Action::kCosamp, true};
    } else {
      out.final_method = {static_cast<Action>(best), false};
    }

    out.estimate = top_k(run_action(out.final_method.action, 0, y, cfg, op, x0, nullptr,
                                    cfg.final_cosamp_iters),
                         cfg.k);
  } catch (const CadError&) {
    throw;
  } catch (const std::exception& e) {
    throw CadError(std::string("cad_run failed: ") + e.what(), out.trace);
  }
  out.reconstruction = synthesize(out.estimate, op);
  out.timing.total_seconds = seconds_since(start);
  return out;
}

ChannelOutcomes cad_run_channels(const Signal& y, const CadConfig& cfg,
                                 const std::vector<const CleanStats*>& stats,
                                 const SensingOperator& op) {
  const auto channels = static_cast<Index>(cfg.channels);
  if (y.size() != op.rows() * channels) {
    throw DimensionError("cad_run_channels: observation length is not N * channels");
  }
  if (!stats.empty() && stats.size() != cfg.channels) {
    throw std::invalid_argument("cad_run_channels: need one statistics object per channel");
  }
  ChannelOutcomes out;
  std::map<std::string, std::size_t> votes;
  for (Index c = 0; c < channels; ++c) {
    CadConfig channel_cfg = cfg;
    channel_cfg.channels = 1;
    channel_cfg.channel_theta.clear();
    channel_cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(c));
    if (!cfg.channel_theta.empty()) {
      channel_cfg.feedback.theta = cfg.channel_theta[static_cast<std::size_t>(c)];
    }
    const Signal yc(y.values.segment(c * op.rows(), op.rows()));
    const CleanStats* sc = stats.empty() ? nullptr : stats[static_cast<std::size_t>(c)];
    out.channels.push_back(cad_run(yc, channel_cfg, sc, op));
    ++votes[out.channels.back().final_method.name()];
  }
  std::size_t best_votes = 0;
  for (const auto& o : out.channels) {
    const std::size_t v = votes[o.final_method.name()];
    if (v > best_votes) {
      best_votes = v;
      out.majority = o.final_method;
    }
  }
  return out;
}

nlohmann::json to_json(const CadConfig& cfg) {
  const auto& f = cfg.feedback;
  nlohmann::json j = {
      {"k", cfg.k},
      {"alpha", f.alpha},
      {"beta", f.beta},
      {"m", f.m_low},
      {"tau", f.tau},
      {"theta", f.theta},
      {"count_threshold", f.count_threshold},
      {"eta", f.eta},
      {"eta_prime", f.eta_prime},
      {"eta_dprime", f.eta_dprime},
      {"Delta", f.delta_prob},
      {"delta", f.delta_res},
      {"T", f.t_max},
      {"a1_precedence", f.a1_precedence == A1Precedence::kOrFirst ? "or_first" : "and_last"},
      {"gamma", cfg.bandit.gamma},
      {"sigma", cfg.bandit.sigma},
      {"lambda", cfg.bandit.lambda},
      {"n0", cfg.schedule.base},
      {"increment", cfg.schedule.increment},
      {"l1_iters_per_unit", cfg.l1_iters_per_unit},
      {"final_cosamp_iters", cfg.final_cosamp_iters},
      {"x0_mode", cfg.x0_mode == InitMode::kZero ? "zero" : "random"},
      {"channels", cfg.channels},
      {"channel_theta", cfg.channel_theta},
      {"seed", cfg.seed},
  };
  j["l0_count_gate"] = f.l0_count_gate ? nlohmann::json(*f.l0_count_gate) : nlohmann::json(nullptr);
  return j;
}

CadConfig cad_config_from_json(const nlohmann::json& j) {
  CadConfig cfg;
  const auto preset = j.value("preset", std::string("mnist"));
  if (preset == "mnist") {
    cfg = mnist_preset();
  } else if (preset == "cifar") {
    cfg = cifar_preset();
  } else if (preset != "none") {
    throw std::invalid_argument("unknown preset: " + preset);
  }
  auto& f = cfg.feedback;
  cfg.k = j.value("k", cfg.k);
  f.alpha = j.value("alpha", f.alpha);
  f.beta = j.value("beta", f.beta);
  f.m_low = j.value("m", f.m_low);
  f.tau = j.value("tau", f.tau);
  f.theta = j.value("theta", f.theta);
  f.count_threshold = j.value("count_threshold", f.count_threshold);
  f.eta = j.value("eta", f.eta);
  f.eta_prime = j.value("eta_prime", f.eta_prime);
  f.eta_dprime = j.value("eta_dprime", f.eta_dprime);
  f.delta_prob = j.value("Delta", f.delta_prob);
  f.delta_res = j.value("delta", f.delta_res);
  f.t_max = j.value("T", f.t_max);
  if (j.contains("l0_count_gate")) {
    if (j["l0_count_gate"].is_null()) {
      f.l0_count_gate.reset();
    } else {
      f.l0_count_gate = j["l0_count_gate"].get<std::size_t>();
    }
  }
  if (j.contains("a1_precedence")) {
    const auto p = j["a1_precedence"].get<std::string>();
    if (p == "or_first") {
      f.a1_precedence = A1Precedence::kOrFirst;
    } else if (p == "and_last") {
      f.a1_precedence = A1Precedence::kAndLast;
    } else {
      throw std::invalid_argument("unknown a1_precedence: " + p);
    }
  }
  cfg.bandit.gamma = j.value("gamma", cfg.bandit.gamma);
  cfg.bandit.sigma = j.value("sigma", cfg.bandit.sigma);
  cfg.bandit.lambda = j.value("lambda", cfg.bandit.lambda);
  cfg.schedule.base = j.value("n0", cfg.schedule.base);
  cfg.schedule.increment = j.value("increment", cfg.schedule.increment);
  cfg.l1_iters_per_unit = j.value("l1_iters_per_unit", cfg.l1_iters_per_unit);
  cfg.final_cosamp_iters = j.value("final_cosamp_iters", cfg.final_cosamp_iters);
  if (j.contains("x0_mode")) {
    const auto mode = j["x0_mode"].get<std::string>();
    if (mode == "zero") {
      cfg.x0_mode = InitMode::kZero;
    } else if (mode == "random") {
      cfg.x0_mode = InitMode::kRandom;
    } else {
      throw std::invalid_argument("unknown x0_mode: " + mode);
    }
  }
  cfg.channels = j.value("channels", cfg.channels);
  cfg.channel_theta = j.value("channel_theta", cfg.channel_theta);
  cfg.seed = j.value("seed", cfg.seed);
  return cfg;
}

nlohmann::json to_json(const CadTrace& trace) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : trace.records) {
    nlohmann::json row = {
        {"t", r.t},
        {"action", std::string(action_name(r.action))},
        {"inner_iters", r.inner_iters},
        {"residual_l0", r.residual_l0},
        {"residual_l2", r.residual_l2},
        {"residual_linf", r.residual_linf},
        {"feedback", r.feedback},
        {"reward", r.reward},
        {"penalty_clamped", r.penalty_clamped},
        {"scores", r.scores},
        {"probs", r.probs},
    };
    row["md"] = r.md ? nlohmann::json(*r.md) : nlohmann::json(nullptr);
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json to_json(const CadOutcome& outcome) {
  const Vector& e = outcome.estimate.coeffs;
  nlohmann::json support = nlohmann::json::array();
  for (Index i = 0; i < e.size(); ++i) {
    if (e[i] != 0.0) {
      support.push_back({{"index", i}, {"value", e[i]}});
    }
  }
  return {
      {"final_method", outcome.final_method.name()},
      {"stopped_at", outcome.stopped_at},
      {"stop_reason", std::string(to_string(outcome.stop_reason))},
      {"n", e.size()},
      {"estimate", std::move(support)},
      {"trace", to_json(outcome.trace)},
  };
}

}  // namespace cad
