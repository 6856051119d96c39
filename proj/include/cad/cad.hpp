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

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cad/action.hpp"
#include "cad/bandit.hpp"
#include "cad/feedback.hpp"
#include "cad/transform.hpp"

namespace cad {

enum class InitMode { kZero, kRandom };

/// Inner-iteration budget: base + increment * (times_selected - 1).
struct InnerSchedule {
  std::size_t base = 3;
  std::size_t increment = 2;
};

struct CadConfig {
  std::size_t k = 80;
  FeedbackConfig feedback;
  BanditParams bandit;
  InnerSchedule schedule;
  // ADMM iterations per schedule unit; only used with partial operators.
  std::size_t l1_iters_per_unit = 200;
  // CoSaMP iterations for the final reconstruction of the selected method.
  std::size_t final_cosamp_iters = 20;
  InitMode x0_mode = InitMode::kZero;
  std::size_t channels = 1;
  // Optional per-channel Mahalanobis thresholds overriding feedback.theta.
  std::vector<double> channel_theta;
  std::uint64_t seed = 0;

  void validate(Index n) const;
};

/// Grayscale parameter set (k = 80, alpha = 8, beta = 5, m = 1.8, tau = 15,
/// theta = 65, gamma = 0.07, sigma = 1.01, lambda = 1.25, eta = 0.3,
/// eta' = 0.15, eta'' = 0.04, Delta = 0.8, delta = 2). The dense-residual
/// gate for a3/a4 is set to tau.
CadConfig mnist_preset();

/// Colour parameter set, run per channel with theta = (3.3, 3, 3.2).
CadConfig cifar_preset();

std::size_t inner_iterations(Action action, std::size_t times_selected, const CadConfig& cfg);

enum class StopReason { kProbability, kResidual, kTMax };

std::string_view to_string(StopReason reason);

/// Outcome of the final argmax. `fallback` marks the CoSaMP default taken
/// when no score is positive.
struct FinalMethod {
  Action action = Action::kCosamp;
  bool fallback = false;

  std::string name() const;  // "a1".."a4" or "cosamp_fallback"
  bool is_cosamp() const { return action == Action::kCosamp; }
  bool operator==(const FinalMethod&) const = default;
};

struct CadIteration {
  std::size_t t = 0;
  Action action = Action::kCosamp;
  std::size_t inner_iters = 0;
  std::size_t residual_l0 = 0;
  double residual_l2 = 0.0;
  double residual_linf = 0.0;
  std::optional<double> md;
  bool feedback = false;
  double reward = 0.0;
  bool penalty_clamped = false;
  std::array<double, kActionCount> scores{};  // after this round's update
  std::array<double, kActionCount> probs{};   // distribution the action was drawn from
};

struct CadTrace {
  std::vector<CadIteration> records;
};

struct CadTiming {
  double loop_seconds = 0.0;
  double total_seconds = 0.0;
};

struct CadOutcome {
  FinalMethod final_method;
  SpectralVector estimate;
  Signal reconstruction;
  CadTrace trace;
  std::size_t stopped_at = 0;
  StopReason stop_reason = StopReason::kTMax;
  CadTiming timing;  // wall clock; excluded from JSON
};

/// Solver failure inside cad_run. Carries the trace recorded so far.
class CadError : public NumericalError {
 public:
  CadError(const std::string& what, CadTrace trace)
      : NumericalError(what), trace_(std::move(trace)) {}
  const CadTrace& trace() const { return trace_; }

 private:
  CadTrace trace_;
};

/// Single-channel CAD loop on y (length op.rows()). `stats` may be null, in
/// which case the a1 Mahalanobis branch never fires.
CadOutcome cad_run(const Signal& y, const CadConfig& cfg, const CleanStats* stats,
                   const SensingOperator& op);

struct ChannelOutcomes {
  std::vector<CadOutcome> channels;
  FinalMethod majority;  // most frequent per-channel method; ties go to the earliest channel
};

/// Runs cad_run independently on each planar channel of y. `stats` is either
/// empty or holds one entry per channel. Channel c uses seed
/// derive_seed(cfg.seed, c) and, when given, channel_theta[c].
ChannelOutcomes cad_run_channels(const Signal& y, const CadConfig& cfg,
                                 const std::vector<const CleanStats*>& stats,
                                 const SensingOperator& op);

nlohmann::json to_json(const CadConfig& cfg);
CadConfig cad_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CadTrace& trace);
nlohmann::json to_json(const CadOutcome& outcome);

}  // namespace cad
