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

#include <cstddef>
#include <optional>
#include <vector>

#include <nlohmann/json.hpp>

#include "cad/action.hpp"
#include "cad/feedback_config.hpp"
#include "cad/transform.hpp"

namespace cad {

/// One CoSaMP iterate x^t with its residual v^t = y - A x^t.
struct CosampState {
  SpectralVector estimate;
  Signal residual;
  std::size_t iteration = 0;
  std::size_t merged_support = 0;  // |R| of the step that produced this state

  /// Zero estimate (or the top-k of x0) with its residual.
  static CosampState initial(const Signal& y, const SensingOperator& op, std::size_t k,
                             const std::optional<SpectralVector>& x0 = std::nullopt);
};

/// One identification / merge / least-squares / prune round.
CosampState cosamp_step(const CosampState& state, const Signal& y, const SensingOperator& op,
                        std::size_t k);

struct CosampRun {
  CosampState final;
  std::vector<SpectralVector> history;  // x^1 .. x^n
};

CosampRun cosamp_run(const Signal& y, const SensingOperator& op, std::size_t k, std::size_t n_iters,
                     const std::optional<SpectralVector>& x0 = std::nullopt);

/// min ||z||_1 subject to ||A z - y||_2 <= radius.
struct L1Problem {
  Signal observed;
  SensingOperator op;
  double radius = 0.0;
  double tolerance = 1e-6;
  std::size_t max_iters = 5000;
  std::optional<SpectralVector> warm_start;

  void validate() const;
};

struct L1Result {
  SpectralVector solution;
  std::size_t iterations = 0;
  bool converged = true;
  double feasibility_violation = 0.0;  // max(0, ||A z - y||_2 - radius)
};

/// Full orthonormal operator only. There ||A z - y||_2 = ||z - c||_2 with
/// c = F y, so the minimizer is c soft-thresholded at the level whose clipped
/// magnitudes min(level, |c_i|) have l2 norm equal to the radius. The level
/// is found by bisection.
SpectralVector l1_min_orthonormal(const L1Problem& p);

/// Same problem for any operator with orthonormal rows (full or partial
/// DCT), solved by ADMM: l1 proximal step alternating with projection onto
/// {z : ||A z - y||_2 <= radius}. Returns the last projected iterate, which
/// is feasible; `converged` is false when max_iters ran out.
L1Result l1_min_general(const L1Problem& p);

/// Shrinkage threshold lambda* with ||min(lambda*, |c|)||_2 = radius.
double shrinkage_threshold(const Vector& c, double radius);

/// Constraint radius of an l1 action: a2 -> tau eta', a3 -> eta,
/// a4 -> sqrt(n) eta''. CoSaMP has no radius and is rejected.
double action_radius(Action action, const FeedbackConfig& cfg, std::size_t n);

struct BoundReport {
  double empirical_l2_error = 0.0;
  double empirical_l1_error = 0.0;
  double budget = 0.0;
  double sigma_k_l1 = 0.0;
  std::optional<double> ratio;  // l2 error / budget, when budget > 0
};

BoundReport check_bound(const SpectralVector& clean, const SpectralVector& recovered, std::size_t k,
                        double budget);

nlohmann::json to_json(const BoundReport& r);

}  // namespace cad
