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

#include "cad/action.hpp"
#include "cad/random.hpp"

namespace cad {

struct BanditParams {
  double gamma = 0.07;   // exploration rate
  double sigma = 1.01;   // softmax temperature
  double lambda = 1.25;  // reward scale

  /// gamma in [0, 1), sigma > 0, lambda > 0. CadConfig additionally
  /// rejects gamma == 0.
  void validate() const;
};

struct BanditState {
  std::array<double, kActionCount> scores{};
  BanditParams params;
  std::size_t t = 0;

  void validate() const;
};

struct ActionDistribution {
  std::array<double, kActionCount> probs{};

  double operator[](Action a) const { return probs[index_of(a)]; }
  double max() const;
};

/// p_i = (1 - gamma) softmax(sigma S)_i + gamma / 4, evaluated with the
/// maximum score subtracted inside the exponentials.
ActionDistribution probabilities(const BanditState& state);

/// Draws one action from `dist` using a single uniform variate from `rng`.
Action sample_action(const ActionDistribution& dist, Rng& rng);

inline constexpr double kPenaltyClamp = 1e-6;

struct RewardValue {
  double value = 0.0;
  bool clamped = false;  // penalty hit p_chosen == 1
};

/// Reward for the chosen action: lambda / p on positive feedback,
/// -1 / (1 - p) otherwise. At p == 1 the penalty is -1 / kPenaltyClamp.
RewardValue reward(bool feedback, double p_chosen, double lambda);

/// Per-action rewards for one round; unchosen actions receive 0.
std::array<double, kActionCount> reward_vector(Action chosen, bool feedback,
                                               const ActionDistribution& dist, double lambda);

/// Adds r to the chosen action's score and advances t.
BanditState update(const BanditState& state, Action chosen, double r);

}  // namespace cad
