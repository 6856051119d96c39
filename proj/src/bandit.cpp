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

#include "cad/bandit.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace cad {

void BanditParams::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("gamma must lie in [0, 1)");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("sigma must be positive");
  }
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("lambda must be positive");
  }
}

void BanditState::validate() const {
  params.validate();
  for (double s : scores) {
    if (!std::isfinite(s)) {
      throw std::invalid_argument("bandit scores must be finite");
    }
  }
}

double ActionDistribution::max() const {
  return *std::max_element(probs.begin(), probs.end());
}

ActionDistribution probabilities(const BanditState& state) {
  state.validate();
  const double gamma = state.params.gamma;
  const double top = *std::max_element(state.scores.begin(), state.scores.end());
  std::array<double, kActionCount> w{};
  double total = 0.0;
  for (std::size_t i = 0; i < kActionCount; ++i) {
    w[i] = std::exp(state.params.sigma * (state.scores[i] - top));
    total += w[i];
  }
  ActionDistribution dist;
  for (std::size_t i = 0; i < kActionCount; ++i) {
    dist.probs[i] = (1.0 - gamma) * (w[i] / total) + gamma / static_cast<double>(kActionCount);
  }
  return dist;
}

Action sample_action(const ActionDistribution& dist, Rng& rng) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < kActionCount; ++i) {
    if (dist.probs[i] <= 0.0) {
      continue;
    }
    last_positive = i;
    cumulative += dist.probs[i];
    if (u < cumulative) {
      return static_cast<Action>(i);
    }
  }
  // Rounding left the cumulative sum just below u.
  return static_cast<Action>(last_positive);
}

RewardValue reward(bool feedback, double p_chosen, double lambda) {
  if (!(p_chosen > 0.0 && p_chosen <= 1.0)) {
    throw std::invalid_argument("chosen action probability must lie in (0, 1]");
  }
  if (feedback) {
    return {lambda / p_chosen, false};
  }
  const double gap = 1.0 - p_chosen;
  if (gap <= 0.0) {
    return {-1.0 / kPenaltyClamp, true};
  }
  return {-1.0 / gap, false};
}

std::array<double, kActionCount> reward_vector(Action chosen, bool feedback,
                                               const ActionDistribution& dist, double lambda) {
  std::array<double, kActionCount> r{};
  r[index_of(chosen)] = reward(feedback, dist[chosen], lambda).value;
  return r;
}

BanditState update(const BanditState& state, Action chosen, double r) {
  BanditState next = state;
  next.scores[index_of(chosen)] += r;
  ++next.t;
  return next;
}

}  // namespace cad
