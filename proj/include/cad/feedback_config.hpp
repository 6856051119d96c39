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

namespace cad {

/// How the a1 predicate groups its three comparisons.
enum class A1Precedence {
  kOrFirst,   // (l2 < alpha) OR (MD < theta AND linf < m)
  kAndLast,   // (l2 < alpha OR MD < theta) AND linf < m
};

/// Thresholds for the residual feedback predicates, the constraint budgets
/// of the l1 actions, and the stopping rule.
struct FeedbackConfig {
  double alpha = 8.0;
  double beta = 5.0;
  double m_low = 1.8;
  std::size_t tau = 15;
  double theta = 65.0;
  double count_threshold = 0.5;
  double eta = 0.3;
  double eta_prime = 0.15;
  double eta_dprime = 0.04;
  double delta_prob = 0.8;
  double delta_res = 2.0;
  std::size_t t_max = 50;
  // When set, a3 and a4 also require at least this many residual entries
  // above count_threshold (dense residuals; grayscale mode).
  std::optional<std::size_t> l0_count_gate;
  A1Precedence a1_precedence = A1Precedence::kOrFirst;

  void validate() const;
};

}  // namespace cad
