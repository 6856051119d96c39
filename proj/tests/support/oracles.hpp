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

// Independent reference implementations used only by the tests. None of
// these call into the library's numerical routines.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <numeric>
#include <vector>

#include <Eigen/Core>

namespace cad::testing {

/// Orthonormal DCT-II analysis entry from the cosine formula, in long double.
inline long double dct_entry(std::size_t n, std::size_t k, std::size_t i) {
  const long double pi = std::numbers::pi_v<long double>;
  const long double scale = k == 0 ? std::sqrt(1.0L / n) : std::sqrt(2.0L / n);
  return scale * std::cos(pi * (2.0L * i + 1.0L) * k / (2.0L * n));
}

/// Calls fn(mask) for every subset of {0..n-1} of size k.
template <typename Fn>
void for_each_subset(std::size_t n, std::size_t k, Fn&& fn) {
  std::vector<bool> mask(n, false);
  std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(k), true);
  // prev_permutation walks all arrangements of k trues in lexicographic order.
  do {
    fn(mask);
  } while (std::prev_permutation(mask.begin(), mask.end()));
}

/// min over k-sparse z of ||c - z||_p (p = 1 or 2), by support enumeration.
inline double brute_best_k_term(const Eigen::VectorXd& c, std::size_t k, int p) {
  const auto n = static_cast<std::size_t>(c.size());
  double best = std::numeric_limits<double>::infinity();
  for_each_subset(n, std::min(k, n), [&](const std::vector<bool>& keep) {
    double err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!keep[i]) err += p == 1 ? std::abs(c[i]) : c[i] * c[i];
    }
    best = std::min(best, p == 1 ? err : std::sqrt(err));
  });
  return best;
}

/// Optimal value of min ||z||_1 s.t. ||z - c||_2 <= r by enumerating the
/// support S of the minimizer. For a fixed S with sign pattern sign(c_S), the
/// best feasible point moves c_S by a common step rho toward the origin,
/// rho = sqrt(r^2 - ||c off S||^2) / sqrt(|S|). Every valid candidate is
/// feasible and the true support yields the optimum.
inline double l1_ball_oracle(const Eigen::VectorXd& c, double r) {
  const auto n = static_cast<std::size_t>(c.size());
  if (c.norm() <= r) return 0.0;
  long double best = std::numeric_limits<long double>::infinity();
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << n); ++mask) {
    long double off = 0.0L, on_l1 = 0.0L;
    std::size_t size = 0;
    long double min_on = std::numeric_limits<long double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const long double a = std::abs(static_cast<long double>(c[i]));
      if (mask >> i & 1U) {
        on_l1 += a;
        ++size;
        min_on = std::min(min_on, a);
      } else {
        off += a * a;
      }
    }
    const long double slack = static_cast<long double>(r) * r - off;
    if (slack < 0.0L) continue;
    const long double rho = std::sqrt(slack / size);
    if (rho > min_on) continue;  // sign constraint violated; another support does better
    best = std::min(best, on_l1 - rho * size);
  }
  return static_cast<double>(best);
}

/// Mixture-softmax probabilities in long double.
inline std::array<long double, 4> exp_weight_probs(const std::array<double, 4>& scores, double gamma,
                                                   double sigma) {
  std::array<long double, 4> w{};
  long double total = 0.0L;
  for (std::size_t i = 0; i < 4; ++i) {
    w[i] = std::exp(static_cast<long double>(sigma) * scores[i]);
    total += w[i];
  }
  for (auto& x : w) x = (1.0L - gamma) * x / total + static_cast<long double>(gamma) / 4.0L;
  return w;
}

}  // namespace cad::testing
