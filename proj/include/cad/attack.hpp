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

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "cad/transform.hpp"

namespace cad {

enum class AttackFamily { kNone, kL0, kL1, kL2, kLinf, kGradientProxy };

std::string_view to_string(AttackFamily family);
/// Accepts "none", "l0", "l1", "l2", "linf", "gradient_proxy".
AttackFamily parse_attack_family(std::string_view name);

/// Where an l0 attack places its support. Pixel-domain supports model
/// JSMA-style attacks; the spectral perturbation is then F beta.
enum class AttackDomain { kSpectral, kPixel };

struct AttackSpec {
  AttackFamily family = AttackFamily::kNone;
  double eta = 0.0;         // l2 / l1 budget
  double eta_prime = 0.0;   // per-entry bound for l0
  double eta_dprime = 0.0;  // l-infinity bound
  std::size_t tau = 0;      // l0 support size
  std::uint64_t seed = 0;
  bool low_freq_bias = false;  // l0 support drawn from the lowest quarter
  AttackDomain domain = AttackDomain::kSpectral;
  bool clip = false;  // clamp observed samples to [0, 1]

  void validate(std::size_t n) const;
};

struct AdversarialInstance {
  SpectralVector clean_spectral;
  SpectralVector perturbation;
  Signal observed;
  AttackSpec spec;
};

/// Exactly-k-sparse spectrum with magnitudes uniform in [lo, hi] and random
/// signs on a uniformly random support.
SpectralVector make_clean_sparse(std::size_t n, std::size_t k, double lo, double hi,
                                 std::uint64_t seed);

/// k-sparse head as in make_clean_sparse plus an i.i.d. Gaussian tail of
/// standard deviation `tail_sigma` on the remaining entries.
SpectralVector make_compressible(std::size_t n, std::size_t k, double lo, double hi,
                                 double tail_sigma, std::uint64_t seed);

/// Draws the perturbation described by `spec` and composes
/// observed = synthesize(clean + e).
///
/// With `spec.clip` the observed samples are clamped to [0, 1] and the
/// recorded perturbation becomes analyze(observed) - clean, which no longer
/// honours the family budget exactly. Clipping requires the full operator.
AdversarialInstance perturb(const SpectralVector& clean, const AttackSpec& spec,
                            const SensingOperator& op);

/// True when `e` lies inside the budget declared by `spec` (up to `tol`).
bool within_budget(const SpectralVector& e, const AttackSpec& spec, double tol = 1e-9);

nlohmann::json to_json(const AttackSpec& spec);
AttackSpec attack_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AdversarialInstance& inst);
AdversarialInstance adversarial_instance_from_json(const nlohmann::json& j);

}  // namespace cad
