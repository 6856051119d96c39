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

#include "cad/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

#include "cad/random.hpp"

namespace cad {

namespace {

double random_sign(Rng& rng) {
  return std::bernoulli_distribution(0.5)(rng) ? 1.0 : -1.0;
}

// Uniform random subset of `count` indices drawn from [0, pool).
std::vector<Index> random_support(std::size_t pool, std::size_t count, Rng& rng) {
  std::vector<Index> all(pool);
  std::iota(all.begin(), all.end(), Index{0});
  std::vector<Index> picked;
  picked.reserve(count);
  std::sample(all.begin(), all.end(), std::back_inserter(picked), count, rng);
  return picked;
}

void check_budget(double value, const char* name) {
  if (!std::isfinite(value) || value < 0.0) {
    throw std::invalid_argument(std::string("attack budget ") + name +
                                " must be finite and non-negative");
  }
}

Vector l0_entries(std::size_t n, const AttackSpec& spec, Rng& rng) {
  Vector e = Vector::Zero(static_cast<Index>(n));
  std::size_t pool = n;
  if (spec.low_freq_bias) {
    pool = std::max(spec.tau, (n + 3) / 4);
  }
  std::uniform_real_distribution<double> mag(0.5 * spec.eta_prime, spec.eta_prime);
  for (Index i : random_support(pool, spec.tau, rng)) {
    e[i] = random_sign(rng) * mag(rng);
  }
  return e;
}

}  // namespace

std::string_view to_string(AttackFamily family) {
  switch (family) {
    case AttackFamily::kNone: return "none";
    case AttackFamily::kL0: return "l0";
    case AttackFamily::kL1: return "l1";
    case AttackFamily::kL2: return "l2";
    case AttackFamily::kLinf: return "linf";
    case AttackFamily::kGradientProxy: return "gradient_proxy";
  }
  return "unknown";
}

AttackFamily parse_attack_family(std::string_view name) {
  if (name == "none") return AttackFamily::kNone;
  if (name == "l0") return AttackFamily::kL0;
  if (name == "l1") return AttackFamily::kL1;
  if (name == "l2") return AttackFamily::kL2;
  if (name == "linf") return AttackFamily::kLinf;
  if (name == "gradient_proxy") return AttackFamily::kGradientProxy;
  throw std::invalid_argument("unknown attack family: " + std::string(name));
}

void AttackSpec::validate(std::size_t n) const {
  check_budget(eta, "eta");
  check_budget(eta_prime, "eta_prime");
  check_budget(eta_dprime, "eta_dprime");
  if (tau > n) {
    throw std::invalid_argument("attack sparsity tau exceeds signal length");
  }
}

SpectralVector make_clean_sparse(std::size_t n, std::size_t k, double lo, double hi,
                                 std::uint64_t seed) {
  if (k < 1 || k > n) {
    throw std::invalid_argument("clean sparsity must satisfy 1 <= k <= n");
  }
  if (!(lo <= hi) || lo < 0.0 || !std::isfinite(hi)) {
    throw std::invalid_argument("empty amplitude range");
  }
  Rng rng(seed);
  std::uniform_real_distribution<double> mag(lo, hi);
  Vector x = Vector::Zero(static_cast<Index>(n));
  for (Index i : random_support(n, k, rng)) {
    // uniform_real_distribution needs lo < hi; a degenerate range is fixed.
    const double m = lo == hi ? lo : mag(rng);
    x[i] = random_sign(rng) * m;
  }
  return SpectralVector(std::move(x));
}

SpectralVector make_compressible(std::size_t n, std::size_t k, double lo, double hi,
                                 double tail_sigma, std::uint64_t seed) {
  SpectralVector x = make_clean_sparse(n, k, lo, hi, seed);
  if (tail_sigma <= 0.0) {
    return x;
  }
  Rng rng(derive_seed(seed, 1));
  std::normal_distribution<double> tail(0.0, tail_sigma);
  for (Index i = 0; i < x.size(); ++i) {
    if (x.coeffs[i] == 0.0) {
      x.coeffs[i] = tail(rng);
    }
  }
  return x;
}

AdversarialInstance perturb(const SpectralVector& clean, const AttackSpec& spec,
                            const SensingOperator& op) {
  const auto n = static_cast<std::size_t>(clean.size());
  if (clean.size() != op.n()) {
    throw DimensionError("clean spectrum length does not match the operator");
  }
  spec.validate(n);

  Rng rng(spec.seed);
  Vector e = Vector::Zero(clean.size());
  switch (spec.family) {
    case AttackFamily::kNone:
      break;
    case AttackFamily::kL0:
      if (spec.domain == AttackDomain::kPixel) {
        const Vector beta = l0_entries(n, spec, rng);
        e = SensingOperator::dct(clean.size()).adjoint(beta);
      } else {
        e = l0_entries(n, spec, rng);
      }
      break;
    case AttackFamily::kL1: {
      if (spec.eta > 0.0) {
        std::exponential_distribution<double> w(1.0);
        for (Index i = 0; i < e.size(); ++i) {
          e[i] = random_sign(rng) * w(rng);
        }
        e *= spec.eta / e.lpNorm<1>();
      }
      break;
    }
    case AttackFamily::kL2: {
      if (spec.eta > 0.0) {
        std::normal_distribution<double> g(0.0, 1.0);
        for (Index i = 0; i < e.size(); ++i) {
          e[i] = g(rng);
        }
        e *= spec.eta / e.norm();
      }
      break;
    }
    case AttackFamily::kLinf: {
      std::uniform_real_distribution<double> u(-spec.eta_dprime, spec.eta_dprime);
      for (Index i = 0; i < e.size(); ++i) {
        e[i] = spec.eta_dprime > 0.0 ? u(rng) : 0.0;
      }
      std::uniform_int_distribution<Index> pick(0, e.size() - 1);
      const Index at = pick(rng);
      e[at] = random_sign(rng) * spec.eta_dprime;
      break;
    }
    case AttackFamily::kGradientProxy:
      for (Index i = 0; i < e.size(); ++i) {
        e[i] = random_sign(rng) * spec.eta_dprime;
      }
      break;
  }

  AdversarialInstance inst;
  inst.clean_spectral = clean;
  inst.perturbation = SpectralVector(e);
  inst.spec = spec;
  inst.observed = synthesize(SpectralVector(clean.coeffs + e), op);
  if (spec.clip) {
    if (!op.is_full()) {
      throw std::invalid_argument("clipping requires the full operator");
    }
    inst.observed.values = inst.observed.values.cwiseMax(0.0).cwiseMin(1.0);
    inst.perturbation.coeffs = op.adjoint(inst.observed.values) - clean.coeffs;
  }
  return inst;
}

bool within_budget(const SpectralVector& e, const AttackSpec& spec, double tol) {
  const Vector& v = e.coeffs;
  switch (spec.family) {
    case AttackFamily::kNone:
      return v.isZero(0.0);
    case AttackFamily::kL0:
      if (spec.domain == AttackDomain::kPixel) {
        return v.norm() <= static_cast<double>(spec.tau) * spec.eta_prime + tol;
      }
      return count_above(v, 0.0) <= spec.tau && v.lpNorm<Eigen::Infinity>() <= spec.eta_prime + tol;
    case AttackFamily::kL1:
      return v.lpNorm<1>() <= spec.eta + tol;
    case AttackFamily::kL2:
      return v.norm() <= spec.eta + tol;
    case AttackFamily::kLinf:
    case AttackFamily::kGradientProxy:
      return v.lpNorm<Eigen::Infinity>() <= spec.eta_dprime + tol;
  }
  return false;
}

namespace {

nlohmann::json vector_json(const Vector& v) {
  return nlohmann::json(std::vector<double>(v.data(), v.data() + v.size()));
}

Vector vector_from_json(const nlohmann::json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

}  // namespace

nlohmann::json to_json(const AttackSpec& spec) {
  return {
      {"family", std::string(to_string(spec.family))},
      {"eta", spec.eta},
      {"eta_prime", spec.eta_prime},
      {"eta_dprime", spec.eta_dprime},
      {"tau", spec.tau},
      {"seed", spec.seed},
      {"low_freq_bias", spec.low_freq_bias},
      {"domain", spec.domain == AttackDomain::kPixel ? "pixel" : "spectral"},
      {"clip", spec.clip},
  };
}

AttackSpec attack_spec_from_json(const nlohmann::json& j) {
  AttackSpec spec;
  spec.family = parse_attack_family(j.at("family").get<std::string>());
  spec.eta = j.value("eta", 0.0);
  spec.eta_prime = j.value("eta_prime", 0.0);
  spec.eta_dprime = j.value("eta_dprime", 0.0);
  spec.tau = j.value("tau", std::size_t{0});
  spec.seed = j.value("seed", std::uint64_t{0});
  spec.low_freq_bias = j.value("low_freq_bias", false);
  const auto domain = j.value("domain", std::string("spectral"));
  if (domain == "pixel") {
    spec.domain = AttackDomain::kPixel;
  } else if (domain != "spectral") {
    throw std::invalid_argument("unknown attack domain: " + domain);
  }
  spec.clip = j.value("clip", false);
  return spec;
}

nlohmann::json to_json(const AdversarialInstance& inst) {
  return {
      {"n", inst.clean_spectral.size()},
      {"spec", to_json(inst.spec)},
      {"clean_spectral", vector_json(inst.clean_spectral.coeffs)},
      {"perturbation", vector_json(inst.perturbation.coeffs)},
      {"observed", vector_json(inst.observed.values)},
  };
}

AdversarialInstance adversarial_instance_from_json(const nlohmann::json& j) {
  AdversarialInstance inst;
  inst.spec = attack_spec_from_json(j.at("spec"));
  inst.clean_spectral = SpectralVector(vector_from_json(j.at("clean_spectral")));
  inst.perturbation = SpectralVector(vector_from_json(j.at("perturbation")));
  inst.observed = Signal(vector_from_json(j.at("observed")));
  const auto n = j.at("n").get<Index>();
  if (inst.clean_spectral.size() != n || inst.perturbation.size() != n) {
    throw DimensionError("instance vectors disagree with declared length");
  }
  return inst;
}

}  // namespace cad
