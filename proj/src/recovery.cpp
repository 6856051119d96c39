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

#include "cad/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cad {

namespace {

constexpr double kBisectionTolerance = 1e-9;
constexpr int kBisectionMaxSteps = 400;

Vector soft_threshold(const Vector& c, double level) {
  return c.unaryExpr([level](double v) {
    const double mag = std::abs(v) - level;
    return mag > 0.0 ? std::copysign(mag, v) : 0.0;
  });
}

double clipped_norm(const Vector& c, double level) {
  return c.array().abs().min(level).matrix().norm();
}

// Projection of w onto {z : ||A z - y||_2 <= radius}. A has orthonormal
// rows, so only the row-space component of w moves.
Vector project_feasible(const Vector& w, const SensingOperator& op, const Vector& y, double radius) {
  const Vector aw = op.apply(w);
  const Vector diff = aw - y;
  const double dist = diff.norm();
  if (dist <= radius) {
    return w;
  }
  const Vector target = y + diff * (radius / dist);
  return w + op.adjoint(target - aw);
}

}  // namespace

CosampState CosampState::initial(const Signal& y, const SensingOperator& op, std::size_t k,
                                 const std::optional<SpectralVector>& x0) {
  if (y.size() != op.rows()) {
    throw DimensionError("observation length does not match the operator");
  }
  CosampState s;
  s.estimate = x0 ? top_k(*x0, k) : SpectralVector::zeros(op.n());
  if (s.estimate.size() != op.n()) {
    throw DimensionError("initial estimate length does not match the operator");
  }
  s.residual = Signal(y.values - op.apply(s.estimate.coeffs));
  return s;
}

CosampState cosamp_step(const CosampState& state, const Signal& y, const SensingOperator& op,
                        std::size_t k) {
  if (y.size() != op.rows() || state.estimate.size() != op.n()) {
    throw DimensionError("cosamp_step operands do not match the operator");
  }
  // Identification: the 2k largest proxy entries.
  const Vector proxy = op.adjoint(state.residual.values);
  std::vector<Index> merged = top_k_indices(proxy, 2 * k);
  // Support merger with the current estimate.
  for (Index i = 0; i < state.estimate.size(); ++i) {
    if (state.estimate.coeffs[i] != 0.0) {
      merged.push_back(i);
    }
  }
  std::sort(merged.begin(), merged.end());
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());

  // Estimation on the merged columns, then pruning to k terms.
  const Vector b_support = op.least_squares(merged, y.values);
  Vector b = Vector::Zero(op.n());
  for (std::size_t r = 0; r < merged.size(); ++r) {
    b[merged[r]] = b_support[static_cast<Index>(r)];
  }

  CosampState next;
  next.estimate = top_k(SpectralVector(std::move(b)), k);
  next.residual = Signal(y.values - op.apply(next.estimate.coeffs));
  next.iteration = state.iteration + 1;
  next.merged_support = merged.size();
  return next;
}

CosampRun cosamp_run(const Signal& y, const SensingOperator& op, std::size_t k, std::size_t n_iters,
                     const std::optional<SpectralVector>& x0) {
  if (n_iters < 1) {
    throw std::invalid_argument("cosamp_run needs at least one iteration");
  }
  if (k < 1 || static_cast<Index>(k) > op.n()) {
    throw std::invalid_argument("sparsity k must lie in [1, N]");
  }
  CosampRun run;
  run.final = CosampState::initial(y, op, k, x0);
  run.history.reserve(n_iters);
  for (std::size_t t = 0; t < n_iters; ++t) {
    run.final = cosamp_step(run.final, y, op, k);
    run.history.push_back(run.final.estimate);
  }
  return run;
}

void L1Problem::validate() const {
  if (observed.size() != op.rows()) {
    throw DimensionError("observation length does not match the operator");
  }
  if (!(radius >= 0.0) || !std::isfinite(radius)) {
    throw std::invalid_argument("l1 constraint radius must be finite and non-negative");
  }
  if (!(tolerance > 0.0)) {
    throw std::invalid_argument("solver tolerance must be positive");
  }
  if (warm_start && warm_start->size() != op.n()) {
    throw DimensionError("warm start length does not match the operator");
  }
}

double shrinkage_threshold(const Vector& c, double radius) {
  if (radius <= 0.0) {
    return 0.0;
  }
  double lo = 0.0;
  double hi = c.lpNorm<Eigen::Infinity>();
  if (clipped_norm(c, hi) <= radius) {
    return hi;
  }
  // Invariant: clipped_norm(lo) <= radius < clipped_norm(hi).
  for (int step = 0; step < kBisectionMaxSteps; ++step) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) {
      break;
    }
    if (clipped_norm(c, mid) <= radius) {
      lo = mid;
      if (radius - clipped_norm(c, lo) <= kBisectionTolerance) {
        break;
      }
    } else {
      hi = mid;
    }
  }
  return lo;
}

SpectralVector l1_min_orthonormal(const L1Problem& p) {
  p.validate();
  if (!p.op.is_full()) {
    throw std::invalid_argument("l1_min_orthonormal requires the full orthonormal operator");
  }
  const Vector c = p.op.adjoint(p.observed.values);
  if (p.radius == 0.0) {
    return SpectralVector(c);
  }
  if (p.radius >= c.norm()) {
    return SpectralVector::zeros(c.size());
  }
  return SpectralVector(soft_threshold(c, shrinkage_threshold(c, p.radius)));
}

constexpr std::size_t kRhoAdaptIters = 200;

L1Result l1_min_general(const L1Problem& p) {
  p.validate();
  const Vector& y = p.observed.values;
  const Index n = p.op.n();

  L1Result result;
  if (y.norm() <= p.radius) {
    result.solution = SpectralVector::zeros(n);
    result.iterations = 0;
    return result;
  }

  Vector z = p.warm_start ? project_feasible(p.warm_start->coeffs, p.op, y, p.radius)
                          : project_feasible(p.op.adjoint(y), p.op, y, p.radius);
  Vector u = Vector::Zero(n);
  Vector x = z;
  // Penalty scaled to the data so the l1 threshold 1/rho is comparable to
  // typical coefficient magnitudes.
  const double scale = std::max(p.op.adjoint(y).lpNorm<Eigen::Infinity>(), 1e-12);
  double rho = 10.0 / scale;

  result.converged = false;
  std::size_t it = 0;
  for (; it < p.max_iters; ++it) {
    x = soft_threshold(z - u, 1.0 / rho);
    const Vector z_prev = z;
    z = project_feasible(x + u, p.op, y, p.radius);
    u += x - z;

    const double primal = (x - z).norm();
    const double dual = rho * (z - z_prev).norm();
    const double step = (z - z_prev).norm();
    // The distance to the optimum runs a few times the last step, so the
    // step test uses a tenth of the tolerance.
    if (std::max(primal, step) < 0.1 * p.tolerance) {
      result.converged = true;
      ++it;
      break;
    }
    // Residual balancing keeps primal and dual progress comparable. The
    // penalty is frozen later on so the plain ADMM convergence result applies.
    if (it >= kRhoAdaptIters) {
      continue;
    }
    if (primal > 10.0 * dual) {
      rho *= 2.0;
      u /= 2.0;
    } else if (dual > 10.0 * primal) {
      rho /= 2.0;
      u *= 2.0;
    }
  }
  result.iterations = it;
  result.feasibility_violation = std::max(0.0, (p.op.apply(z) - y).norm() - p.radius);
  result.solution = SpectralVector(std::move(z));
  return result;
}

double action_radius(Action action, const FeedbackConfig& cfg, std::size_t n) {
  switch (action) {
    case Action::kL1Sparse:
      return static_cast<double>(cfg.tau) * cfg.eta_prime;
    case Action::kL1Energy:
      return cfg.eta;
    case Action::kL1Dense:
      return std::sqrt(static_cast<double>(n)) * cfg.eta_dprime;
    case Action::kCosamp:
      break;
  }
  throw std::invalid_argument("CoSaMP has no constraint radius");
}

BoundReport check_bound(const SpectralVector& clean, const SpectralVector& recovered, std::size_t k,
                        double budget) {
  if (clean.size() != recovered.size()) {
    throw DimensionError("check_bound operands differ in length");
  }
  BoundReport r;
  const Vector diff = clean.coeffs - recovered.coeffs;
  r.empirical_l2_error = diff.norm();
  r.empirical_l1_error = diff.lpNorm<1>();
  r.budget = budget;
  r.sigma_k_l1 = best_k_term_error(clean, k);
  if (budget > 0.0) {
    r.ratio = r.empirical_l2_error / budget;
  }
  return r;
}

nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json j = {
      {"empirical_l2_error", r.empirical_l2_error},
      {"empirical_l1_error", r.empirical_l1_error},
      {"budget", r.budget},
      {"sigma_k_l1", r.sigma_k_l1},
  };
  j["ratio"] = r.ratio ? nlohmann::json(*r.ratio) : nlohmann::json(nullptr);
  return j;
}

}  // namespace cad
