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
#include <filesystem>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "cad/action.hpp"
#include "cad/bandit.hpp"
#include "cad/feedback_config.hpp"
#include "cad/transform.hpp"

namespace cad {

/// v = y - A x.
Signal residual(const Signal& y, const SpectralVector& estimate, const SensingOperator& op);

/// Mean and covariance of clean-image residuals, with the Cholesky factor of
/// (C + ridge I) computed once at construction.
class CleanStats {
 public:
  /// Throws NumericalError naming the first non-positive leading minor when
  /// C + ridge I is not positive definite.
  CleanStats(Vector mean, Matrix covariance, double ridge, std::size_t source_count = 0);

  Index n() const { return mean_.size(); }
  const Vector& mean() const { return mean_; }
  const Matrix& covariance() const { return covariance_; }
  double ridge() const { return ridge_; }
  std::size_t source_count() const { return source_count_; }

  /// sqrt((v - m)^T (C + ridge I)^-1 (v - m)) via a triangular solve.
  double mahalanobis(const Vector& v) const;

 private:
  Vector mean_;
  Matrix covariance_;
  double ridge_ = 0.0;
  std::size_t source_count_ = 0;
  Matrix lower_;  // L with L L^T = C + ridge I
};

double mahalanobis(const Signal& v, const CleanStats& stats);

inline constexpr double kRidgeFloor = 1e-12;

/// Runs n_cosamp CoSaMP iterations on every clean signal and takes the sample
/// mean and covariance of the residuals. Without an explicit ridge the
/// default is max(1e-6 trace(C) / N, kRidgeFloor).
CleanStats estimate_clean_stats(const std::vector<Signal>& clean_signals, const SensingOperator& op,
                                std::size_t k, std::size_t n_cosamp,
                                std::optional<double> ridge = std::nullopt);

/// Binary layout: little-endian float64 mean, then the row-major covariance.
/// Sidecar `<path>.json`: {"n", "ridge", "source_count"}.
void save_clean_stats(const std::filesystem::path& path, const CleanStats& stats);
CleanStats load_clean_stats(const std::filesystem::path& path);

struct ResidualNorms {
  double l2 = 0.0;
  double linf = 0.0;
  std::size_t count = 0;  // entries with magnitude above count_threshold
};

ResidualNorms residual_norms(const Signal& v, double count_threshold);

struct FeedbackEval {
  bool bit = false;
  ResidualNorms norms;
  std::optional<double> md;  // only evaluated for a1 with stats present
};

/// Residual predicate of `action`. The a1 Mahalanobis branch is false when
/// `stats` is null.
FeedbackEval evaluate_feedback(Action action, const Signal& v, const FeedbackConfig& cfg,
                               const CleanStats* stats);

bool feedback_bit(Action action, const Signal& v, const FeedbackConfig& cfg, const CleanStats* stats);

/// max_i p_i > delta_prob or ||v||_2 < delta_res.
bool should_stop(const ActionDistribution& dist, const Signal& v, const FeedbackConfig& cfg);

}  // namespace cad
