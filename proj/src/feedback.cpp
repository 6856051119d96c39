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

#include "cad/feedback.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "cad/io.hpp"
#include "cad/recovery.hpp"

namespace cad {

namespace fs = std::filesystem;

void FeedbackConfig::validate() const {
  for (double v : {alpha, beta, m_low, theta, count_threshold, eta, eta_prime, eta_dprime, delta_res}) {
    if (!(v >= 0.0)) {
      throw std::invalid_argument("feedback thresholds must be non-negative");
    }
  }
  if (!(delta_prob > 0.0 && delta_prob <= 1.0)) {
    throw std::invalid_argument("stopping probability must lie in (0, 1]");
  }
  if (t_max < 1) {
    throw std::invalid_argument("iteration cap T must be at least 1");
  }
}

Signal residual(const Signal& y, const SpectralVector& estimate, const SensingOperator& op) {
  if (y.size() != op.rows()) {
    throw DimensionError("residual: observation length does not match the operator");
  }
  return Signal(y.values - op.apply(estimate.coeffs));
}

namespace {

// Index (1-based) of the first leading minor of `a` that is not positive.
Index failing_minor(const Matrix& a) {
  const Index n = a.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    const double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0)) {
      return j + 1;
    }
    l(j, j) = std::sqrt(d);
    for (Index i = j + 1; i < n; ++i) {
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / l(j, j);
    }
  }
  return n;
}

}  // namespace

CleanStats::CleanStats(Vector mean, Matrix covariance, double ridge, std::size_t source_count)
    : mean_(std::move(mean)),
      covariance_(std::move(covariance)),
      ridge_(ridge),
      source_count_(source_count) {
  const Index n = mean_.size();
  if (n < 1 || covariance_.rows() != n || covariance_.cols() != n) {
    throw DimensionError("covariance must be N x N for a length-N mean");
  }
  if (!(ridge_ >= 0.0) || !std::isfinite(ridge_)) {
    throw std::invalid_argument("ridge must be finite and non-negative");
  }
  const double asym = (covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-9 * std::max(1.0, covariance_.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("covariance is not symmetric");
  }
  Matrix regularized = covariance_;
  regularized.diagonal().array() += ridge_;
  Eigen::LLT<Matrix> llt(regularized);
  if (llt.info() != Eigen::Success) {
    throw NumericalError("covariance + ridge is not positive definite: leading minor " +
                         std::to_string(failing_minor(regularized)) + " is not positive");
  }
  lower_ = llt.matrixL();
}

double CleanStats::mahalanobis(const Vector& v) const {
  if (v.size() != n()) {
    throw DimensionError("mahalanobis: residual length does not match the statistics");
  }
  const Vector w = lower_.triangularView<Eigen::Lower>().solve(v - mean_);
  return w.norm();
}

double mahalanobis(const Signal& v, const CleanStats& stats) {
  return stats.mahalanobis(v.values);
}

CleanStats estimate_clean_stats(const std::vector<Signal>& clean_signals, const SensingOperator& op,
                                std::size_t k, std::size_t n_cosamp, std::optional<double> ridge) {
  if (clean_signals.size() < 2) {
    throw std::invalid_argument("clean statistics need at least two signals");
  }
  const Index n = op.rows();
  const auto count = static_cast<Index>(clean_signals.size());
  if (ridge && *ridge <= 0.0 && count < n) {
    throw NumericalError("sample covariance is singular (fewer samples than dimensions) and no ridge was given");
  }
  Matrix residuals(count, n);
  for (Index s = 0; s < count; ++s) {
    const Signal& y = clean_signals[static_cast<std::size_t>(s)];
    residuals.row(s) = cosamp_run(y, op, k, n_cosamp).final.residual.values.transpose();
  }
  const Vector mean = residuals.colwise().mean().transpose();
  const Matrix centered = residuals.rowwise() - mean.transpose();
  Matrix cov = (centered.transpose() * centered) / static_cast<double>(count - 1);
  cov = 0.5 * (cov + cov.transpose());
  const double r = ridge ? *ridge : std::max(1e-6 * cov.trace() / static_cast<double>(n), kRidgeFloor);
  return CleanStats(mean, std::move(cov), r, clean_signals.size());
}

void save_clean_stats(const fs::path& path, const CleanStats& stats) {
  static_assert(std::endian::native == std::endian::little, "stats files are little-endian");
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write " + path.string());
  }
  out.write(reinterpret_cast<const char*>(stats.mean().data()),
            static_cast<std::streamsize>(stats.n() * sizeof(double)));
  // Eigen is column-major; the symmetric matrix's transpose is identical but
  // write it row by row anyway so the layout never depends on that.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = stats.covariance();
  out.write(reinterpret_cast<const char*>(rm.data()),
            static_cast<std::streamsize>(rm.size() * sizeof(double)));
  if (!out) {
    throw IoError("write failed: " + path.string());
  }
  std::ofstream meta(path.string() + ".json");
  meta << nlohmann::json{{"n", stats.n()}, {"ridge", stats.ridge()}, {"source_count", stats.source_count()}}
              .dump()
       << '\n';
  if (!meta) {
    throw IoError("write failed: " + path.string() + ".json");
  }
}

CleanStats load_clean_stats(const fs::path& path) {
  nlohmann::json meta;
  {
    std::ifstream in(path.string() + ".json");
    if (!in) {
      throw IoError("missing sidecar " + path.string() + ".json");
    }
    try {
      in >> meta;
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ".json: " + e.what());
    }
  }
  Index n = 0;
  double ridge = 0.0;
  std::size_t sources = 0;
  try {
    n = meta.at("n").get<Index>();
    ridge = meta.at("ridge").get<double>();
    sources = meta.value("source_count", std::size_t{0});
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ".json: " + e.what());
  }
  if (n < 1) {
    throw IoError(path.string() + ".json: non-positive n");
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open " + path.string());
  }
  const std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  const auto expect = static_cast<std::size_t>(n + n * n) * sizeof(double);
  if (bytes.size() != expect) {
    throw IoError(path.string() + ": expected " + std::to_string(expect) + " bytes, found " +
                  std::to_string(bytes.size()));
  }
  Vector mean(n);
  std::memcpy(mean.data(), bytes.data(), static_cast<std::size_t>(n) * sizeof(double));
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(n, n);
  std::memcpy(rm.data(), bytes.data() + static_cast<std::size_t>(n) * sizeof(double),
              static_cast<std::size_t>(n * n) * sizeof(double));
  return CleanStats(std::move(mean), Matrix(rm), ridge, sources);
}

ResidualNorms residual_norms(const Signal& v, double count_threshold) {
  ResidualNorms r;
  r.l2 = v.values.norm();
  r.linf = v.size() > 0 ? v.values.lpNorm<Eigen::Infinity>() : 0.0;
  r.count = count_above(v.values, count_threshold);
  return r;
}

FeedbackEval evaluate_feedback(Action action, const Signal& v, const FeedbackConfig& cfg,
                               const CleanStats* stats) {
  FeedbackEval eval;
  eval.norms = residual_norms(v, cfg.count_threshold);
  const ResidualNorms& r = eval.norms;
  const bool dense_enough = !cfg.l0_count_gate || r.count >= *cfg.l0_count_gate;
  switch (action) {
    case Action::kCosamp: {
      if (stats != nullptr) {
        eval.md = mahalanobis(v, *stats);
      }
      const bool small_l2 = r.l2 < cfg.alpha;
      const bool md_ok = eval.md && *eval.md < cfg.theta;
      const bool small_linf = r.linf < cfg.m_low;
      eval.bit = cfg.a1_precedence == A1Precedence::kOrFirst ? small_l2 || (md_ok && small_linf)
                                                             : (small_l2 || md_ok) && small_linf;
      break;
    }
    case Action::kL1Sparse:
      eval.bit = r.l2 > cfg.alpha && r.count < cfg.tau;
      break;
    case Action::kL1Energy:
      eval.bit = r.l2 > cfg.alpha && cfg.m_low < r.linf && r.linf < cfg.beta && dense_enough;
      break;
    case Action::kL1Dense:
      eval.bit = r.l2 > cfg.alpha && r.linf > cfg.beta && dense_enough;
      break;
  }
  return eval;
}

bool feedback_bit(Action action, const Signal& v, const FeedbackConfig& cfg, const CleanStats* stats) {
  return evaluate_feedback(action, v, cfg, stats).bit;
}

bool should_stop(const ActionDistribution& dist, const Signal& v, const FeedbackConfig& cfg) {
  return dist.max() > cfg.delta_prob || v.values.norm() < cfg.delta_res;
}

}  // namespace cad
