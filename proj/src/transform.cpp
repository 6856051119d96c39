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

#include "cad/transform.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <string>

#include <Eigen/QR>

namespace cad {

namespace {

// Full synthesis matrices are shared between operators of the same size.
std::shared_ptr<const Matrix> cached_synthesis(Index n) {
  static std::mutex mutex;
  static std::map<Index, std::shared_ptr<const Matrix>> cache;
  std::lock_guard lock(mutex);
  auto& slot = cache[n];
  if (!slot) {
    slot = std::make_shared<const Matrix>(dct_analysis_matrix(n).transpose());
  }
  return slot;
}

void require_length(Index got, Index want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) +
                         ", got " + std::to_string(got));
  }
}

}  // namespace

void SparsityBudget::validate(std::size_t n) const {
  if (k < 1 || k > n) {
    throw std::invalid_argument("sparsity k must lie in [1, N]");
  }
  if (tau > n) {
    throw std::invalid_argument("attack sparsity tau must not exceed N");
  }
}

Matrix dct_analysis_matrix(Index n) {
  if (n < 1) {
    throw std::invalid_argument("transform length must be positive");
  }
  Matrix f(n, n);
  const double dc = std::sqrt(1.0 / static_cast<double>(n));
  const double ac = std::sqrt(2.0 / static_cast<double>(n));
  const Index period = 4 * n;
  for (Index j = 0; j < n; ++j) {
    const double scale = j == 0 ? dc : ac;
    for (Index i = 0; i < n; ++i) {
      // Reduce the phase exactly in integers before taking the cosine.
      const Index phase = ((2 * i + 1) * j) % period;
      f(j, i) = scale * std::cos(std::numbers::pi * static_cast<double>(phase) /
                                 static_cast<double>(2 * n));
    }
  }
  return f;
}

SensingOperator::SensingOperator(Index n, std::vector<Index> rows, bool full)
    : n_(n), full_(full), row_index_(std::move(rows)) {
  auto full_matrix = cached_synthesis(n);
  if (full_) {
    synthesis_ = std::move(full_matrix);
    return;
  }
  auto partial = std::make_shared<Matrix>(static_cast<Index>(row_index_.size()), n);
  for (std::size_t r = 0; r < row_index_.size(); ++r) {
    partial->row(static_cast<Index>(r)) = full_matrix->row(row_index_[r]);
  }
  synthesis_ = std::move(partial);
}

SensingOperator SensingOperator::dct(Index n) {
  if (n < 1) {
    throw std::invalid_argument("transform length must be positive");
  }
  std::vector<Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Index{0});
  return SensingOperator(n, std::move(rows), true);
}

SensingOperator SensingOperator::partial_dct(Index n, std::vector<Index> rows) {
  if (n < 1) {
    throw std::invalid_argument("transform length must be positive");
  }
  if (rows.empty()) {
    throw std::invalid_argument("partial operator needs at least one row");
  }
  std::vector<Index> sorted = rows;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw std::invalid_argument("row subset contains duplicates");
  }
  if (sorted.front() < 0 || sorted.back() >= n) {
    throw std::invalid_argument("row index out of range");
  }
  const bool full = static_cast<Index>(rows.size()) == n && rows == sorted;
  return SensingOperator(n, std::move(rows), full);
}

Vector SensingOperator::apply(const Vector& c) const {
  require_length(c.size(), n_, "synthesize");
  return matrix() * c;
}

Vector SensingOperator::adjoint(const Vector& s) const {
  require_length(s.size(), rows(), "analyze");
  return matrix().transpose() * s;
}

Vector SensingOperator::least_squares(std::span<const Index> support, const Vector& y) const {
  require_length(y.size(), rows(), "least squares");
  const auto cols = static_cast<Index>(support.size());
  Vector b(cols);
  if (cols == 0) {
    return b;
  }
  if (full_) {
    // Orthonormal columns: the least-squares solution is A_R^T y.
    for (Index r = 0; r < cols; ++r) {
      b[r] = matrix().col(support[static_cast<std::size_t>(r)]).dot(y);
    }
    return b;
  }
  Matrix sub(rows(), cols);
  for (Index r = 0; r < cols; ++r) {
    sub.col(r) = matrix().col(support[static_cast<std::size_t>(r)]);
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(sub);
  b = cod.solve(y);
  return b;
}

SpectralVector analyze(const Signal& s, const SensingOperator& op) {
  return SpectralVector(op.adjoint(s.values));
}

Signal synthesize(const SpectralVector& c, const SensingOperator& op) {
  return Signal(op.apply(c.coeffs));
}

std::vector<Index> top_k_indices(const Vector& c, std::size_t k) {
  const auto n = static_cast<std::size_t>(c.size());
  k = std::min(k, n);
  std::vector<Index> idx(n);
  std::iota(idx.begin(), idx.end(), Index{0});
  auto larger = [&c](Index a, Index b) {
    const double ma = std::abs(c[a]);
    const double mb = std::abs(c[b]);
    return ma > mb || (ma == mb && a < b);
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), larger);
  idx.resize(k);
  return idx;
}

SpectralVector top_k(const SpectralVector& c, std::size_t k) {
  SpectralVector out = SpectralVector::zeros(c.size());
  for (Index i : top_k_indices(c.coeffs, k)) {
    out.coeffs[i] = c.coeffs[i];
  }
  return out;
}

double best_k_term_error(const SpectralVector& c, std::size_t k) {
  return (c.coeffs - top_k(c, k).coeffs).lpNorm<1>();
}

std::size_t count_above(const Vector& v, double threshold) {
  return static_cast<std::size_t>((v.array().abs() > threshold).count());
}

}  // namespace cad
