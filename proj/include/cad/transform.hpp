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
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cad {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Thrown when operand lengths disagree with an operator or with each other.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised for solver or factorization failures.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Real samples in the signal (pixel) domain.
struct Signal {
  Vector values;

  Signal() = default;
  explicit Signal(Vector v) : values(std::move(v)) {}
  static Signal zeros(Index n) { return Signal(Vector::Zero(n)); }

  Index size() const { return values.size(); }
  double operator[](Index i) const { return values[i]; }
};

/// Transform-domain coefficients (clean spectrum, perturbation, or estimate).
struct SpectralVector {
  Vector coeffs;

  SpectralVector() = default;
  explicit SpectralVector(Vector c) : coeffs(std::move(c)) {}
  static SpectralVector zeros(Index n) { return SpectralVector(Vector::Zero(n)); }

  Index size() const { return coeffs.size(); }
  double operator[](Index i) const { return coeffs[i]; }
};

struct SparsityBudget {
  std::size_t k = 1;
  std::size_t tau = 0;

  void validate(std::size_t n) const;
};

/// Orthonormal DCT-II synthesis operator A = F^-1, optionally keeping only a
/// subset of its rows (partial-DCT sensing).
///
/// The operator is immutable; copies share the dense matrix. Rows of A are
/// always orthonormal, so A A^T = I holds for every row subset.
class SensingOperator {
 public:
  /// Full square operator of dimension n.
  static SensingOperator dct(Index n);
  /// Row-subsampled operator. Rows must be distinct and in [0, n).
  static SensingOperator partial_dct(Index n, std::vector<Index> rows);

  Index n() const { return n_; }
  Index rows() const { return static_cast<Index>(row_index_.size()); }
  bool is_full() const { return full_; }
  const std::vector<Index>& row_index() const { return row_index_; }

  /// The rows() x n() synthesis matrix.
  const Matrix& matrix() const { return *synthesis_; }

  /// A c.
  Vector apply(const Vector& c) const;
  /// A^T s.
  Vector adjoint(const Vector& s) const;

  /// Minimum-norm least squares on the given columns: argmin ||A_R b - y||_2.
  /// Returns a length-|support| vector ordered like support.
  Vector least_squares(std::span<const Index> support, const Vector& y) const;

 private:
  SensingOperator(Index n, std::vector<Index> rows, bool full);

  Index n_ = 0;
  bool full_ = true;
  std::vector<Index> row_index_;
  std::shared_ptr<const Matrix> synthesis_;
};

/// Orthonormal DCT-II basis as an n x n analysis matrix F (row j is atom j).
Matrix dct_analysis_matrix(Index n);

/// F s, or A^T s for a subsampled operator.
SpectralVector analyze(const Signal& s, const SensingOperator& op);

/// A c restricted to the operator's rows.
Signal synthesize(const SpectralVector& c, const SensingOperator& op);

/// Keeps the k largest-magnitude entries; ties go to the lowest index.
SpectralVector top_k(const SpectralVector& c, std::size_t k);

/// Indices of the k largest-magnitude entries, in descending magnitude order
/// (lowest index first among ties).
std::vector<Index> top_k_indices(const Vector& c, std::size_t k);

/// sigma_k(c)_1: l1 norm of the tail left after keeping the best k terms.
double best_k_term_error(const SpectralVector& c, std::size_t k);

/// Number of entries with magnitude strictly above `threshold`.
std::size_t count_above(const Vector& v, double threshold);

}  // namespace cad
