/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qsmooth {

using cplx = std::complex<double>;

/// Raised when a numerical precondition (Hermiticity, PSD, unitarity) fails.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense complex matrix, row-major.
class ComplexMatrix {
 public:
  ComplexMatrix() = default;
  ComplexMatrix(std::size_t rows, std::size_t cols);
  ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries);

  static ComplexMatrix identity(std::size_t n);
  static ComplexMatrix diagonal(std::span<const cplx> diag);
  static ComplexMatrix diagonal(std::span<const double> diag);
  /// |v><v|
  static ComplexMatrix outer(std::span<const cplx> v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool square() const { return rows_ == cols_; }

  cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<cplx> data() { return data_; }
  std::span<const cplx> data() const { return data_; }

  ComplexMatrix adjoint() const;
  cplx trace() const;

  /// max_{ij} |M_ij - conj(M_ji)|
  double hermitian_defect() const;
  double max_abs() const;

  ComplexMatrix& operator+=(const ComplexMatrix& o);
  ComplexMatrix& operator-=(const ComplexMatrix& o);
  ComplexMatrix& operator*=(cplx s);

  friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
  friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
  friend ComplexMatrix operator*(ComplexMatrix a, cplx s) { return a *= s; }
  friend ComplexMatrix operator*(cplx s, ComplexMatrix a) { return a *= s; }
  friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b);

  bool operator==(const ComplexMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<cplx> data_;
};

/// max_{ij} |a_ij - b_ij|; throws on shape mismatch.
double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b);

/// Pointwise (Hadamard) product.
ComplexMatrix hadamard(const ComplexMatrix& a, const ComplexMatrix& b);

/// U * M * U^H
ComplexMatrix conjugate(const ComplexMatrix& u, const ComplexMatrix& m);

ComplexMatrix tensor_product(const ComplexMatrix& a, const ComplexMatrix& b);

bool is_unitary(const ComplexMatrix& u, double tol = 1e-10);

/// A positive semidefinite, unit-trace matrix of dimension 2^d.
class DensityMatrix {
 public:
  /// Validates trace, Hermiticity and spectrum at `tol`.
  explicit DensityMatrix(ComplexMatrix m, double tol = 1e-10);

  /// Skips the eigenvalue check; for states produced by CPTP maps on valid inputs.
  static DensityMatrix trusted(ComplexMatrix m);
  /// |0...0><0...0|
  static DensityMatrix ground(std::size_t qubits);
  static DensityMatrix pure(std::span<const cplx> amplitudes);

  std::size_t dim() const { return m_.rows(); }
  std::size_t qubits() const;
  const ComplexMatrix& matrix() const { return m_; }
  const cplx& operator()(std::size_t r, std::size_t c) const { return m_(r, c); }

  double purity() const;

 private:
  struct Trusted {};
  DensityMatrix(ComplexMatrix m, Trusted) : m_(std::move(m)) {}
  ComplexMatrix m_;
};

struct EigenDecomposition {
  std::vector<double> values;  // descending
  ComplexMatrix vectors;       // column k pairs with values[k]
};

/// Cyclic Jacobi eigensolver for Hermitian matrices.
/// Rejects input whose Hermitian defect exceeds `hermitian_tol`.
EigenDecomposition eig_hermitian(const ComplexMatrix& m, double hermitian_tol = 1e-10);

/// 1/2 * sum of singular values of (a - b).
double trace_distance(const DensityMatrix& a, const DensityMatrix& b);

/// Largest singular value by power iteration on the smaller Gram matrix.
double spectral_norm(const ComplexMatrix& m, double rel_tol = 1e-13, int max_iter = 100000);

/// Real symmetric positive definite solve via Cholesky, row-major `a` (n x n).
/// Throws NumericError if a pivot is not positive.
std::vector<double> cholesky_solve(std::vector<double> a, std::size_t n, std::span<const double> b);

bool is_power_of_two(std::size_t n);
std::size_t log2_exact(std::size_t n);

namespace stats {

/// Standard normal CDF.
double normal_cdf(double x);
/// Inverse of normal_cdf on (0, 1). Throws std::domain_error outside.
double normal_quantile(double p);

}  // namespace stats

}  // namespace qsmooth
