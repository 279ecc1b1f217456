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

#include "qsmooth/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace qsmooth {

namespace {

void require_same_shape(const ComplexMatrix& a, const ComplexMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << what << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
       << b.cols();
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, cplx{0.0, 0.0}) {}

ComplexMatrix::ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("ComplexMatrix: entry count does not match rows*cols");
  }
}

ComplexMatrix ComplexMatrix::identity(std::size_t n) {
  ComplexMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const cplx> diag) {
  ComplexMatrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

ComplexMatrix ComplexMatrix::diagonal(std::span<const double> diag) {
  ComplexMatrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

ComplexMatrix ComplexMatrix::outer(std::span<const cplx> v) {
  ComplexMatrix m(v.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = v[i] * std::conj(v[j]);
  return m;
}

ComplexMatrix ComplexMatrix::adjoint() const {
  ComplexMatrix out(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
  return out;
}

cplx ComplexMatrix::trace() const {
  cplx t = 0.0;
  for (std::size_t i = 0; i < std::min(rows_, cols_); ++i) t += (*this)(i, i);
  return t;
}

double ComplexMatrix::hermitian_defect() const {
  if (!square()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = r; c < cols_; ++c)
      worst = std::max(worst, std::abs((*this)(r, c) - std::conj((*this)(c, r))));
  return worst;
}

double ComplexMatrix::max_abs() const {
  double worst = 0.0;
  for (const auto& v : data_) worst = std::max(worst, std::abs(v));
  return worst;
}

ComplexMatrix& ComplexMatrix::operator+=(const ComplexMatrix& o) {
  require_same_shape(*this, o, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator-=(const ComplexMatrix& o) {
  require_same_shape(*this, o, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

ComplexMatrix& ComplexMatrix::operator*=(cplx s) {
  for (auto& v : data_) v *= s;
  return *this;
}

ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matrix product: inner dimension mismatch");
  ComplexMatrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const cplx aik = a(i, k);
      if (aik == cplx{0.0, 0.0}) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

double max_abs_diff(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

ComplexMatrix hadamard(const ComplexMatrix& a, const ComplexMatrix& b) {
  require_same_shape(a, b, "hadamard");
  ComplexMatrix out = a;
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] *= b.data()[i];
  return out;
}

ComplexMatrix conjugate(const ComplexMatrix& u, const ComplexMatrix& m) {
  return u * m * u.adjoint();
}

ComplexMatrix tensor_product(const ComplexMatrix& a, const ComplexMatrix& b) {
  ComplexMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const cplx aij = a(i, j);
      for (std::size_t k = 0; k < b.rows(); ++k)
        for (std::size_t l = 0; l < b.cols(); ++l)
          out(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
    }
  return out;
}

bool is_unitary(const ComplexMatrix& u, double tol) {
  if (!u.square()) return false;
  return max_abs_diff(u.adjoint() * u, ComplexMatrix::identity(u.rows())) <= tol;
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t log2_exact(std::size_t n) {
  if (!is_power_of_two(n)) throw std::invalid_argument("dimension is not a power of two");
  std::size_t k = 0;
  while ((std::size_t{1} << k) < n) ++k;
  return k;
}

// ---------------------------------------------------------------------------
// DensityMatrix

DensityMatrix::DensityMatrix(ComplexMatrix m, double tol) : m_(std::move(m)) {
  if (!m_.square() || !is_power_of_two(m_.rows())) {
    throw std::invalid_argument("DensityMatrix: dimension must be a square power of two");
  }
  const double defect = m_.hermitian_defect();
  if (defect > tol) {
    std::ostringstream os;
    os << "DensityMatrix: not Hermitian (max asymmetry " << defect << ")";
    throw NumericError(os.str());
  }
  const cplx tr = m_.trace();
  if (std::abs(tr - 1.0) > tol) {
    std::ostringstream os;
    os << "DensityMatrix: trace " << tr.real() << " differs from 1";
    throw NumericError(os.str());
  }
  const auto eig = eig_hermitian(m_, tol);
  if (eig.values.back() < -tol) {
    std::ostringstream os;
    os << "DensityMatrix: negative eigenvalue " << eig.values.back();
    throw NumericError(os.str());
  }
}

DensityMatrix DensityMatrix::trusted(ComplexMatrix m) { return DensityMatrix(std::move(m), Trusted{}); }

DensityMatrix DensityMatrix::ground(std::size_t qubits) {
  ComplexMatrix m(std::size_t{1} << qubits, std::size_t{1} << qubits);
  m(0, 0) = 1.0;
  return trusted(std::move(m));
}

DensityMatrix DensityMatrix::pure(std::span<const cplx> amplitudes) {
  double norm2 = 0.0;
  for (const auto& a : amplitudes) norm2 += std::norm(a);
  if (std::abs(norm2 - 1.0) > 1e-10) throw std::invalid_argument("DensityMatrix::pure: amplitudes not normalized");
  if (!is_power_of_two(amplitudes.size())) throw std::invalid_argument("DensityMatrix::pure: length not a power of two");
  return trusted(ComplexMatrix::outer(amplitudes));
}

std::size_t DensityMatrix::qubits() const { return log2_exact(dim()); }

double DensityMatrix::purity() const {
  // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
  double p = 0.0;
  for (const auto& v : m_.data()) p += std::norm(v);
  return p;
}

// ---------------------------------------------------------------------------
// Jacobi

EigenDecomposition eig_hermitian(const ComplexMatrix& m, double hermitian_tol) {
  if (!m.square()) throw std::invalid_argument("eig_hermitian: matrix is not square");
  const double defect = m.hermitian_defect();
  if (defect > hermitian_tol) {
    std::ostringstream os;
    os << "eig_hermitian: input not Hermitian (max asymmetry " << defect << ")";
    throw NumericError(os.str());
  }
  const std::size_t n = m.rows();
  // Symmetrize so the iteration works on an exactly Hermitian matrix.
  ComplexMatrix a(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    a(i, i) = m(i, i).real();
    for (std::size_t j = i + 1; j < n; ++j) {
      a(i, j) = 0.5 * (m(i, j) + std::conj(m(j, i)));
      a(j, i) = std::conj(a(i, j));
    }
  }
  ComplexMatrix v = ComplexMatrix::identity(n);

  double frob = 0.0;
  for (const auto& x : a.data()) frob += std::norm(x);
  frob = std::sqrt(frob);
  const double threshold = 1e-12 * std::max(1.0, frob);

  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * std::norm(a(i, j));
    return std::sqrt(s);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > threshold; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double g = std::abs(a(p, q));
        if (g < 1e-300) continue;
        const cplx e = a(p, q) / g;
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double tau = (aqq - app) / (2.0 * g);
        const double t = (tau >= 0.0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        // J = [[e c, e s], [-s, c]] on (p, q); A <- J^H A J, V <- V J.
        const cplx jpp = e * c, jpq = e * s;
        const double jqp = -s, jqq = c;
        for (std::size_t k = 0; k < n; ++k) {
          const cplx akp = a(k, p), akq = a(k, q);
          a(k, p) = akp * jpp + akq * jqp;
          a(k, q) = akp * jpq + akq * jqq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const cplx apk = a(p, k), aqk = a(q, k);
          a(p, k) = std::conj(jpp) * apk + jqp * aqk;
          a(q, k) = std::conj(jpq) * apk + jqq * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
        for (std::size_t k = 0; k < n; ++k) {
          const cplx vkp = v(k, p), vkq = v(k, q);
          v(k, p) = vkp * jpp + vkq * jqp;
          v(k, q) = vkp * jpq + vkq * jqq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i).real() > a(j, j).real(); });
  EigenDecomposition out{std::vector<double>(n), ComplexMatrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]).real();
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, k) = v(r, order[k]);
  }
  return out;
}

double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("trace_distance: dimension mismatch");
  // The difference is Hermitian, so its singular values are |eigenvalues|.
  const auto eig = eig_hermitian(a.matrix() - b.matrix(), 1e-9);
  double s = 0.0;
  for (double v : eig.values) s += std::abs(v);
  return std::clamp(0.5 * s, 0.0, 1.0);
}

double spectral_norm(const ComplexMatrix& m, double rel_tol, int max_iter) {
  if (m.max_abs() == 0.0) return 0.0;
  // Largest eigenvalue of the smaller of M M^H and M^H M.
  const ComplexMatrix gram = m.rows() <= m.cols() ? m * m.adjoint() : m.adjoint() * m;
  const std::size_t n = gram.rows();
  std::vector<cplx> v(n), w(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 1.0 + 0.01 * static_cast<double>(i % 7);
  auto normalize = [](std::vector<cplx>& x) {
    double s = 0.0;
    for (const auto& c : x) s += std::norm(c);
    s = std::sqrt(s);
    for (auto& c : x) c /= s;
  };
  normalize(v);
  double lambda = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      cplx acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += gram(i, j) * v[j];
      w[i] = acc;
    }
    cplx rq = 0.0;
    for (std::size_t i = 0; i < n; ++i) rq += std::conj(v[i]) * w[i];
    const double next = rq.real();
    v.swap(w);
    normalize(v);
    const bool converged = it > 0 && std::abs(next - lambda) <= rel_tol * std::abs(next);
    lambda = next;
    if (converged) break;
  }
  return std::sqrt(std::max(lambda, 0.0));
}

std::vector<double> cholesky_solve(std::vector<double> a, std::size_t n, std::span<const double> b) {
  if (a.size() != n * n || b.size() != n) throw std::invalid_argument("cholesky_solve: size mismatch");
  for (std::size_t j = 0; j < n; ++j) {
    double d = a[j * n + j];
    for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
    if (!(d > 0.0)) {
      std::ostringstream os;
      os << "cholesky_solve: matrix not positive definite at pivot " << j << " (" << d << ")";
      throw NumericError(os.str());
    }
    const double ljj = std::sqrt(d);
    a[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
      a[i * n + j] = s / ljj;
    }
  }
  std::vector<double> y(b.begin(), b.end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) y[i] -= a[i * n + k] * y[k];
    y[i] /= a[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) y[i] -= a[k * n + i] * y[k];
    y[i] /= a[i * n + i];
  }
  return y;
}

// ---------------------------------------------------------------------------
// stats

namespace stats {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p must lie strictly inside (0, 1)");
  // Acklam's rational approximation, then Halley refinement against erfc.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int it = 0; it < 2; ++it) {
    // Residual Phi(x) - p, evaluated through the smaller tail.
    const double e = p < 0.5 ? normal_cdf(x) - p : (1.0 - p) - 0.5 * std::erfc(x / std::sqrt(2.0));
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
  }
  return x;
}

}  // namespace stats

}  // namespace qsmooth
