// Shared generators and independent oracles for the test suites.
#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "qsmooth/numerics.hpp"

namespace qsmooth::testing {

inline ComplexMatrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexMatrix m(rows, cols);
  for (auto& v : m.data()) v = cplx{n(rng), n(rng)};
  return m;
}

inline ComplexMatrix random_hermitian(std::size_t n, std::mt19937_64& rng) {
  const ComplexMatrix a = random_matrix(n, n, rng);
  return (a + a.adjoint()) * cplx{0.5, 0.0};
}

inline std::vector<cplx> random_state_vector(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<cplx> v(dim);
  double s = 0.0;
  for (auto& c : v) {
    c = cplx{n(rng), n(rng)};
    s += std::norm(c);
  }
  for (auto& c : v) c /= std::sqrt(s);
  return v;
}

/// Mixed state G G^H / Tr(G G^H).
inline DensityMatrix random_density(std::size_t dim, std::mt19937_64& rng) {
  const ComplexMatrix g = random_matrix(dim, dim, rng);
  ComplexMatrix r = g * g.adjoint();
  r *= cplx{1.0 / r.trace().real(), 0.0};
  return DensityMatrix(r, 1e-9);
}

/// QR-free random unitary: exp of a random Hermitian via its eigenbasis.
inline ComplexMatrix random_unitary(std::size_t n, std::mt19937_64& rng) {
  const auto eig = eig_hermitian(random_hermitian(n, rng));
  std::vector<cplx> ph(n);
  std::uniform_real_distribution<double> u(0.0, 2.0 * M_PI);
  for (auto& p : ph) p = std::polar(1.0, u(rng));
  return eig.vectors * ComplexMatrix::diagonal(ph) * eig.vectors.adjoint();
}

/// One-sided (Hestenes) Jacobi SVD; returns singular values descending.
/// Independent of the library's eigensolver and power iteration.
inline std::vector<double> singular_values(const ComplexMatrix& m) {
  ComplexMatrix a = m.rows() >= m.cols() ? m : m.adjoint();
  const std::size_t rows = a.rows(), cols = a.cols();
  for (int sweep = 0; sweep < 80; ++sweep) {
    double worst = 0.0;
    for (std::size_t p = 0; p + 1 < cols; ++p)
      for (std::size_t q = p + 1; q < cols; ++q) {
        double alpha = 0.0, beta = 0.0;
        cplx gamma = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
          alpha += std::norm(a(r, p));
          beta += std::norm(a(r, q));
          gamma += std::conj(a(r, p)) * a(r, q);
        }
        const double g = std::abs(gamma);
        if (g == 0.0) continue;
        worst = std::max(worst, g / std::sqrt(alpha * beta));
        const cplx ph = std::conj(gamma) / g;
        const double zeta = (beta - alpha) / (2.0 * g);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t), s = c * t;
        for (std::size_t r = 0; r < rows; ++r) {
          const cplx ap = a(r, p), bq = ph * a(r, q);
          a(r, p) = c * ap - s * bq;
          a(r, q) = s * ap + c * bq;
        }
      }
    if (worst < 1e-15) break;
  }
  std::vector<double> sv(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows; ++r) s += std::norm(a(r, c));
    sv[c] = std::sqrt(s);
  }
  std::sort(sv.rbegin(), sv.rend());
  return sv;
}

/// Standard normal CDF from the Maclaurin series of erf in long double.
inline double normal_cdf_series(double x) {
  const long double z = static_cast<long double>(x) / std::sqrt(2.0L);
  long double term = z, sum = z;
  for (int n = 1; n < 400; ++n) {
    term *= -z * z / n;
    const long double add = term / (2 * n + 1);
    sum += add;
    if (std::fabs(add) < 1e-30L) break;
  }
  const long double erf = 2.0L / std::sqrt(static_cast<long double>(M_PI)) * sum;
  return static_cast<double>(0.5L * (1.0L + erf));
}

/// Root of normal_cdf_series(x) = p by bisection.
inline double normal_quantile_bisect(double p) {
  double lo = -8.0, hi = 8.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf_series(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace qsmooth::testing
