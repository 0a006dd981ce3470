#pragma once

// Independent reference implementations used only by the tests. They are
// deliberately different algorithms from the library: multiprecision power
// series and explicit sums instead of recurrences, adaptive quadrature
// instead of Bessel closed forms.

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/factorials.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "bsr/fourier.hpp"

namespace oracle {

using Big = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<320>>;

inline Big big_pi() { return boost::math::constants::pi<Big>(); }

namespace detail {
template <class Real>
double bessel_series(double nu, double x) {
  const Real hx = Real(x) / 2;
  const Real hx2 = hx * hx;
  Real term = boost::multiprecision::pow(hx, Real(nu)) / boost::math::tgamma(Real(nu) + 1);
  Real sum = term;
  for (int k = 1; k < 5000; ++k) {
    term *= -hx2 / (Real(k) * (Real(k) + Real(nu)));
    sum += term;
    if (k > x && abs(term) < abs(sum) * Real("1e-30")) break;
  }
  return static_cast<double>(sum);
}
}  // namespace detail

/// J_nu(x) = sum_k (-1)^k (x/2)^(2k+nu) / (k! Gamma(k+nu+1)) in enough
/// digits to absorb the cancellation (the largest term is about e^x).
inline double bessel_j(double nu, double x) {
  using namespace boost::multiprecision;
  if (x == 0.0) return nu == 0.0 ? 1.0 : 0.0;
  if (x < 40.0) return detail::bessel_series<number<cpp_bin_float<60>>>(nu, x);
  if (x < 150.0) return detail::bessel_series<number<cpp_bin_float<120>>>(nu, x);
  return detail::bessel_series<Big>(nu, x);
}

inline double gamma(double x) { return static_cast<double>(boost::math::tgamma(Big(x))); }

/// C_l^lambda(x) = sum_k (-1)^k Gamma(l-k+lambda) / (Gamma(lambda) k! (l-2k)!) (2x)^(l-2k).
inline double gegenbauer(int l, double lambda, double x) {
  Big sum = 0;
  const Big lam(lambda);
  for (int k = 0; 2 * k <= l; ++k) {
    Big t = boost::math::tgamma(Big(l - k) + lam) / (boost::math::tgamma(lam) * boost::math::factorial<Big>(k) *
                                                      boost::math::factorial<Big>(l - 2 * k));
    t *= boost::multiprecision::pow(Big(2) * Big(x), l - 2 * k);
    sum += (k % 2 == 0) ? t : Big(-t);
  }
  return static_cast<double>(sum);
}

/// h_l = pi 2^(1-2 lambda) Gamma(l+2 lambda) / (l! (l+lambda) Gamma(lambda)^2).
inline double geg_norm(int l, double lambda) {
  const Big lam(lambda);
  const Big g = boost::math::tgamma(lam);
  return static_cast<double>(big_pi() * boost::multiprecision::pow(Big(2), 1 - 2 * lam) *
                             boost::math::tgamma(Big(l) + 2 * lam) /
                             (boost::math::factorial<Big>(l) * (Big(l) + lam) * g * g));
}

/// Adaptive Gauss-Kronrod integral over [-1, 1].
inline double integrate(const std::function<double(double)>& f, double tol = 1e-14) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -1.0, 1.0, 15, tol);
}

/// Explicit power sum in long double; cheap enough to sit inside a
/// quadrature loop.
inline double gegenbauer_ld(int l, double lambda, double x) {
  long double acc = 0.0L;
  for (int k = 0; 2 * k <= l; ++k) {
    long double t = std::exp(std::lgamma(static_cast<long double>(l - k) + lambda) -
                             std::lgamma(static_cast<long double>(lambda)) -
                             std::lgamma(static_cast<long double>(k) + 1) -
                             std::lgamma(static_cast<long double>(l - 2 * k) + 1));
    t *= std::pow(2.0L * x, l - 2 * k);
    acc += (k % 2 == 0) ? t : -t;
  }
  return static_cast<double>(acc);
}

/// Power-basis coefficients of C_l^lambda, built once and evaluated by
/// Horner's rule in long double; for quadrature inner loops.
class GegPoly {
 public:
  GegPoly(int l, double lambda) : c_(static_cast<std::size_t>(l) + 1, 0.0L) {
    for (int k = 0; 2 * k <= l; ++k) {
      const long double t = std::exp(std::lgamma(static_cast<long double>(l - k) + lambda) -
                                     std::lgamma(static_cast<long double>(lambda)) -
                                     std::lgamma(static_cast<long double>(k) + 1) -
                                     std::lgamma(static_cast<long double>(l - 2 * k) + 1)) *
                            std::pow(2.0L, l - 2 * k);
      c_[static_cast<std::size_t>(l - 2 * k)] = (k % 2 == 0) ? t : -t;
    }
  }

  double operator()(double x) const {
    long double acc = 0.0L;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * x + *it;
    return static_cast<double>(acc);
  }

 private:
  std::vector<long double> c_;
};

/// Gegenbauer coefficients (1/h_l) int (1-x^2)^(lambda-1/2) g(x) C_l(x) dx
/// by adaptive quadrature.
inline std::vector<double> gegenbauer_projection(const std::function<double(double)>& g, double lambda, int m) {
  std::vector<double> out(static_cast<std::size_t>(m) + 1);
  for (int l = 0; l <= m; ++l) {
    const GegPoly c(l, lambda);
    auto integrand = [&](double x) { return std::pow(1.0 - x * x, lambda - 0.5) * g(x) * c(x); };
    out[static_cast<std::size_t>(l)] = integrate(integrand, 1e-13) / geg_norm(l, lambda);
  }
  return out;
}

/// Continuous Fourier partial sum Re sum_k b_k exp(i k pi x).
inline double partial_sum_at(const bsr::SpectralData& b, double x) {
  std::complex<long double> acc = 0.0L;
  for (int k = b.k_min(); k <= b.k_max(); ++k) {
    const auto c = b.mode(k);
    const long double ph = static_cast<long double>(k) * std::numbers::pi_v<long double> * x;
    acc += std::complex<long double>(c.real(), c.imag()) * std::complex<long double>(std::cos(ph), std::sin(ph));
  }
  return static_cast<double>(acc.real());
}

// ---------------------------------------------------------------------------
// Hand-rolled generators for property tests.

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>()(rng_); }
  int even(int lo, int hi) { return 2 * integer((lo + 1) / 2, hi / 2); }

  bsr::Vector vector(Eigen::Index n) {
    bsr::Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
  }

  bsr::Matrix matrix(Eigen::Index r, Eigen::Index c) {
    bsr::Matrix a(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) a(i, j) = normal();
    }
    return a;
  }

  /// B^T B + shift I, symmetric positive definite.
  bsr::Matrix spd(Eigen::Index n, double shift = 1.0) {
    const bsr::Matrix b = matrix(n, n);
    return b.transpose() * b + shift * bsr::Matrix::Identity(n, n);
  }

  /// Coefficients of a real trigonometric polynomial with |k| <= N/2-1:
  /// conjugate symmetric, zero Nyquist mode.
  bsr::SpectralData real_trig(int n) {
    bsr::SpectralData d{bsr::ComplexVector::Zero(n), bsr::SpectralKind::clean};
    d.mode(0) = normal();
    for (int k = 1; k < n / 2; ++k) {
      const std::complex<double> c(normal() / k, normal() / k);
      d.mode(k) = c;
      d.mode(-k) = std::conj(c);
    }
    return d;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

}  // namespace oracle
