#pragma once

// Special functions needed by the Gegenbauer operator stack: Gamma,
// Bessel J of real non-negative order, Gegenbauer polynomials and their
// weighted norms. Everything here is a pure function of its arguments.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "bsr/errors.hpp"

namespace bsr {

/// Gegenbauer weight exponent and truncation degree.
struct GegParams {
  double lambda = 4.0;
  int m = 9;

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw ConfigError("lambda", "must be a finite non-negative number");
    }
    if (m < 0) throw ConfigError("m", "must be non-negative");
  }
};

/// Ratios m/N and lambda/N against the exponential-convergence bound
/// kappa < pi*e/27. Exceeding the bound is a warning only.
struct KappaReport {
  static constexpr double bound = std::numbers::pi * std::numbers::e / 27.0;
  double m_over_n = 0.0;
  double lambda_over_n = 0.0;

  bool m_within() const { return m_over_n < bound; }
  bool lambda_within() const { return lambda_over_n < bound; }

  std::vector<std::string> warnings() const {
    std::vector<std::string> out;
    auto fmt = [](const char* name, double v) {
      std::ostringstream os;
      os << name << " = " << v << " exceeds kappa bound " << bound;
      return os.str();
    };
    if (!m_within()) out.push_back(fmt("m/N", m_over_n));
    if (!lambda_within()) out.push_back(fmt("lambda/N", lambda_over_n));
    return out;
  }
};

inline KappaReport kappa_report(const GegParams& p, int n) {
  return {static_cast<double>(p.m) / n, p.lambda / n};
}

namespace specfun {

/// log|v| together with the sign of v; lets products of huge and tiny
/// factors be formed without overflow.
struct SignedLog {
  double log_abs = -std::numeric_limits<double>::infinity();
  int sign = 0;

  double value() const { return sign == 0 ? 0.0 : sign * std::exp(log_abs); }
};

inline double gamma_fn(double x) {
  if (!(x > 0.0)) {
    throw DomainError("gamma_fn: argument must be positive, got " + std::to_string(x));
  }
  return std::tgamma(x);
}

/// log Gamma(x) for x > 0. Boost's lgamma is reentrant, unlike the C
/// library's, which writes the global signgam.
inline double log_gamma(double x) {
  if (!(x > 0.0)) {
    throw DomainError("log_gamma: argument must be positive, got " + std::to_string(x));
  }
  return boost::math::lgamma(x);
}

// ---------------------------------------------------------------------------
// Gegenbauer polynomials

namespace detail {
inline void check_geg_args(int l, double lambda, double x) {
  if (l < 0) throw DomainError("gegenbauer: degree must be non-negative");
  if (!(lambda >= 0.0)) throw DomainError("gegenbauer: lambda must be non-negative");
  if (!(std::abs(x) <= 1.0)) {
    throw DomainError("gegenbauer: |x| must not exceed 1, got " + std::to_string(x));
  }
}
}  // namespace detail

/// Writes C_0^lambda(x) ... C_m^lambda(x) into out (size m+1) with the
/// three-term recurrence
///   l C_l = 2(l-1+lambda) x C_{l-1} - (l-2+2 lambda) C_{l-2}.
inline void gegenbauer_all(double lambda, double x, std::span<double> out) {
  if (out.empty()) return;
  detail::check_geg_args(static_cast<int>(out.size()) - 1, lambda, x);
  out[0] = 1.0;
  if (out.size() == 1) return;
  out[1] = 2.0 * lambda * x;
  for (std::size_t l = 2; l < out.size(); ++l) {
    const double ld = static_cast<double>(l);
    out[l] = (2.0 * (ld - 1.0 + lambda) * x * out[l - 1] - (ld - 2.0 + 2.0 * lambda) * out[l - 2]) / ld;
  }
}

inline double gegenbauer_eval(int l, double lambda, double x) {
  detail::check_geg_args(l, lambda, x);
  std::vector<double> c(static_cast<std::size_t>(l) + 1);
  gegenbauer_all(lambda, x, c);
  return c.back();
}

/// C_l^lambda(1) = Gamma(l+2 lambda) / (l! Gamma(2 lambda)), evaluated in
/// log space; the naive ratio overflows once lambda reaches a few dozen.
inline double gegenbauer_at_one(int l, double lambda) {
  if (l < 0) throw DomainError("gegenbauer_at_one: degree must be non-negative");
  if (!(lambda >= 0.0)) throw DomainError("gegenbauer_at_one: lambda must be non-negative");
  if (l == 0) return 1.0;
  if (lambda == 0.0) return 0.0;
  return std::exp(log_gamma(l + 2.0 * lambda) - log_gamma(l + 1.0) - log_gamma(2.0 * lambda));
}

/// Squared weighted norm h_l = ||C_l^lambda||^2 under (1-x^2)^(lambda-1/2):
///   h_l = sqrt(pi) C_l(1) Gamma(lambda+1/2) / (Gamma(lambda) (l+lambda)).
/// The divisor is the scalar (l+lambda); h_0 = 2 for the Legendre weight.
inline double geg_norm_h(int l, double lambda) {
  if (l < 0) throw DomainError("geg_norm_h: degree must be non-negative");
  if (!(lambda > 0.0)) {
    throw DomainError("geg_norm_h: lambda must be positive, got " + std::to_string(lambda));
  }
  const double log_c1 = l == 0 ? 0.0
                               : log_gamma(l + 2.0 * lambda) - log_gamma(l + 1.0) -
                                     log_gamma(2.0 * lambda);
  return std::exp(0.5 * std::log(std::numbers::pi) + log_c1 + log_gamma(lambda + 0.5) -
                  log_gamma(lambda) - std::log(l + lambda));
}

// ---------------------------------------------------------------------------
// Bessel functions of the first kind

enum class BesselMethod { zero_argument, series, miller, hankel };

namespace detail {

inline void check_bessel_args(double order, double arg) {
  if (!(order >= 0.0) || !std::isfinite(order)) {
    throw DomainError("bessel_j: order must be finite and non-negative, got " + std::to_string(order));
  }
  if (!(arg >= 0.0) || !std::isfinite(arg)) {
    throw DomainError("bessel_j: argument must be finite and non-negative, got " + std::to_string(arg));
  }
}

inline SignedLog at_zero(double order) {
  if (order == 0.0) return {0.0, 1};
  return {};
}

inline int sgn(double v) { return (v > 0.0) - (v < 0.0); }

/// Ascending series sum_k (-x^2/4)^k / (k! Gamma(nu+k+1)) times (x/2)^nu.
/// Only used where the terms decrease from the start, so cancellation is
/// bounded.
inline SignedLog series_log(double nu, double x) {
  const double q = 0.25 * x * x;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 1000; ++k) {
    term *= -q / (k * (nu + k));
    sum += term;
    if (std::abs(term) <= 1e-17 * std::abs(sum)) {
      return {nu * std::log(0.5 * x) - log_gamma(nu + 1.0) + std::log(std::abs(sum)), sgn(sum)};
    }
  }
  std::ostringstream os;
  os << "bessel_j: ascending series did not converge (order " << nu << ", arg " << x << ")";
  throw NumericalError(os.str());
}

/// Hankel large-argument expansion J = sqrt(2/(pi x)) (P cos chi - Q sin chi).
inline double hankel(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double p = 1.0;
  double q = 0.0;
  double prev_abs = 1.0;
  bool converged = false;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= (mu - odd * odd) / (k * 8.0 * x);
    const double a = std::abs(term);
    if (term == 0.0) {
      converged = true;
      break;
    }
    // k mod 4 -> contribution sign: 1:+Q, 2:-P, 3:-Q, 0:+P
    switch (k % 4) {
      case 1: q += term; break;
      case 2: p -= term; break;
      case 3: q -= term; break;
      default: p += term; break;
    }
    if (a < 1e-17 * std::max(std::abs(p), 1e-300)) {
      converged = true;
      break;
    }
    if (k > 2 && a > prev_abs) break;  // asymptotic series started diverging
    prev_abs = a;
  }
  if (!converged) {
    std::ostringstream os;
    os << "bessel_j: Hankel expansion did not reach tolerance (order " << nu << ", arg " << x << ")";
    throw NumericalError(os.str());
  }
  const double phase = (0.5 * nu + 0.25) * std::numbers::pi;
  const double cx = std::cos(x);
  const double sx = std::sin(x);
  const double cp = std::cos(phase);
  const double sp = std::sin(phase);
  const double cos_chi = cx * cp + sx * sp;
  const double sin_chi = sx * cp - cx * sp;
  return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * cos_chi - q * sin_chi);
}

/// Miller downward recurrence for orders nu0, nu0+1, ..., nu0+count-1,
/// normalized with the Gegenbauer/Neumann identity
///   (x/2)^mu = sum_k (mu+2k) Gamma(mu+k)/k! J_{mu+2k}(x),  mu = frac(nu0).
/// Values are returned in signed-log form with rescaling tracked so that
/// neither the recurrence nor the result can overflow.
inline std::vector<SignedLog> miller_log(double nu0, int count, double x) {
  const double whole = std::floor(nu0);
  const double mu = nu0 - whole;
  const int n0 = static_cast<int>(whole);
  const int n_hi = n0 + count - 1;
  const double ref = std::max(static_cast<double>(n_hi), x);
  const int top = static_cast<int>(std::ceil(ref + 30.0 + 4.0 * std::sqrt(x))) + 1;

  // c_k of the normalization identity; g_k = Gamma(mu+k)/k!.
  const int kmax = top / 2 + 1;
  std::vector<double> weight(static_cast<std::size_t>(kmax) + 1);
  weight[0] = std::tgamma(mu + 1.0);
  double g = weight[0];  // g_1 = Gamma(mu+1)
  for (int k = 1; k <= kmax; ++k) {
    weight[static_cast<std::size_t>(k)] = (mu + 2.0 * k) * g;
    g *= (mu + k) / (k + 1.0);
  }

  constexpr double big = 1e250;
  const double log_big = std::log(big);
  std::vector<double> stored(static_cast<std::size_t>(count));
  std::vector<double> stored_shift(static_cast<std::size_t>(count));
  double shift = 0.0;
  double up = 0.0;
  double cur = 1.0;
  double sum = 0.0;
  for (int j = top; j >= 0; --j) {
    if (j >= n0 && j <= n_hi) {
      stored[static_cast<std::size_t>(j - n0)] = cur;
      stored_shift[static_cast<std::size_t>(j - n0)] = shift;
    }
    if (j % 2 == 0) sum += weight[static_cast<std::size_t>(j / 2)] * cur;
    if (j == 0) break;
    const double down = (2.0 * (mu + j) / x) * cur - up;
    up = cur;
    cur = down;
    if (std::abs(cur) > big) {
      cur /= big;
      up /= big;
      sum /= big;
      shift += log_big;
    }
  }
  if (sum == 0.0 || !std::isfinite(sum)) {
    std::ostringstream os;
    os << "bessel_j: Miller normalization failed (order " << nu0 << ", arg " << x << ")";
    throw NumericalError(os.str());
  }
  const double log_norm = mu * std::log(0.5 * x) - std::log(std::abs(sum)) - shift;
  const int sum_sign = sgn(sum);
  std::vector<SignedLog> out(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = stored[i];
    if (v == 0.0) continue;
    out[i] = {std::log(std::abs(v)) + stored_shift[i] + log_norm, sgn(v) * sum_sign};
  }
  return out;
}

}  // namespace detail

/// Which evaluation route bessel_j uses for (order, arg).
inline BesselMethod bessel_method(double order, double arg) {
  detail::check_bessel_args(order, arg);
  if (arg == 0.0) return BesselMethod::zero_argument;
  if (0.25 * arg * arg <= order + 1.0) return BesselMethod::series;
  if (arg >= 30.0 && arg >= order * order) return BesselMethod::hankel;
  return BesselMethod::miller;
}

inline SignedLog bessel_j_log(double order, double arg) {
  switch (bessel_method(order, arg)) {
    case BesselMethod::zero_argument: return detail::at_zero(order);
    case BesselMethod::series: return detail::series_log(order, arg);
    case BesselMethod::hankel: {
      const double v = detail::hankel(order, arg);
      if (v == 0.0) return {};
      return {std::log(std::abs(v)), detail::sgn(v)};
    }
    case BesselMethod::miller: break;
  }
  return detail::miller_log(order, 1, arg).front();
}

/// J_order(arg) for order, arg >= 0.
inline double bessel_j(double order, double arg) {
  if (bessel_method(order, arg) == BesselMethod::hankel) return detail::hankel(order, arg);
  return bessel_j_log(order, arg).value();
}

/// J_{order+n}(arg) for n = 0..count-1 in one downward sweep.
inline std::vector<SignedLog> bessel_j_log_sequence(double order, int count, double arg) {
  detail::check_bessel_args(order, arg);
  if (count <= 0) return {};
  if (arg == 0.0) {
    std::vector<SignedLog> out(static_cast<std::size_t>(count));
    out[0] = detail::at_zero(order);
    return out;
  }
  return detail::miller_log(order, count, arg);
}

inline std::vector<double> bessel_j_sequence(double order, int count, double arg) {
  const auto logs = bessel_j_log_sequence(order, count, arg);
  std::vector<double> out(logs.size());
  std::transform(logs.begin(), logs.end(), out.begin(), [](const SignedLog& s) { return s.value(); });
  return out;
}

}  // namespace specfun
}  // namespace bsr
