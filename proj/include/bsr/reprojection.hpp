#pragma once

// Gegenbauer spectral reprojection: the operator stack built from a grid
// and (lambda, m), and the classical two-step reconstruction
//   g = Re(F^Bessel b),   f = F^Geg g.

#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "bsr/errors.hpp"
#include "bsr/fourier.hpp"
#include "bsr/linalg.hpp"
#include "bsr/specfun.hpp"

namespace bsr {

/// Gegenbauer coefficients of degrees 0..m.
struct GegCoeffs {
  Vector values;
};

/// Discretized operators for one (N, m, lambda). Immutable once built.
class OperatorSet {
 public:
  const Grid& grid() const { return grid_; }
  const GegParams& params() const { return params_; }
  int n() const { return grid_.n(); }
  int m() const { return params_.m; }

  /// F^Geg, N x (m+1): C_l(x_j).
  const Matrix& geg_synthesis() const { return synthesis_; }
  /// F^CT = (2/N) H (F^Geg)^T W, (m+1) x N.
  const Matrix& geg_analysis() const { return analysis_; }
  /// F^Bessel, (m+1) x N complex.
  const ComplexMatrix& bessel_projection() const { return bessel_; }
  /// H diagonal, 1/h_l.
  const Vector& norm_diag() const { return norm_; }
  /// W diagonal, (1-x_j^2)^(lambda-1/2).
  const Vector& weight_diag() const { return weight_; }
  /// A = F^Geg F^CT, the discrete Gegenbauer projection on the grid.
  const Matrix& projector() const { return projector_; }

 private:
  friend OperatorSet build_operators(const Grid& grid, const GegParams& params);

  Grid grid_;
  GegParams params_;
  Matrix synthesis_;
  Matrix analysis_;
  ComplexMatrix bessel_;
  Vector norm_;
  Vector weight_;
  Matrix projector_;
};

namespace detail {

/// Gamma(lambda) (l+lambda) J_{l+lambda}(pi|k|) (2/(pi|k|))^lambda for
/// l = 0..m, formed in log space.
inline std::vector<double> bessel_row_magnitudes(double lambda, int m, int abs_k) {
  const double x = std::numbers::pi * abs_k;
  const auto js = specfun::bessel_j_log_sequence(lambda, m + 1, x);
  const double log_front = specfun::log_gamma(lambda) + lambda * std::log(2.0 / x);
  std::vector<double> out(static_cast<std::size_t>(m) + 1);
  for (int l = 0; l <= m; ++l) {
    const auto& j = js[static_cast<std::size_t>(l)];
    if (j.sign == 0) continue;
    out[static_cast<std::size_t>(l)] = j.sign * std::exp(log_front + std::log(l + lambda) + j.log_abs);
  }
  return out;
}

}  // namespace detail

inline OperatorSet build_operators(const Grid& grid, const GegParams& params) {
  params.validate();
  const int n = grid.n();
  const int m = params.m;
  const double lambda = params.lambda;
  if (n == 0) throw ConfigError("n", "grid is empty");
  if (m + 1 > n) {
    throw ConfigError("m", "m+1 = " + std::to_string(m + 1) + " exceeds N = " + std::to_string(n));
  }
  if (lambda < 0.5) {
    throw ConfigError("lambda", "must be at least 1/2; the weight (1-x^2)^(lambda-1/2) is singular at x = -1");
  }

  OperatorSet ops;
  ops.grid_ = grid;
  ops.params_ = params;

  ops.synthesis_.resize(n, m + 1);
  std::vector<double> row(static_cast<std::size_t>(m) + 1);
  for (int j = 0; j < n; ++j) {
    specfun::gegenbauer_all(lambda, grid[j], row);
    for (int l = 0; l <= m; ++l) ops.synthesis_(j, l) = row[static_cast<std::size_t>(l)];
  }

  ops.norm_.resize(m + 1);
  for (int l = 0; l <= m; ++l) ops.norm_(l) = 1.0 / specfun::geg_norm_h(l, lambda);

  ops.weight_.resize(n);
  for (int j = 0; j < n; ++j) ops.weight_(j) = std::pow(1.0 - grid[j] * grid[j], lambda - 0.5);

  ops.analysis_ =
      (2.0 / n) * ops.norm_.asDiagonal() * ops.synthesis_.transpose() * ops.weight_.asDiagonal();

  // Column for mode k sits at index k + N/2. k = 0 maps to the constant.
  ops.bessel_ = ComplexMatrix::Zero(m + 1, n);
  ops.bessel_(0, n / 2) = 1.0;
  const std::complex<double> i_pow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (int abs_k = 1; abs_k <= n / 2; ++abs_k) {
    const auto mags = detail::bessel_row_magnitudes(lambda, m, abs_k);
    for (int l = 0; l <= m; ++l) {
      const std::complex<double> phase = i_pow[l % 4];
      const double mag = mags[static_cast<std::size_t>(l)];
      // x -> -x flips (x/2)^l, so the -k entry carries (-1)^l.
      ops.bessel_(l, n / 2 - abs_k) = (l % 2 == 0 ? 1.0 : -1.0) * mag * phase;
      if (abs_k < n / 2) ops.bessel_(l, n / 2 + abs_k) = mag * phase;
    }
  }

  ops.projector_ = ops.synthesis_ * ops.analysis_;
  return ops;
}

/// Step 1 of the reprojection: Re(F^Bessel b).
inline GegCoeffs project_coeffs(const OperatorSet& ops, const SpectralData& data) {
  detail::check_length(data.n(), ops.n(), "project_coeffs");
  return {(ops.bessel_projection() * data.coeffs).real()};
}

/// f^lambda_{m,N} = F^Geg Re(F^Bessel b) on the grid.
inline RealSignal gegenbauer_reconstruct(const OperatorSet& ops, const SpectralData& data) {
  return {ops.geg_synthesis() * project_coeffs(ops, data).values};
}

/// Discrete Gegenbauer projection F^Geg F^CT f.
inline RealSignal geg_partial_sum(const OperatorSet& ops, const RealSignal& signal) {
  detail::check_length(signal.n(), ops.n(), "geg_partial_sum");
  return {ops.projector() * signal.values};
}

/// Structured text summary: shapes, conditioning of the projector on its
/// range, and the kappa guidance.
inline std::string diagnostic_dump(const OperatorSet& ops) {
  const Eigen::JacobiSVD<Matrix> svd(ops.projector());
  const Vector& sv = svd.singularValues();
  const int rank_dim = ops.m() + 1;
  const double cond = sv(0) / sv(rank_dim - 1);
  const KappaReport kappa = kappa_report(ops.params(), ops.n());
  std::ostringstream os;
  os.precision(12);
  os << "n: " << ops.n() << '\n'
     << "m: " << ops.m() << '\n'
     << "lambda: " << ops.params().lambda << '\n'
     << "geg_synthesis: " << ops.geg_synthesis().rows() << "x" << ops.geg_synthesis().cols() << '\n'
     << "geg_analysis: " << ops.geg_analysis().rows() << "x" << ops.geg_analysis().cols() << '\n'
     << "bessel_projection: " << ops.bessel_projection().rows() << "x" << ops.bessel_projection().cols() << '\n'
     << "projector_sigma_max: " << sv(0) << '\n'
     << "projector_sigma_rank: " << sv(rank_dim - 1) << '\n'
     << "projector_condition_on_range: " << cond << '\n'
     << "projector_sigma_tail: " << (rank_dim < sv.size() ? sv(rank_dim) : 0.0) << '\n'
     << "kappa_bound: " << KappaReport::bound << '\n'
     << "m_over_n: " << kappa.m_over_n << (kappa.m_within() ? "" : " (exceeds bound)") << '\n'
     << "lambda_over_n: " << kappa.lambda_over_n << (kappa.lambda_within() ? "" : " (exceeds bound)") << '\n';
  return os.str();
}

}  // namespace bsr
