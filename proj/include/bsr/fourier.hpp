#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>

#include "bsr/errors.hpp"
#include "bsr/linalg.hpp"

namespace bsr {

/// Uniform grid x_j = -1 + 2 j / N, j = 0..N-1, N even. Contains -1, not 1.
class Grid {
 public:
  Grid() = default;

  explicit Grid(int n) : n_(n) {
    if (n < 4 || n % 2 != 0) {
      throw ConfigError("n", "grid size must be even and at least 4, got " + std::to_string(n));
    }
    points_.resize(n);
    for (int j = 0; j < n; ++j) points_(j) = -1.0 + 2.0 * j / n;
  }

  int n() const { return n_; }
  const Vector& points() const { return points_; }
  double operator[](int j) const { return points_(j); }

  /// Index of the grid point nearest x (lowest index on ties).
  int nearest(double x) const {
    int best = 0;
    for (int j = 1; j < n_; ++j) {
      if (std::abs(points_(j) - x) < std::abs(points_(best) - x)) best = j;
    }
    return best;
  }

 private:
  int n_ = 0;
  Vector points_;
};

inline Grid make_grid(int n) { return Grid(n); }

/// Real samples f(x_j) on a grid.
struct RealSignal {
  Vector values;

  int n() const { return static_cast<int>(values.size()); }
};

enum class SpectralKind { clean, noisy };

/// Fourier coefficients for modes k = -N/2 .. N/2-1, stored at index k + N/2.
struct SpectralData {
  ComplexVector coeffs;
  SpectralKind kind = SpectralKind::clean;

  int n() const { return static_cast<int>(coeffs.size()); }
  int k_min() const { return -n() / 2; }
  int k_max() const { return n() / 2 - 1; }
  std::complex<double> mode(int k) const { return coeffs(k + n() / 2); }
  std::complex<double>& mode(int k) { return coeffs(k + n() / 2); }
};

/// Circular complex Gaussian noise of total variance inv_variance per mode.
struct NoiseModel {
  double inv_variance = 0.0;
  std::uint64_t seed = 0;
};

namespace detail {
inline void check_length(int have, int want, const char* what) {
  if (have != want) {
    throw DomainError(std::string(what) + ": length " + std::to_string(have) + " does not match grid size " +
                      std::to_string(want));
  }
}
}  // namespace detail

/// F(n, j) = (1/N) exp(-i k pi x_j), k = n - N/2.
inline ComplexMatrix dft_matrix(const Grid& grid) {
  const int n = grid.n();
  ComplexMatrix f(n, n);
  for (int r = 0; r < n; ++r) {
    const double k = r - n / 2;
    for (int j = 0; j < n; ++j) f(r, j) = std::polar(1.0 / n, -k * std::numbers::pi * grid[j]);
  }
  return f;
}

/// Un-normalized adjoint: Fhat*(j, n) = exp(i k pi x_j). Equals N F^H.
inline ComplexMatrix inverse_dft_matrix(const Grid& grid) {
  const int n = grid.n();
  ComplexMatrix g(n, n);
  for (int j = 0; j < n; ++j) {
    for (int r = 0; r < n; ++r) {
      const double k = r - n / 2;
      g(j, r) = std::polar(1.0, k * std::numbers::pi * grid[j]);
    }
  }
  return g;
}

inline SpectralData dft_forward(const RealSignal& signal) {
  const Grid grid(signal.n());
  return {dft_matrix(grid) * signal.values.cast<std::complex<double>>(), SpectralKind::clean};
}

/// Re(Fhat* b): the (possibly noisy) Fourier partial sum on the grid. Noise
/// breaks conjugate symmetry, so the imaginary part is dropped explicitly.
inline RealSignal fourier_partial_sum(const SpectralData& data, const Grid& grid) {
  detail::check_length(data.n(), grid.n(), "fourier_partial_sum");
  return {(inverse_dft_matrix(grid) * data.coeffs).real()};
}

/// Fourier coefficients from a rectangle/trapezoid sum of f on a refine*N
/// uniform mesh of [-1, 1), truncated to the N lowest modes. With refine = 1
/// this is exactly dft_forward of the sampled signal.
template <class Fn>
SpectralData synthesize_clean_coeffs(Fn&& f, int n, int refine = 8) {
  const Grid grid(n);
  if (refine < 1) throw ConfigError("refine", "must be at least 1");
  const int fine = refine * n;
  Vector samples(fine);
  Vector xs(fine);
  for (int j = 0; j < fine; ++j) {
    xs(j) = -1.0 + 2.0 * j / fine;
    samples(j) = f(xs(j));
  }
  SpectralData out{ComplexVector(n), SpectralKind::clean};
  for (int k = out.k_min(); k <= out.k_max(); ++k) {
    std::complex<double> acc = 0.0;
    for (int j = 0; j < fine; ++j) acc += samples(j) * std::polar(1.0, -k * std::numbers::pi * xs(j));
    out.mode(k) = acc / static_cast<double>(fine);
  }
  return out;
}

/// b = f + eps with Re eps, Im eps ~ N(0, inv_variance / 2), seeded.
inline SpectralData add_noise(const SpectralData& data, const NoiseModel& noise) {
  if (!(noise.inv_variance >= 0.0)) throw DomainError("add_noise: inv_variance must be non-negative");
  SpectralData out{data.coeffs, SpectralKind::noisy};
  if (noise.inv_variance == 0.0) return out;
  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(0.5 * noise.inv_variance));
  for (Eigen::Index i = 0; i < out.coeffs.size(); ++i) {
    const double re = normal(rng);
    const double im = normal(rng);
    out.coeffs(i) += std::complex<double>(re, im);
  }
  return out;
}

/// 10 log10(||F f||^2 / (N inv_variance)). Pass the DFT of the sampled truth
/// as `clean`.
inline double snr_db(const SpectralData& clean, double inv_variance) {
  if (!(inv_variance > 0.0)) throw DomainError("snr_db: inv_variance must be positive");
  return 10.0 * std::log10(clean.coeffs.squaredNorm() / (clean.n() * inv_variance));
}

inline double inv_variance_for_snr(const SpectralData& clean, double snr) {
  const double energy = clean.coeffs.squaredNorm();
  if (!(energy > 0.0)) throw DomainError("inv_variance_for_snr: clean coefficients have zero energy");
  if (!std::isfinite(snr)) throw DomainError("inv_variance_for_snr: snr must be finite");
  return energy / (clean.n() * std::pow(10.0, snr / 10.0));
}

}  // namespace bsr
