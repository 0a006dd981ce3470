#pragma once

// MAP estimation for the two hierarchical models and the Gaussian
// posterior of the signal at fixed hyperparameters.
//
// BSR  (observable y = F^Geg F^Bessel b, A = F^Geg F^CT, M = I - A):
//   J = -(c+N/2-1) log g - (c+N/2-1) log b + g/2 |y - A f|^2 + b/2 |M f|^2 + d g + d b
// GBSR (raw Fourier data b, DFT matrix F):
//   J = -(c+N-1) log g - (c+N/2-1) log b + g |b - F f|^2 + b/2 |M f|^2 + d g + d b
// Both are minimized by block-coordinate descent over (f, g, b); every
// block update is the exact minimizer of J in that block.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>

#include "bsr/errors.hpp"
#include "bsr/fourier.hpp"
#include "bsr/linalg.hpp"
#include "bsr/reprojection.hpp"

namespace bsr {

enum class Method { bsr, gbsr };

inline const char* method_name(Method m) { return m == Method::bsr ? "bsr" : "gbsr"; }

/// Precisions (gamma or gamma-tilde, beta) and the Gamma hyperprior (c, d).
struct HyperParams {
  double likelihood_precision = 1.0;
  double prior_precision = 1.0;
  double shape = 1.0;
  double rate = 1e-4;

  void validate() const {
    if (!(likelihood_precision > 0.0)) throw DomainError("likelihood precision must be positive");
    if (!(prior_precision > 0.0)) throw DomainError("prior precision must be positive");
    if (!(shape > 0.0)) throw DomainError("hyperprior shape must be positive");
    if (!(rate >= 0.0)) throw DomainError("hyperprior rate must be non-negative");
  }
};

/// How the GBSR data term enters the f-update.
///   conjugate_transpose: F^H F = I/N, the exact block minimizer of J.
///   unnormalized:        Fhat* F = I, i.e. the data term weighted N times.
///   dense:               conjugate_transpose, with Re(F^H F) formed explicitly.
enum class GbsrAdjoint { conjugate_transpose, unnormalized, dense };

struct BcdConfig {
  double rel_tol = 1e-8;
  int max_iter = 100;
  double init_likelihood_precision = 1.0;
  double init_prior_precision = 1.0;
  double shape = 1.0;
  double rate = 1e-4;
  GbsrAdjoint adjoint = GbsrAdjoint::conjugate_transpose;

  void validate() const {
    if (!(rel_tol > 0.0)) throw ConfigError("rel_tol", "must be positive");
    if (max_iter < 1) throw ConfigError("max_iter", "must be at least 1");
    if (!(init_likelihood_precision > 0.0) || !(init_prior_precision > 0.0)) {
      throw ConfigError("init_precisions", "must be positive");
    }
    if (!(shape > 0.0)) throw ConfigError("shape", "must be positive");
    if (!(rate > 0.0)) throw ConfigError("rate", "must be positive");
  }
};

struct MapResult {
  RealSignal estimate;
  HyperParams hyper;
  std::vector<double> objective_trace;  // initial value, then one per sweep
  std::vector<double> block_trace;      // after each f, precision, beta update
  int iterations = 0;
  bool converged = false;
};

/// N(mean, precision^{-1}) with the Cholesky factor of the precision.
struct PosteriorGaussian {
  Vector mean;
  Matrix precision;
  SpdFactorization factor;
};

struct CredibleBand {
  Vector lower;
  Vector upper;
  double level = 0.999;
};

// ---------------------------------------------------------------------------
// Shared pieces

/// The matrix A^T A + M^T M whose positive definiteness is the common
/// kernel condition.
inline Matrix common_kernel_matrix(const OperatorSet& ops) {
  const Matrix& a = ops.projector();
  const Matrix mm = Matrix::Identity(ops.n(), ops.n()) - a;
  return a.transpose() * a + mm.transpose() * mm;
}

inline EigenEstimate common_kernel_check(const OperatorSet& ops) {
  return min_eig_estimate(common_kernel_matrix(ops));
}

namespace detail {

inline Vector prior_residual(const OperatorSet& ops, const Vector& f) { return f - ops.projector() * f; }

inline double beta_update(const OperatorSet& ops, const Vector& f, double c, double d) {
  const double n = ops.n();
  return (2.0 * c + n - 2.0) / (prior_residual(ops, f).squaredNorm() + 2.0 * d);
}

inline void check_precisions(double g, double b) {
  if (!(g > 0.0)) throw DomainError("likelihood precision must be positive, got " + std::to_string(g));
  if (!(b > 0.0)) throw DomainError("prior precision must be positive, got " + std::to_string(b));
}

inline double relative_change(double now, double before) {
  return std::abs(now - before) / std::max(std::abs(before), std::numeric_limits<double>::min());
}

/// Normal-equation pieces reused across BCD sweeps.
struct BsrSystem {
  Matrix ata;
  Matrix mtm;
  Vector aty;
};

inline BsrSystem make_bsr_system(const OperatorSet& ops, const Vector& observable) {
  const Matrix& a = ops.projector();
  const Matrix mm = Matrix::Identity(ops.n(), ops.n()) - a;
  return {a.transpose() * a, mm.transpose() * mm, a.transpose() * observable};
}

struct GbsrSystem {
  Matrix mtm;
  Matrix data_gram;  // Re(G^H G) for the chosen adjoint
  Vector data_rhs;   // Re(G^H b)
};

inline GbsrSystem make_gbsr_system(const OperatorSet& ops, const SpectralData& data, GbsrAdjoint adjoint) {
  const int n = ops.n();
  const Matrix mm = Matrix::Identity(n, n) - ops.projector();
  GbsrSystem sys{mm.transpose() * mm, Matrix(), Vector()};
  const ComplexMatrix inv = inverse_dft_matrix(ops.grid());
  switch (adjoint) {
    case GbsrAdjoint::conjugate_transpose:
      sys.data_gram = Matrix::Identity(n, n) / n;
      sys.data_rhs = (inv * data.coeffs).real() / n;
      break;
    case GbsrAdjoint::unnormalized:
      sys.data_gram = Matrix::Identity(n, n);
      sys.data_rhs = (inv * data.coeffs).real();
      break;
    case GbsrAdjoint::dense: {
      const ComplexMatrix f = dft_matrix(ops.grid());
      sys.data_gram = (f.adjoint() * f).real();
      sys.data_rhs = (f.adjoint() * data.coeffs).real();
      break;
    }
  }
  return sys;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// BSR

/// The data vector of the BSR likelihood: the Gegenbauer reconstruction.
inline RealSignal bsr_observable(const OperatorSet& ops, const SpectralData& data) {
  return gegenbauer_reconstruct(ops, data);
}

inline double bsr_objective(const RealSignal& f, const HyperParams& hyper, const RealSignal& observable,
                            const OperatorSet& ops) {
  detail::check_precisions(hyper.likelihood_precision, hyper.prior_precision);
  const double n = ops.n();
  const double c = hyper.shape;
  const double d = hyper.rate;
  const double g = hyper.likelihood_precision;
  const double b = hyper.prior_precision;
  const Vector af = ops.projector() * f.values;
  const double misfit = (observable.values - af).squaredNorm();
  const double prior = (f.values - af).squaredNorm();
  return -(c + n / 2.0 - 1.0) * std::log(g) - (c + n / 2.0 - 1.0) * std::log(b) + 0.5 * g * misfit +
         0.5 * b * prior + d * g + d * b;
}

/// Solves (g A^T A + b M^T M) f = g A^T y.
inline RealSignal bsr_update_f(const HyperParams& hyper, const RealSignal& observable, const OperatorSet& ops) {
  detail::check_precisions(hyper.likelihood_precision, hyper.prior_precision);
  const auto sys = detail::make_bsr_system(ops, observable.values);
  const double g = hyper.likelihood_precision;
  const auto fact = spd_factor(g * sys.ata + hyper.prior_precision * sys.mtm);
  return {fact.solve(g * sys.aty)};
}

inline double bsr_update_gamma(const RealSignal& f, const RealSignal& observable, const OperatorSet& ops, double c,
                               double d) {
  const double n = ops.n();
  const double misfit = (observable.values - ops.projector() * f.values).squaredNorm();
  return (2.0 * c + n - 2.0) / (misfit + 2.0 * d);
}

inline double bsr_update_beta(const RealSignal& f, const OperatorSet& ops, double c, double d) {
  return detail::beta_update(ops, f.values, c, d);
}

namespace detail {

/// Generic BCD driver. `solve_f(g, b)` returns the f-block minimizer,
/// `gamma_of(f)` and `beta_of(f)` the closed-form precision updates.
template <class SolveF, class GammaOf, class Objective>
MapResult run_bcd(const BcdConfig& cfg, int n, SolveF&& solve_f, GammaOf&& gamma_of, Objective&& objective,
                  const OperatorSet& ops) {
  MapResult out;
  out.hyper = {cfg.init_likelihood_precision, cfg.init_prior_precision, cfg.shape, cfg.rate};
  Vector f = Vector::Zero(n);
  double prev = objective(f, out.hyper);
  out.objective_trace.push_back(prev);
  for (int it = 1; it <= cfg.max_iter; ++it) {
    Vector next = solve_f(out.hyper.likelihood_precision, out.hyper.prior_precision);
    out.block_trace.push_back(objective(next, out.hyper));
    out.hyper.likelihood_precision = gamma_of(next);
    out.block_trace.push_back(objective(next, out.hyper));
    out.hyper.prior_precision = beta_update(ops, next, cfg.shape, cfg.rate);
    const double now = objective(next, out.hyper);
    out.block_trace.push_back(now);
    out.objective_trace.push_back(now);
    out.iterations = it;

    const double df = (next - f).norm() / std::max(next.norm(), std::numeric_limits<double>::min());
    f = std::move(next);
    if (relative_change(now, prev) < cfg.rel_tol || df < cfg.rel_tol) {
      out.converged = true;
      break;
    }
    prev = now;
  }
  out.estimate = {std::move(f)};
  return out;
}

}  // namespace detail

/// BSR MAP estimate by block-coordinate descent from f = 0, g = b = 1
/// (or the configured initial precisions).
inline MapResult bsr_map(const SpectralData& data, const OperatorSet& ops, const BcdConfig& cfg = {}) {
  cfg.validate();
  detail::check_length(data.n(), ops.n(), "bsr_map");
  const int n = ops.n();
  const RealSignal y = bsr_observable(ops, data);
  const double c = cfg.shape;
  const double d = cfg.rate;

  if (y.values.isZero(0.0)) {
    MapResult out;
    out.estimate = {Vector::Zero(n)};
    out.hyper = {(2.0 * c + n - 2.0) / (2.0 * d), (2.0 * c + n - 2.0) / (2.0 * d), c, d};
    out.objective_trace.push_back(bsr_objective(out.estimate, out.hyper, y, ops));
    out.converged = true;
    return out;
  }

  const auto sys = detail::make_bsr_system(ops, y.values);
  auto solve_f = [&](double g, double b) -> Vector {
    return spd_factor(g * sys.ata + b * sys.mtm).solve(g * sys.aty);
  };
  auto gamma_of = [&](const Vector& f) { return bsr_update_gamma({f}, y, ops, c, d); };
  auto objective = [&](const Vector& f, const HyperParams& h) { return bsr_objective({f}, h, y, ops); };
  return detail::run_bcd(cfg, n, solve_f, gamma_of, objective, ops);
}

// ---------------------------------------------------------------------------
// GBSR

/// `dft` is the matrix F of dft_matrix(ops.grid()).
inline double gbsr_objective(const RealSignal& f, const HyperParams& hyper, const SpectralData& data,
                             const OperatorSet& ops, const ComplexMatrix& dft) {
  detail::check_precisions(hyper.likelihood_precision, hyper.prior_precision);
  const double n = ops.n();
  const double c = hyper.shape;
  const double d = hyper.rate;
  const double g = hyper.likelihood_precision;
  const double b = hyper.prior_precision;
  const double misfit = (data.coeffs - dft * f.values.cast<std::complex<double>>()).squaredNorm();
  const double prior = detail::prior_residual(ops, f.values).squaredNorm();
  return -(c + n - 1.0) * std::log(g) - (c + n / 2.0 - 1.0) * std::log(b) + g * misfit + 0.5 * b * prior +
         d * g + d * b;
}

inline RealSignal gbsr_update_f(const HyperParams& hyper, const SpectralData& data, const OperatorSet& ops,
                                GbsrAdjoint adjoint = GbsrAdjoint::conjugate_transpose) {
  detail::check_precisions(hyper.likelihood_precision, hyper.prior_precision);
  const auto sys = detail::make_gbsr_system(ops, data, adjoint);
  const double g2 = 2.0 * hyper.likelihood_precision;
  return {spd_factor(g2 * sys.data_gram + hyper.prior_precision * sys.mtm).solve(g2 * sys.data_rhs)};
}

inline double gbsr_update_gamma(const RealSignal& f, const SpectralData& data, const ComplexMatrix& dft, double c,
                                double d) {
  const double n = data.n();
  const double misfit = (data.coeffs - dft * f.values.cast<std::complex<double>>()).squaredNorm();
  return (c + n - 1.0) / (misfit + d);
}

inline MapResult gbsr_map(const SpectralData& data, const OperatorSet& ops, const BcdConfig& cfg = {}) {
  cfg.validate();
  detail::check_length(data.n(), ops.n(), "gbsr_map");
  const int n = ops.n();
  const double c = cfg.shape;
  const double d = cfg.rate;
  const ComplexMatrix dft = dft_matrix(ops.grid());

  if (data.coeffs.isZero(0.0)) {
    MapResult out;
    out.estimate = {Vector::Zero(n)};
    out.hyper = {(c + n - 1.0) / d, (2.0 * c + n - 2.0) / (2.0 * d), c, d};
    out.objective_trace.push_back(gbsr_objective(out.estimate, out.hyper, data, ops, dft));
    out.converged = true;
    return out;
  }

  const auto sys = detail::make_gbsr_system(ops, data, cfg.adjoint);
  auto solve_f = [&](double g, double b) -> Vector {
    return spd_factor(2.0 * g * sys.data_gram + b * sys.mtm).solve(2.0 * g * sys.data_rhs);
  };
  auto gamma_of = [&](const Vector& f) { return gbsr_update_gamma({f}, data, dft, c, d); };
  auto objective = [&](const Vector& f, const HyperParams& h) { return gbsr_objective({f}, h, data, ops, dft); };
  return detail::run_bcd(cfg, n, solve_f, gamma_of, objective, ops);
}

/// Largest relative gap between the returned precisions and the closed-form
/// updates evaluated at the returned estimate.
inline double stationarity_gap(Method method, const MapResult& result, const SpectralData& data,
                               const OperatorSet& ops) {
  const double c = result.hyper.shape;
  const double d = result.hyper.rate;
  double g = 0.0;
  if (method == Method::bsr) {
    g = bsr_update_gamma(result.estimate, bsr_observable(ops, data), ops, c, d);
  } else {
    g = gbsr_update_gamma(result.estimate, data, dft_matrix(ops.grid()), c, d);
  }
  const double b = bsr_update_beta(result.estimate, ops, c, d);
  return std::max(detail::relative_change(g, result.hyper.likelihood_precision),
                  detail::relative_change(b, result.hyper.prior_precision));
}

// ---------------------------------------------------------------------------
// Fixed-hyperparameter posterior

inline PosteriorGaussian fixed_posterior(Method method, const HyperParams& hyper, const SpectralData& data,
                                         const OperatorSet& ops,
                                         GbsrAdjoint adjoint = GbsrAdjoint::conjugate_transpose) {
  detail::check_precisions(hyper.likelihood_precision, hyper.prior_precision);
  detail::check_length(data.n(), ops.n(), "fixed_posterior");
  Matrix precision;
  Vector rhs;
  if (method == Method::bsr) {
    const auto sys = detail::make_bsr_system(ops, bsr_observable(ops, data).values);
    const double g = hyper.likelihood_precision;
    precision = g * sys.ata + hyper.prior_precision * sys.mtm;
    rhs = g * sys.aty;
  } else {
    const auto sys = detail::make_gbsr_system(ops, data, adjoint);
    const double g2 = 2.0 * hyper.likelihood_precision;
    precision = g2 * sys.data_gram + hyper.prior_precision * sys.mtm;
    rhs = g2 * sys.data_rhs;
  }
  precision = 0.5 * (precision + precision.transpose());
  auto factor = spd_factor(precision);
  Vector mean = factor.solve(rhs);
  return {std::move(mean), std::move(precision), std::move(factor)};
}

/// N x n_samples matrix of draws mean + L^{-T} z, z ~ N(0, I).
inline Matrix sample_posterior(const PosteriorGaussian& post, int n_samples, std::uint64_t seed) {
  if (n_samples < 2) throw DomainError("sample_posterior: need at least 2 samples");
  const Eigen::Index n = post.mean.size();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Matrix z(n, n_samples);
  for (Eigen::Index s = 0; s < n_samples; ++s) {
    for (Eigen::Index i = 0; i < n; ++i) z(i, s) = normal(rng);
  }
  Matrix draws = post.factor.lower().transpose().triangularView<Eigen::Upper>().solve(z);
  draws.colwise() += post.mean;
  return draws;
}

namespace detail {
inline void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw DomainError("credible level must lie in (0, 1), got " + std::to_string(level));
  }
}

/// Linear-interpolation quantile of a sorted range.
inline double sorted_quantile(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}
}  // namespace detail

/// Componentwise empirical (1-level)/2 and 1-(1-level)/2 quantiles of the
/// columns of `samples`.
inline CredibleBand credible_band(const Matrix& samples, double level) {
  detail::check_level(level);
  if (samples.cols() < 2) throw DomainError("credible_band: need at least 2 samples");
  const double tail = 0.5 * (1.0 - level);
  CredibleBand band{Vector(samples.rows()), Vector(samples.rows()), level};
  std::vector<double> row(static_cast<std::size_t>(samples.cols()));
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    for (Eigen::Index s = 0; s < samples.cols(); ++s) row[static_cast<std::size_t>(s)] = samples(i, s);
    std::sort(row.begin(), row.end());
    band.lower(i) = detail::sorted_quantile(row, tail);
    band.upper(i) = detail::sorted_quantile(row, 1.0 - tail);
  }
  return band;
}

/// mean +- z sqrt(diag C), exact for the Gaussian posterior.
inline CredibleBand analytic_band(const PosteriorGaussian& post, double level) {
  detail::check_level(level);
  const boost::math::normal_distribution<double> normal;
  const double z = boost::math::quantile(normal, 1.0 - 0.5 * (1.0 - level));
  const Vector sd = post.factor.inverse_diagonal().cwiseSqrt();
  return {post.mean - z * sd, post.mean + z * sd, level};
}

}  // namespace bsr
