#pragma once

// Dense kernels shared by the estimators. Storage and products come from
// Eigen; the Cholesky factorization is done here so a breakdown can name
// the failing pivot.

#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "bsr/errors.hpp"

namespace bsr {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;

/// P = L L^T with L lower triangular and a strictly positive diagonal.
class SpdFactorization {
 public:
  SpdFactorization(Matrix lower, double asymmetry) : lower_(std::move(lower)), asymmetry_(asymmetry) {}

  Eigen::Index dim() const { return lower_.rows(); }
  const Matrix& lower() const { return lower_; }

  /// max |P - P^T| of the matrix before it was symmetrized.
  double asymmetry() const { return asymmetry_; }

  Vector solve(const Vector& rhs) const {
    if (rhs.size() != dim()) {
      throw DomainError("spd_solve: rhs has length " + std::to_string(rhs.size()) +
                        ", factor has dimension " + std::to_string(dim()));
    }
    Vector y = lower_.triangularView<Eigen::Lower>().solve(rhs);
    lower_.transpose().triangularView<Eigen::Upper>().solveInPlace(y);
    return y;
  }

  /// Solves L^T x = z; maps standard normals to draws with covariance P^{-1}.
  Vector solve_upper(const Vector& z) const {
    return lower_.transpose().triangularView<Eigen::Upper>().solve(z);
  }

  /// diag(P^{-1}); entry i is the squared norm of column i of L^{-1}.
  Vector inverse_diagonal() const {
    const Matrix linv = lower_.triangularView<Eigen::Lower>().solve(Matrix::Identity(dim(), dim()));
    return linv.colwise().squaredNorm().transpose();
  }

  Matrix inverse() const {
    const Matrix linv = lower_.triangularView<Eigen::Lower>().solve(Matrix::Identity(dim(), dim()));
    return linv.transpose() * linv;
  }

 private:
  Matrix lower_;
  double asymmetry_;
};

/// Cholesky factorization of the symmetric part (P + P^T)/2.
/// Throws NotSpdError with the index of the first non-positive pivot.
inline SpdFactorization spd_factor(const Matrix& p) {
  if (p.rows() != p.cols()) throw DomainError("spd_factor: matrix must be square");
  const Eigen::Index n = p.rows();
  const double asym = n == 0 ? 0.0 : (p - p.transpose()).cwiseAbs().maxCoeff();
  const double scale = n == 0 ? 0.0 : p.cwiseAbs().maxCoeff();
  if (asym > 1e-10 * std::max(scale, 1.0)) {
    throw DomainError("spd_factor: matrix is not symmetric (max asymmetry " + std::to_string(asym) + ")");
  }
  Matrix a = 0.5 * (p + p.transpose());
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double pivot = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(pivot > 0.0)) throw NotSpdError(static_cast<std::size_t>(j), pivot);
    const double d = std::sqrt(pivot);
    l(j, j) = d;
    const Eigen::Index rest = n - j - 1;
    if (rest > 0) {
      l.col(j).tail(rest) =
          (a.col(j).tail(rest) - l.bottomLeftCorner(rest, j) * l.row(j).head(j).transpose()) / d;
    }
  }
  return {std::move(l), asym};
}

inline Vector spd_solve(const SpdFactorization& fact, const Vector& rhs) { return fact.solve(rhs); }

struct EigenEstimate {
  double value = 0.0;        // lower bound on the smallest eigenvalue
  double rayleigh = 0.0;     // Rayleigh quotient at the final iterate
  double residual = 0.0;     // ||P v - rayleigh v|| for unit v
  int iterations = 0;
  bool converged = false;
};

/// Smallest eigenvalue of a symmetric matrix by inverse power iteration.
/// For symmetric P some eigenvalue lies within `residual` of the Rayleigh
/// quotient, so `value = rayleigh - residual` bounds the one found from
/// below. A singular or indefinite P gives a non-positive estimate.
/// If the iteration has not settled after max_iter steps (clustered
/// smallest eigenvalues), a positive definite P gets a certified lower bound
/// by Cholesky bisection below the Rayleigh quotient instead.
inline EigenEstimate min_eig_estimate(const Matrix& p, double rel_tol = 1e-6, int max_iter = 200) {
  if (p.rows() != p.cols() || p.rows() == 0) throw DomainError("min_eig_estimate: matrix must be square and non-empty");
  const Matrix sym = 0.5 * (p + p.transpose());
  const Eigen::PartialPivLU<Matrix> lu(sym);
  const double det_scale = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  EigenEstimate est;
  if (!(det_scale > 0.0) || !std::isfinite(det_scale)) {
    est.converged = true;
    return est;  // exactly singular: smallest |eigenvalue| is zero
  }
  if (Eigen::LLT<Matrix>(sym).info() != Eigen::Success) {
    // Not positive definite, so the smallest eigenvalue is <= 0 and inverse
    // iteration (which finds the one nearest zero) may miss it. Report the
    // Gershgorin bound instead.
    double g = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < sym.rows(); ++i) {
      g = std::min(g, sym(i, i) - (sym.row(i).cwiseAbs().sum() - std::abs(sym(i, i))));
    }
    est.value = std::min(g, 0.0);
    return est;
  }
  std::mt19937_64 rng(0x5eed);
  std::normal_distribution<double> normal;
  Vector v(sym.rows());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = normal(rng);
  v.normalize();
  for (int it = 1; it <= max_iter; ++it) {
    Vector w = lu.solve(v);
    const double wn = w.norm();
    if (!(wn > 0.0) || !std::isfinite(wn)) break;
    v = w / wn;
    const Vector pv = sym * v;
    est.rayleigh = v.dot(pv);
    est.residual = (pv - est.rayleigh * v).norm();
    est.iterations = it;
    if (est.residual <= rel_tol * std::abs(est.rayleigh)) {
      est.converged = true;
      break;
    }
  }
  if (est.converged) {
    est.value = est.rayleigh - est.residual;
    return est;
  }
  // Clustered spectra stall the iteration. The Rayleigh quotient bounds the
  // smallest eigenvalue from above and a successful Cholesky factorization
  // of P - s I proves it exceeds s, so bisect between the two.
  const Matrix eye = Matrix::Identity(sym.rows(), sym.cols());
  double lo = 0.0;
  double hi = est.rayleigh;
  while (hi - lo > rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (Eigen::LLT<Matrix>(sym - mid * eye).info() == Eigen::Success) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  est.value = lo;
  est.converged = true;
  return est;
}

}  // namespace bsr
