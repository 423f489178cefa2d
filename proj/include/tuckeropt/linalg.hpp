#pragma once

// Matrix kernels behind the singular-value machinery: a deterministic thin
// SVD, Eckart-Young truncation, Delta-rank and numerical rank, and a few
// orthonormal-basis helpers used when assembling Tucker factors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "tuckeropt/error.hpp"
#include "tuckeropt/tensor.hpp"

namespace tuckeropt {

inline constexpr double kDefaultRankTol = 1e-12;

struct SvdResult {
  Matrix U;      // m x q, orthonormal columns
  Vector sigma;  // q, non-increasing, non-negative
  Matrix V;      // n x q, orthonormal columns
};

namespace detail {

/// Flips singular pairs so that the largest-magnitude entry of each left
/// singular vector is non-negative (ties resolved by the lowest row).
inline void fix_signs(Matrix& u, Matrix* v) {
  for (Eigen::Index j = 0; j < u.cols(); ++j) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index i = 0; i < u.rows(); ++i) {
      const double a = std::abs(u(i, j));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (u.rows() > 0 && u(best, j) < 0.0) {
      u.col(j) *= -1.0;
      if (v != nullptr) v->col(j) *= -1.0;
    }
  }
}

}  // namespace detail

/// Thin SVD with a deterministic sign convention.
inline SvdResult thin_svd(const Matrix& m) {
  if (!m.allFinite()) throw NonFiniteError("thin_svd: non-finite input");
  const Eigen::Index q = std::min(m.rows(), m.cols());
  SvdResult out;
  if (q == 0) {
    out.U = Matrix(m.rows(), 0);
    out.V = Matrix(m.cols(), 0);
    out.sigma = Vector(0);
    return out;
  }
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
  out.U = svd.matrixU();
  out.V = svd.matrixV();
  out.sigma = svd.singularValues();
  detail::fix_signs(out.U, &out.V);
  return out;
}

inline Vector singular_values(const Matrix& m) {
  if (!m.allFinite()) throw NonFiniteError("singular_values: non-finite input");
  if (m.rows() == 0 || m.cols() == 0) return Vector(0);
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues();
}

/// Eckart-Young truncation U_r diag(sigma_1..r) V_r^T.
inline Matrix best_rank_approx(const Matrix& m, std::size_t r) {
  const auto q = static_cast<std::size_t>(std::min(m.rows(), m.cols()));
  if (r > q)
    throw PreconditionError("best_rank_approx: rank " + std::to_string(r) +
                            " exceeds min(rows, cols) = " + std::to_string(q));
  if (r == 0) return Matrix::Zero(m.rows(), m.cols());
  const SvdResult s = thin_svd(m);
  const auto rr = static_cast<Eigen::Index>(r);
  return s.U.leftCols(rr) * s.sigma.head(rr).asDiagonal() *
         s.V.leftCols(rr).transpose();
}

/// rank_Delta: min{i >= 0 : sigma_{i+1} <= delta}, with sigma past the end = 0.
inline std::size_t delta_rank(std::span<const double> sigma, double delta) {
  if (!(delta > 0.0)) throw PreconditionError("delta_rank: delta must be > 0");
  std::size_t i = 0;
  while (i < sigma.size() && sigma[i] > delta) ++i;
  return i;
}

inline std::size_t delta_rank(const Vector& sigma, double delta) {
  return delta_rank(std::span<const double>(sigma.data(), sigma.size()), delta);
}

/// Number of singular values strictly above tau * sigma_1.
inline std::size_t numerical_rank_of(const Vector& sigma,
                                     double tau = kDefaultRankTol) {
  if (sigma.size() == 0 || sigma(0) <= 0.0) return 0;
  std::size_t r = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > tau * sigma(0)) ++r;
  return r;
}

inline std::size_t numerical_rank(const Matrix& m, double tau = kDefaultRankTol) {
  return numerical_rank_of(singular_values(m), tau);
}

/// Orthonormal basis of range(m) together with the coefficients R such that
/// m == Q * R. Rank is decided relative to the largest singular value.
struct RangeFactor {
  Matrix Q;  // rows(m) x q
  Matrix R;  // q x cols(m)
};

inline RangeFactor orthonormal_range(const Matrix& m,
                                     double tau = kDefaultRankTol) {
  const SvdResult s = thin_svd(m);
  const auto q = static_cast<Eigen::Index>(numerical_rank_of(s.sigma, tau));
  RangeFactor out;
  out.Q = s.U.leftCols(q);
  out.R = s.sigma.head(q).asDiagonal() * s.V.leftCols(q).transpose();
  return out;
}

/// Moore-Penrose pseudo-inverse with singular values below tau * sigma_1
/// treated as zero.
inline Matrix pseudo_inverse(const Matrix& m, double tau = kDefaultRankTol) {
  const SvdResult s = thin_svd(m);
  const auto q = static_cast<Eigen::Index>(numerical_rank_of(s.sigma, tau));
  return s.V.leftCols(q) * s.sigma.head(q).cwiseInverse().asDiagonal() *
         s.U.leftCols(q).transpose();
}

/// Appends `count` orthonormal columns orthogonal to the columns of `basis`.
/// Columns come from the identity: each step takes the coordinate vector with
/// the largest residual after projecting out everything chosen so far (lowest
/// index on ties), so the result is fully deterministic.
inline Matrix orthonormal_complement(const Matrix& basis, std::size_t count) {
  const Eigen::Index n = basis.rows();
  if (static_cast<std::size_t>(basis.cols()) + count > static_cast<std::size_t>(n))
    throw PreconditionError("orthonormal_complement: cannot add " +
                            std::to_string(count) + " columns to a " +
                            std::to_string(basis.cols()) + "-column basis in R^" +
                            std::to_string(n));
  Matrix all(n, basis.cols() + static_cast<Eigen::Index>(count));
  all.leftCols(basis.cols()) = basis;
  Eigen::Index have = basis.cols();
  for (std::size_t c = 0; c < count; ++c) {
    // residual norms of e_i: 1 - ||row i of the current basis||^2
    Eigen::Index best = 0;
    double best_res = -1.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double res = 1.0 - all.row(i).head(have).squaredNorm();
      if (res > best_res + 1e-14) {
        best_res = res;
        best = i;
      }
    }
    Vector v = Vector::Unit(n, best);
    for (int pass = 0; pass < 2; ++pass)
      v -= all.leftCols(have) * (all.leftCols(have).transpose() * v);
    v.normalize();
    all.col(have++) = v;
  }
  return all.rightCols(static_cast<Eigen::Index>(count));
}

/// Orthonormal columns with the thin_svd sign convention applied per column.
inline Matrix sign_normalized(Matrix q) {
  detail::fix_signs(q, nullptr);
  return q;
}

/// ||Q^T Q - I||_F.
inline double orthonormality_defect(const Matrix& q) {
  return (q.transpose() * q - Matrix::Identity(q.cols(), q.cols())).norm();
}

}  // namespace tuckeropt
