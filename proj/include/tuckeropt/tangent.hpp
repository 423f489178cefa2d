#pragma once

// Structured tangent-cone vectors of M_{<=r} at a Tucker anchor
// X = G x_k U_k (rank rbar):
//
//   V = C x_k [U_k  Ucomp_k] + sum_k G x_k Udot_k x_{j != k} U_j
//
// with U_k^T [Ucomp_k Udot_k] = 0 and Ucomp_k^T Udot_k = 0.

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "tuckeropt/error.hpp"
#include "tuckeropt/linalg.hpp"
#include "tuckeropt/tensor.hpp"
#include "tuckeropt/tucker.hpp"

namespace tuckeropt {

struct TangentVector {
  TuckerTensor anchor;
  RankTuple bound;             // r, the variety the vector is tangent to
  DenseTensor core;            // C, dims r_1 x ... x r_d
  std::vector<Matrix> udot;    // n_k x rbar_k
  std::vector<Matrix> ucomp;   // n_k x (r_k - rbar_k)

  /// The zero vector at `anchor` for bound `r`.
  static TangentVector zero(const TuckerTensor& anchor, const RankTuple& r,
                            std::vector<Matrix> ucomp) {
    TangentVector v;
    v.anchor = anchor;
    v.bound = r;
    v.core = DenseTensor(r.values());
    for (std::size_t k = 0; k < anchor.order(); ++k)
      v.udot.push_back(Matrix::Zero(anchor.factor(k).rows(), anchor.factor(k).cols()));
    v.ucomp = std::move(ucomp);
    return v;
  }

  /// [U_k  Ucomp_k], the mode-k factor multiplying the core C.
  Matrix extended_factor(std::size_t k) const {
    const Matrix& u = anchor.factor(k);
    Matrix s(u.rows(), u.cols() + ucomp[k].cols());
    s << u, ucomp[k];
    return s;
  }

  /// ||V||_F^2 = ||C||^2 + sum_k ||Udot_k G_(k)||^2 (the terms are orthogonal).
  double norm_squared() const {
    double s = fro_norm(core);
    s *= s;
    for (std::size_t k = 0; k < udot.size(); ++k) {
      if (udot[k].cols() == 0) continue;
      s += (udot[k] * unfold(anchor.core(), k)).squaredNorm();
    }
    return s;
  }
  double norm() const { return std::sqrt(norm_squared()); }

  TangentVector scaled(double c) const {
    TangentVector v = *this;
    v.core *= c;
    for (Matrix& m : v.udot) m *= c;
    return v;
  }

  /// Largest violation of the orthogonality constraints of the parametrization.
  double constraint_defect() const {
    double m = 0.0;
    for (std::size_t k = 0; k < udot.size(); ++k) {
      const Matrix& u = anchor.factor(k);
      if (ucomp[k].cols() > 0) {
        m = std::max(m, (u.transpose() * ucomp[k]).norm());
        m = std::max(m, (ucomp[k].transpose() * udot[k]).norm());
        m = std::max(m, orthonormality_defect(ucomp[k]));
      }
      m = std::max(m, (u.transpose() * udot[k]).norm());
    }
    return m;
  }
};

/// Ambient tensor represented by V (used by tests and oracles; the solvers
/// never densify).
inline DenseTensor embed(const TangentVector& v) {
  const std::size_t d = v.anchor.order();
  DenseTensor out(v.anchor.dims());
  {
    DenseTensor term = v.core;
    for (std::size_t k = 0; k < d; ++k) term = mode_product(term, k, v.extended_factor(k));
    out += term;
  }
  for (std::size_t k = 0; k < d; ++k) {
    if (v.udot[k].cols() == 0 || v.udot[k].isZero(0.0)) continue;
    DenseTensor term = v.anchor.core();
    for (std::size_t j = 0; j < d; ++j)
      term = mode_product(term, j, j == k ? v.udot[k] : v.anchor.factor(j));
    out += term;
  }
  return out;
}

/// Values of embed(V) at the given coordinates, computed without densifying.
inline std::vector<double> tangent_entries(const TangentVector& v,
                                           std::span<const std::size_t> flat_idx) {
  const std::size_t d = v.anchor.order();
  std::vector<Matrix> ext(d);
  for (std::size_t k = 0; k < d; ++k) ext[k] = v.extended_factor(k);
  std::vector<double> out = tucker_entries(v.core, ext, flat_idx);
  for (std::size_t k = 0; k < d; ++k) {
    if (v.udot[k].cols() == 0 || v.udot[k].isZero(0.0)) continue;
    std::vector<Matrix> f = v.anchor.factors();
    f[k] = v.udot[k];
    const std::vector<double> term = tucker_entries(v.anchor.core(), f, flat_idx);
    for (std::size_t e = 0; e < out.size(); ++e) out[e] += term[e];
  }
  return out;
}

/// Exact Tucker representation of X + s V.
///
/// Mode-k factor [U_k  Ucomp_k  Q_k] with Q_k an orthonormal basis of
/// span(Udot_k); the core has G in the leading corner, s C in the leading
/// r-block and s (G x_k R_k) in the block that is Q-range in mode k and
/// U-range elsewhere (Udot_k = Q_k R_k). Numerically zero directions are
/// removed afterwards so the full-row-rank invariant holds.
inline TuckerTensor add_scaled_tangent(const TuckerTensor& x, double s,
                                       const TangentVector& v,
                                       double tau = kDefaultRankTol) {
  if (!(v.anchor == x))
    throw PreconditionError("add_scaled_tangent: tangent vector anchored elsewhere");
  const std::size_t d = x.order();
  const RankTuple rbar = x.rank();

  std::vector<RangeFactor> qr(d);
  std::vector<std::size_t> rk(d), qk(d), total(d);
  for (std::size_t k = 0; k < d; ++k) {
    rk[k] = v.core.dim(k);  // rbar_k + (r_k - rbar_k)
    if (s != 0.0 && v.udot[k].cols() > 0 && !v.udot[k].isZero(0.0))
      qr[k] = orthonormal_range(v.udot[k], tau);
    else
      qr[k] = RangeFactor{Matrix(x.dims()[k], 0), Matrix(0, rbar[k])};
    qk[k] = static_cast<std::size_t>(qr[k].Q.cols());
    total[k] = rk[k] + qk[k];
  }

  DenseTensor core(total);
  // s * C in the leading r-block
  {
    const DenseTensor& c = v.core;
    std::vector<std::size_t> idx(d, 0);
    for (std::size_t lin = 0; lin < c.size(); ++lin) {
      core(idx) += s * c.values()[lin];
      for (std::size_t k = 0; k < d; ++k) {
        if (++idx[k] < c.dim(k)) break;
        idx[k] = 0;
      }
    }
  }
  // G in the U-corner, plus s * G x_k R_k in the (Q_k, U_{-k}) blocks
  auto add_block = [&](const DenseTensor& block, const std::vector<std::size_t>& offset,
                       double scale) {
    std::vector<std::size_t> idx(d, 0), dst(d);
    for (std::size_t lin = 0; lin < block.size(); ++lin) {
      for (std::size_t k = 0; k < d; ++k) dst[k] = idx[k] + offset[k];
      core(dst) += scale * block.values()[lin];
      for (std::size_t k = 0; k < d; ++k) {
        if (++idx[k] < block.dim(k)) break;
        idx[k] = 0;
      }
    }
  };
  add_block(x.core(), std::vector<std::size_t>(d, 0), 1.0);
  for (std::size_t k = 0; k < d; ++k) {
    if (qk[k] == 0) continue;
    std::vector<std::size_t> offset(d, 0);
    offset[k] = rk[k];
    add_block(mode_product(x.core(), k, qr[k].R), offset, s);
  }

  std::vector<Matrix> factors(d);
  for (std::size_t k = 0; k < d; ++k) {
    Matrix f(x.dims()[k], static_cast<Eigen::Index>(total[k]));
    f << x.factor(k), v.ucomp[k], qr[k].Q;
    factors[k] = std::move(f);
  }
  TuckerTensor out(x.dims(), std::move(core), std::move(factors));
  return recompress(out, std::nullopt, tau);
}

}  // namespace tuckeropt
