#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Dense>

#include "oacsplit/errors.hpp"
#include "oacsplit/rng.hpp"

namespace oacsplit {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
using Index = Eigen::Index;

// Singular values below this fraction of the largest one are treated as zero.
inline constexpr double kPinvTolerance = 1e-10;
// Default relative threshold for numerical rank.
inline constexpr double kRankTolerance = 1e-8;

struct Svd {
  CMatrix U;  // rows x p, orthonormal columns
  RVector S;  // p values, descending, nonnegative
  CMatrix V;  // cols x p, orthonormal columns
};

inline void require_shape(const CMatrix& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                         ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

// Thin SVD, p = min(rows, cols). With `full` set, U and V are square.
//
// Phase convention: the first entry of each U column whose magnitude exceeds
// 1e-12 of the column's largest entry is rotated onto the positive real axis,
// and the matching V column receives the same rotation.
inline Svd svd(const CMatrix& m, bool full = false) {
  if (!m.allFinite()) throw DecompositionError("svd: input has non-finite entries");
  if (m.size() == 0) {
    return {CMatrix::Identity(m.rows(), full ? m.rows() : 0), RVector(0),
            CMatrix::Identity(m.cols(), full ? m.cols() : 0)};
  }
  const unsigned options = full ? (Eigen::ComputeFullU | Eigen::ComputeFullV) : (Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::JacobiSVD<CMatrix> solver(m, options);
  Svd out{solver.matrixU(), solver.singularValues(), solver.matrixV()};
  if (!out.U.allFinite() || !out.V.allFinite() || !out.S.allFinite()) {
    throw DecompositionError("svd: iteration did not converge to a finite factorization");
  }
  const Eigen::Index cols = std::min(out.U.cols(), out.V.cols());
  for (Eigen::Index j = 0; j < cols; ++j) {
    auto u = out.U.col(j);
    const double peak = u.cwiseAbs().maxCoeff();
    if (peak == 0.0) continue;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double mag = std::abs(u(i));
      if (mag > 1e-12 * peak) {
        const cplx rot = std::conj(u(i)) / mag;
        out.U.col(j) *= rot;
        out.V.col(j) *= rot;
        break;
      }
    }
  }
  // Any extra columns of a full factorization carry no singular value pairing.
  for (Eigen::Index j = cols; j < out.U.cols(); ++j) {
    auto u = out.U.col(j);
    const double peak = u.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      const double mag = std::abs(u(i));
      if (mag > 1e-12 * peak) {
        u *= std::conj(u(i)) / mag;
        break;
      }
    }
  }
  for (Eigen::Index j = cols; j < out.V.cols(); ++j) {
    auto v = out.V.col(j);
    const double peak = v.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      const double mag = std::abs(v(i));
      if (mag > 1e-12 * peak) {
        v *= std::conj(v(i)) / mag;
        break;
      }
    }
  }
  return out;
}

inline Eigen::Index numerical_rank(const RVector& singular_values, double rel_tol = kRankTolerance) {
  if (singular_values.size() == 0 || singular_values(0) <= 0.0) return 0;
  const double cut = rel_tol * singular_values(0);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < singular_values.size(); ++i) {
    if (singular_values(i) > cut) ++r;
  }
  return r;
}

inline Eigen::Index numerical_rank(const CMatrix& m, double rel_tol = kRankTolerance) {
  return numerical_rank(svd(m).S, rel_tol);
}

// Moore-Penrose pseudo-inverse, discarding singular values below tol * S[0].
inline CMatrix pinv(const CMatrix& m, double tol = kPinvTolerance) {
  if (tol < 0.0) throw DimensionError("pinv: tolerance must be nonnegative");
  CMatrix out = CMatrix::Zero(m.cols(), m.rows());
  if (m.size() == 0) return out;
  const Svd f = svd(m);
  if (f.S.size() == 0 || f.S(0) <= 0.0) return out;
  const double cut = tol * f.S(0);
  for (Eigen::Index i = 0; i < f.S.size(); ++i) {
    if (f.S(i) > cut) out.noalias() += (f.V.col(i) / f.S(i)) * f.U.col(i).adjoint();
  }
  return out;
}

inline CMatrix kron(const CMatrix& a, const CMatrix& b) {
  CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

// Matrix with i.i.d. CN(0, variance) entries, filled column by column.
inline CMatrix random_complex(Eigen::Index rows, Eigen::Index cols, Rng& rng, double variance = 1.0) {
  CMatrix out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = rng.complex_normal(variance);
  }
  return out;
}

inline double relative_error(const CMatrix& actual, const CMatrix& expected) {
  const double denom = expected.norm();
  const double diff = (actual - expected).norm();
  return denom > 0.0 ? diff / denom : diff;
}

}  // namespace oacsplit
