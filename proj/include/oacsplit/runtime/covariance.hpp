#pragma once

#include "oacsplit/linalg.hpp"

namespace oacsplit::runtime {

// Exponential moving average of the received-signal covariance.
class CovarianceTracker {
 public:
  CovarianceTracker() = default;
  CovarianceTracker(Index dim, double alpha) : dim_(dim), alpha_(alpha), r_bar_(CMatrix::Zero(dim, dim)) {
    if (dim < 1) throw DimensionError("covariance tracker: dimension must be positive");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw DimensionError("covariance tracker: alpha must lie in [0, 1)");
  }

  Index dim() const { return dim_; }
  double alpha() const { return alpha_; }
  std::size_t updates() const { return updates_; }
  const CMatrix& value() const { return r_bar_; }

  // Folds in Y Y^H / cols for a block of column signals.
  void update(const CMatrix& y) {
    if (y.rows() != dim_) throw DimensionError("covariance update: block has " + std::to_string(y.rows()) + " rows, tracker " + std::to_string(dim_));
    if (y.cols() == 0) throw DimensionError("covariance update: empty block");
    const CMatrix batch = y * y.adjoint() / static_cast<double>(y.cols());
    r_bar_ = alpha_ * r_bar_ + (1.0 - alpha_) * batch;
    r_bar_ = 0.5 * (r_bar_ + r_bar_.adjoint()).eval();
    ++updates_;
  }

  // Singular vectors beyond the leading r, dim x (dim - r); empty when r >= dim.
  CMatrix trailing_subspace(Index r) const {
    if (r < 0) throw DimensionError("trailing_subspace: r must be nonnegative");
    if (r >= dim_) return CMatrix(dim_, 0);
    return svd(r_bar_).U.rightCols(dim_ - r);
  }

 private:
  Index dim_ = 0;
  double alpha_ = 0.0;
  CMatrix r_bar_;
  std::size_t updates_ = 0;
};

// Penalty ||U_w^H C||_F^2 with U_w the trailing subspace; returns its value
// and the gradient 2 U_w U_w^H C.
struct CommTerm {
  double value = 0.0;
  CMatrix grad;
};

inline CommTerm comm_loss_combiner(const CMatrix& trailing, const CMatrix& c) {
  if (trailing.cols() == 0) return {0.0, CMatrix::Zero(c.rows(), c.cols())};
  if (trailing.rows() != c.rows()) throw DimensionError("comm loss: combiner rows must match the tracker dimension");
  const CMatrix proj = trailing.adjoint() * c;
  return {proj.squaredNorm(), 2.0 * trailing * proj};
}

// Penalty (1 / 2B^2) ||u^H V_w||_F^2 on a precoded block u (N_t x B); the
// gradient with respect to u is (1 / B^2) V_w V_w^H u.
inline CommTerm comm_loss_signal(const CMatrix& trailing, const CMatrix& u) {
  if (trailing.cols() == 0) return {0.0, CMatrix::Zero(u.rows(), u.cols())};
  if (trailing.rows() != u.rows()) throw DimensionError("comm loss: signal rows must match the tracker dimension");
  const double b2 = static_cast<double>(u.cols()) * static_cast<double>(u.cols());
  const CMatrix proj = trailing.adjoint() * u;
  return {proj.squaredNorm() / (2.0 * b2), trailing * proj / b2};
}

}  // namespace oacsplit::runtime
