#pragma once

#include <vector>

#include "oacsplit/oac/layer.hpp"

namespace oacsplit::oac {

struct Decomposition {
  std::vector<CMatrix> precoders;  // P_k, N_t x N_i
  std::vector<CMatrix> combiners;  // C_k, N_r x N_o
};

inline CMatrix reconstruct(const Decomposition& d, const ChannelState& ch) {
  if (d.precoders.size() != d.combiners.size() || d.precoders.empty()) throw DimensionError("reconstruct: list sizes differ");
  CMatrix w = d.combiners[0].adjoint() * ch.H() * d.precoders[0];
  for (std::size_t k = 1; k < d.precoders.size(); ++k) w.noalias() += d.combiners[k].adjoint() * ch.H() * d.precoders[k];
  return w;
}

struct DecomposeOptions {
  bool require_feasible = true;  // disable to probe what happens below the bound
  double rank_tolerance = kRankTolerance;
};

namespace detail {

struct TopSubspace {
  CMatrix U, V;  // leading r singular vectors
  RVector S;
};

inline TopSubspace top_subspace(const ChannelState& ch, int r, double tol) {
  if (r > std::min(ch.n_tx(), ch.n_rx())) throw ChannelRankError("rank estimate exceeds min(N_t, N_r)");
  const Svd f = svd(ch.H());
  const Index rank = numerical_rank(f.S, tol);
  if (rank < r) {
    throw ChannelRankError("channel rank " + std::to_string(rank) + " is below the requested " + std::to_string(r) + " streams");
  }
  return {f.U.leftCols(r), f.V.leftCols(r), f.S.head(r)};
}

}  // namespace detail

// Constructs P_k, C_k with sum_k C_k^H H P_k = W. When K r >= N_o a shared
// combiner C is chosen so that C^H H has orthonormal rows spanning the top-r
// right singular subspace; the precoders then solve a pseudo-inverse system.
// Otherwise the roles swap.
inline Decomposition decompose_weight(const CMatrix& W, const ChannelState& ch, int K, int r, DecomposeOptions opt = {}) {
  const Index n_out = W.rows(), n_in = W.cols();
  if (n_out < 1 || n_in < 1 || K < 1 || r < 1) throw DimensionError("decompose_weight: sizes must be positive");
  if (opt.require_feasible && !feasible(K, r, n_in, n_out)) {
    throw FeasibilityError("K r = " + std::to_string(K * r) + " is below min(N_i, N_o) = " + std::to_string(std::min(n_in, n_out)));
  }
  const auto top = detail::top_subspace(ch, r, opt.rank_tolerance);
  const int nt = ch.n_tx(), nr = ch.n_rx();
  Decomposition d;
  if (static_cast<Index>(K) * r >= n_out) {
    const CMatrix C = top.U * top.S.cwiseInverse().asDiagonal();
    CMatrix G = CMatrix::Zero(n_out, static_cast<Index>(K) * nt);
    for (int k = 0; k < K; ++k) {
      CMatrix ck = CMatrix::Zero(nr, n_out);
      const Index first = static_cast<Index>(k) * r;
      const Index width = std::max<Index>(0, std::min<Index>(r, n_out - first));
      if (width > 0) ck.middleCols(first, width) = C.leftCols(width);
      G.middleCols(static_cast<Index>(k) * nt, nt) = ck.adjoint() * ch.H();
      d.combiners.push_back(std::move(ck));
    }
    const CMatrix stack = pinv(G) * W;
    for (int k = 0; k < K; ++k) d.precoders.push_back(stack.middleRows(static_cast<Index>(k) * nt, nt));
  } else {
    const CMatrix P = top.V * top.S.cwiseInverse().asDiagonal();
    CMatrix G = CMatrix::Zero(static_cast<Index>(K) * nr, n_in);
    for (int k = 0; k < K; ++k) {
      CMatrix pk = CMatrix::Zero(nt, n_in);
      const Index first = static_cast<Index>(k) * r;
      const Index width = std::max<Index>(0, std::min<Index>(r, n_in - first));
      if (width > 0) pk.middleCols(first, width) = P.leftCols(width);
      G.middleRows(static_cast<Index>(k) * nr, nr) = ch.H() * pk;
      d.precoders.push_back(std::move(pk));
    }
    const CMatrix stack_h = W * pinv(G);  // = (C_1^H, ..., C_K^H)
    for (int k = 0; k < K; ++k) d.combiners.push_back(stack_h.middleCols(static_cast<Index>(k) * nr, nr).adjoint());
  }
  return d;
}

// Sets the parameters of `layer` so that its equivalent weight on `ch` is W,
// keeping the structure of the layer's design. Requires rank(H) >= r.
inline void install_weight(OacLayer& layer, const CMatrix& W, const ChannelState& ch, double tol = kRankTolerance) {
  require_shape(W, layer.n_out(), layer.n_in(), "install_weight");
  const auto top = detail::top_subspace(ch, layer.r(), tol);
  const Index r = layer.r();
  const int K = layer.K();
  const CMatrix inv_s = top.S.cwiseInverse().asDiagonal();
  if (layer.transmitter_side()) {
    // C^H H = V_r^H, so block k of the output is V_r^H times the k-th precoded block.
    layer.C().value = top.U * inv_s;
    CMatrix padded = CMatrix::Zero(static_cast<Index>(K) * r, layer.n_in());
    padded.topRows(layer.n_out()) = W;
    if (layer.combined()) {
      for (int k = 0; k < K; ++k) layer.Pk(k).value = top.V * padded.middleRows(static_cast<Index>(k) * r, r);
    } else {
      layer.P().value = top.V;
      layer.W0().value = padded;
    }
  } else {
    // H P = U_r, so transmission k delivers the k-th input block on U_r.
    layer.P().value = top.V * inv_s;
    CMatrix padded = CMatrix::Zero(layer.n_out(), static_cast<Index>(K) * r);
    padded.leftCols(layer.n_in()) = W;
    if (layer.combined()) {
      for (int k = 0; k < K; ++k) layer.Ck(k).value = top.U * padded.middleCols(static_cast<Index>(k) * r, r).adjoint();
    } else {
      layer.C().value = top.U;
      layer.W0().value = padded;
    }
  }
}

struct IdealMatrices {
  CMatrix P;  // N_t x r, top right singular vectors
  CMatrix C;  // N_r x r, top left singular vectors
};

// Channel-aware precoder and combiner: C^H H P = diag(top r singular values).
inline IdealMatrices ideal_matrices(const ChannelState& ch, int r) {
  if (r < 1 || r > std::min(ch.n_tx(), ch.n_rx())) throw DimensionError("ideal_matrices: r must lie in [1, min(N_t, N_r)]");
  const Svd f = svd(ch.H());
  return {f.V.leftCols(r), f.U.leftCols(r)};
}

// Installs ideal matrices into the shared precoder and combiner and freezes them.
inline void install_ideal(OacLayer& layer, const ChannelState& ch) {
  const IdealMatrices m = ideal_matrices(ch, layer.r());
  if (layer.has_shared_precoder()) layer.P().value = m.P;
  if (layer.has_shared_combiner()) layer.C().value = m.C;
  layer.set_trainable_shared(false, false);
}

}  // namespace oacsplit::oac
