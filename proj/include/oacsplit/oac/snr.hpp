#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "oacsplit/oac/layer.hpp"

namespace oacsplit::oac {

struct SubchannelSnr {
  int k = 0;  // transmission, 0-based
  int t = 0;  // stream within the transmission, 0-based
  double forward_db = 0.0;
  double backward_db = 0.0;        // Ã taken as an amplitude (default)
  double backward_power_db = 0.0;  // Ã taken as a power (divides by Ã^2)
};

struct SnrReport {
  std::vector<SubchannelSnr> subchannels;
  // Which reading of Ã the backward_db column uses.
  std::string backward_convention = "amplitude";
  double min_forward_db() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& s : subchannels) m = std::min(m, s.forward_db);
    return m;
  }
  double min_backward_db() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& s : subchannels) m = std::min(m, s.backward_db);
    return m;
  }
};

inline double to_db(double ratio) {
  if (std::isinf(ratio)) return ratio;
  return 10.0 * std::log10(ratio);
}

// Per-subchannel SNRs with batch-empirical expectations:
//   forward  (k, t): E|c_t^H H x_{t,k}|^2 N_r / P_n
//   backward (k, t): E|p_t^T H^T conj(C_k g_y)|^2 N_t / (Ã P_n)
// with x_{t,k} the unit-power precoded block, c_t and p_t the t-th columns of
// the shared combiner / precoder. Designs without a shared matrix on one side
// use the unit vector matched to the other side's stream (H p_t or H^H c_t,
// normalized). Signal powers scale with tx_power. P_n = 0 yields +inf.
namespace detail {

// Shared core: xt(k) is the unit-power precoded block, back(k) the backward
// block before its normalization, a_tilde(k) that block's amplitude.
template <class Xt, class Back, class At>
SnrReport snr_core(const OacLayer& layer, const ChannelState& ch, double cols, double noise_power, double tx_power, Xt&& xt_of, Back&& back_of,
                   At&& a_tilde_of) {
  const CMatrix& H = ch.H();
  const double inf = std::numeric_limits<double>::infinity();
  SnrReport rep;
  const Index streams_total = layer.transmitter_side() ? layer.n_out() : layer.n_in();
  for (int k = 0; k < layer.K(); ++k) {
    const CMatrix xt = xt_of(k);
    const CMatrix back = back_of(k);
    const double a_tilde = a_tilde_of(k);
    for (int t = 0; t < layer.r(); ++t) {
      if (static_cast<Index>(k) * layer.r() + t >= streams_total) break;
      CVector c, p;
      if (layer.has_shared_combiner()) c = layer.C().value.col(t);
      if (layer.has_shared_precoder()) p = layer.P().value.col(t);
      if (!layer.has_shared_combiner()) {
        const CVector hp = H * p;
        c = hp.norm() > 0.0 ? CVector(hp / hp.norm()) : hp;
      }
      if (!layer.has_shared_precoder()) {
        const CVector hc = H.adjoint() * c;
        p = hc.norm() > 0.0 ? CVector(hc / hc.norm()) : hc;
      }
      const CVector ch_row = H.adjoint() * c;
      const CVector hp = H * p;
      const double sig_f = tx_power * (ch_row.adjoint() * xt).squaredNorm() / cols;
      const double sig_b = tx_power * (hp.transpose() * back).squaredNorm() / cols;
      SubchannelSnr s;
      s.k = k;
      s.t = t;
      if (noise_power == 0.0) {
        s.forward_db = s.backward_db = s.backward_power_db = inf;
      } else {
        s.forward_db = to_db(sig_f * ch.n_rx() / noise_power);
        s.backward_db = to_db(sig_b * ch.n_tx() / (a_tilde * noise_power));
        s.backward_power_db = to_db(sig_b * ch.n_tx() / (a_tilde * a_tilde * noise_power));
      }
      rep.subchannels.push_back(s);
    }
  }
  return rep;
}

}  // namespace detail

inline SnrReport snr_report(const OacLayer& layer, const ChannelState& ch, const CMatrix& x, const CMatrix& g_y, double noise_power,
                            double tx_power = 1.0) {
  if (noise_power < 0.0) throw DimensionError("snr_report: noise power must be nonnegative");
  if (x.rows() != layer.n_in() || g_y.rows() != layer.n_out() || x.cols() != g_y.cols()) {
    throw DimensionError("snr_report: batch shapes do not match the layer");
  }
  return detail::snr_core(
      layer, ch, static_cast<double>(x.cols()), noise_power, tx_power, [&](int k) { return power_normalize(layer.precoder(k) * x).first; },
      [&](int k) { return CMatrix((layer.combiner(k) * g_y).conjugate()); },
      [&](int k) { return power_normalize((layer.combiner(k) * g_y).conjugate()).second; });
}

// Same report from the blocks already recorded in a pass's transcripts.
inline SnrReport snr_report(const OacLayer& layer, const ChannelState& ch, const ForwardTranscript& f, const BackwardTranscript& b,
                            double noise_power, double tx_power = 1.0) {
  if (noise_power < 0.0) throw DimensionError("snr_report: noise power must be nonnegative");
  if (static_cast<int>(f.tx.size()) != layer.K() || b.tx.size() != f.tx.size()) throw StateError("snr_report: transcripts do not match the layer");
  const auto k_of = [](int k) { return static_cast<std::size_t>(k); };
  return detail::snr_core(
      layer, ch, static_cast<double>(f.x.cols()), noise_power, tx_power, [&](int k) -> const CMatrix& { return f.tx[k_of(k)].sent; },
      [&](int k) { return CMatrix(b.tx[k_of(k)].amplitude * b.tx[k_of(k)].sent); }, [&](int k) { return b.tx[k_of(k)].amplitude; });
}

}  // namespace oacsplit::oac
