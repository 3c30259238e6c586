#pragma once

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "oacsplit/channel.hpp"
#include "oacsplit/nn/checkpoint.hpp"
#include "oacsplit/nn/net.hpp"

namespace oacsplit::oac {

using nn::Param;

enum class Side { transmitter, receiver };
enum class Form { combined, separated };

struct OacDesign {
  Side side = Side::receiver;
  Form form = Form::separated;

  bool operator==(const OacDesign&) const = default;

  std::string name() const {
    return std::string(side == Side::transmitter ? "tx" : "rx") + (form == Form::combined ? "_combined" : "_separated");
  }
  static OacDesign parse(const std::string& s) {
    for (const OacDesign& d : all()) {
      if (d.name() == s) return d;
    }
    throw ConfigError("design", "unknown design '" + s + "' (expected tx_combined, tx_separated, rx_combined, rx_separated)");
  }
  static std::array<OacDesign, 4> all() {
    return {OacDesign{Side::transmitter, Form::combined}, OacDesign{Side::transmitter, Form::separated},
            OacDesign{Side::receiver, Form::combined}, OacDesign{Side::receiver, Form::separated}};
  }
};

// Feasibility: K transmissions of r streams realize every
// N_o x N_i weight iff K r >= min(N_i, N_o).
inline bool feasible(Index K, Index r, Index n_in, Index n_out) {
  if (K < 1 || r < 1 || n_in < 1 || n_out < 1) throw DimensionError("feasible: all sizes must be positive");
  return K * r >= std::min(n_in, n_out);
}

inline int ceil_div(Index a, Index b) { return static_cast<int>((a + b - 1) / b); }

// Minimum transmission count for a design.
inline int transmission_count(OacDesign d, Index n_in, Index n_out, Index r) {
  if (r < 1) throw DimensionError("rank estimate must be positive");
  return ceil_div(d.side == Side::transmitter ? n_out : n_in, r);
}

// C_k = (0 | C | 0), N_r x K r, with C in block column k (1-based).
inline CMatrix build_combiners(const CMatrix& C, int K, int k) {
  if (k < 1 || k > K) throw DimensionError("build_combiners: k must lie in [1, K]");
  const Index r = C.cols();
  CMatrix out = CMatrix::Zero(C.rows(), K * r);
  out.middleCols((k - 1) * r, r) = C;
  return out;
}

// k-th separated precoder (1-based): P times rows (k-1)r .. kr-1 of W0.
inline CMatrix build_precoders_separated(const CMatrix& W0, const CMatrix& P, int K, int k) {
  if (k < 1 || k > K) throw DimensionError("build_precoders_separated: k must lie in [1, K]");
  const Index r = P.cols();
  if (W0.rows() != K * r) throw DimensionError("build_precoders_separated: W0 must have K r rows");
  return P * W0.middleRows((k - 1) * r, r);
}

// Divides a block of column signals by its batch RMS amplitude
// A = sqrt(mean_j ||x_j||^2). An all-zero block keeps A = 1.
inline std::pair<CMatrix, double> power_normalize(const CMatrix& block) {
  if (block.size() == 0) throw DimensionError("power_normalize: empty block");
  const double a = std::sqrt(block.squaredNorm() / static_cast<double>(block.cols()));
  if (!(a > 0.0) || !std::isfinite(a)) return {block, 1.0};
  return {block / a, a};
}

// Power handling. With rescale_forward the receiver multiplies each combined
// transmission by its A, so the noiseless layer equals the equivalent weight.
// With rescale_backward the transmitter multiplies received gradients by Ã.
struct OacOptions {
  bool rescale_forward = true;
  bool rescale_backward = true;
};

struct Transmission {
  int k = 0;
  double amplitude = 1.0;  // A
  CMatrix inner;           // per-transmission stream data (r x cols) where the design has one
  CMatrix sent;            // normalized precoded block, N_t x cols
  CMatrix received;        // N_r x cols
};

struct ForwardTranscript {
  std::uint64_t layer = 0;
  std::uint64_t sequence = 0;
  CMatrix x;  // N_i x cols
  std::vector<Transmission> tx;
  CMatrix y;  // N_o x cols, empty until combined
  bool combined = false;
  bool rescaled = true;
  std::vector<std::string> warnings;
};

struct BackwardTransmission {
  int k = 0;
  double amplitude = 1.0;  // Ã
  CMatrix sent;            // conj(C_k) conj(g_y) / Ã, N_r x cols
  CMatrix received;        // N_t x cols
};

struct BackwardTranscript {
  std::uint64_t layer = 0;
  std::uint64_t sequence = 0;
  CMatrix g_y;
  std::vector<BackwardTransmission> tx;
  bool transmitted = false;
};

struct TransmitterGradients {
  CMatrix g_x;                // N_i x cols
  std::vector<CMatrix> g_xt;  // gradient w.r.t. each precoded block P_k x
};

// Inter-node linear layer realized by K over-the-air transmissions.
//
// Parameter sets by design (bias b is always at the receiver):
//   tx_combined:  P_k (N_t x N_i) for each k, shared combiner C (N_r x r)
//   tx_separated: W0 (K r x N_i), P (N_t x r), C (N_r x r)
//   rx_combined:  shared precoder P (N_t x r), C_k (N_r x N_o) for each k
//   rx_separated: W0 (N_o x K r), P (N_t x r), C (N_r x r)
class OacLayer {
 public:
  OacLayer(OacDesign design, Index n_in, Index n_out, int n_tx, int n_rx, int r, Rng& rng, OacOptions options = {})
      : design_(design), n_in_(n_in), n_out_(n_out), n_tx_(n_tx), n_rx_(n_rx), r_(r), options_(options) {
    if (n_in < 1 || n_out < 1 || n_tx < 1 || n_rx < 1 || r < 1) throw DimensionError("oac layer: sizes must be positive");
    k_ = transmission_count(design, n_in, n_out, r);
    const bool tx = design.side == Side::transmitter;
    if (design.form == Form::combined) {
      if (tx) {
        for (int k = 0; k < k_; ++k) {
          list_.emplace_back("P_" + std::to_string(k + 1), random_complex(n_tx, n_in, rng, 1.0 / static_cast<double>(n_in)));
        }
        c_ = Param("C", random_complex(n_rx, r, rng, 1.0 / n_rx));
      } else {
        p_ = Param("P", random_complex(n_tx, r, rng, 1.0 / r));
        for (int k = 0; k < k_; ++k) {
          list_.emplace_back("C_" + std::to_string(k + 1), random_complex(n_rx, n_out, rng, 1.0 / n_rx));
        }
      }
    } else {
      if (tx) {
        w0_ = Param("W0", random_complex(static_cast<Index>(k_) * r, n_in, rng, 1.0 / static_cast<double>(n_in)));
      } else {
        w0_ = Param("W0", random_complex(n_out, static_cast<Index>(k_) * r, rng, 1.0 / (static_cast<double>(k_) * r)));
      }
      p_ = Param("P", random_complex(n_tx, r, rng, 1.0 / r));
      c_ = Param("C", random_complex(n_rx, r, rng, 1.0 / n_rx));
    }
    b_ = Param("b", CMatrix::Zero(n_out, 1));
  }

  OacLayer(const OacLayer& o) = default;
  OacLayer& operator=(const OacLayer& o) {
    if (this != &o) {
      OacLayer tmp(o);
      *this = std::move(tmp);
      id_ = Id{};
    }
    return *this;
  }
  OacLayer(OacLayer&&) noexcept = default;
  OacLayer& operator=(OacLayer&&) noexcept = default;

  OacDesign design() const { return design_; }
  Index n_in() const { return n_in_; }
  Index n_out() const { return n_out_; }
  int n_tx() const { return n_tx_; }
  int n_rx() const { return n_rx_; }
  int r() const { return r_; }
  int K() const { return k_; }
  std::uint64_t id() const { return id_.value; }
  OacOptions& options() { return options_; }
  const OacOptions& options() const { return options_; }

  bool transmitter_side() const { return design_.side == Side::transmitter; }
  bool combined() const { return design_.form == Form::combined; }
  bool has_shared_precoder() const { return !(transmitter_side() && combined()); }
  bool has_shared_combiner() const { return !(!transmitter_side() && combined()); }
  bool has_w0() const { return !combined(); }

  Param& P() { return need(has_shared_precoder(), p_, "P"); }
  const Param& P() const { return const_cast<OacLayer*>(this)->P(); }
  Param& C() { return need(has_shared_combiner(), c_, "C"); }
  const Param& C() const { return const_cast<OacLayer*>(this)->C(); }
  Param& W0() { return need(has_w0(), w0_, "W0"); }
  const Param& W0() const { return const_cast<OacLayer*>(this)->W0(); }
  Param& Pk(int k) { return listed(transmitter_side() && combined(), k, "P_k"); }
  Param& Ck(int k) { return listed(!transmitter_side() && combined(), k, "C_k"); }
  Param& bias() { return b_; }
  const Param& bias() const { return b_; }

  // Parameters held by the transmitting node.
  std::vector<Param*> transmitter_params() {
    if (transmitter_side()) {
      if (combined()) return list_ptrs();
      return {&w0_, &p_};
    }
    return {&p_};
  }
  // Parameters held by the receiving node, bias last.
  std::vector<Param*> receiver_params() {
    if (transmitter_side()) return {&c_, &b_};
    if (combined()) {
      auto v = list_ptrs();
      v.push_back(&b_);
      return v;
    }
    return {&w0_, &c_, &b_};
  }
  std::vector<Param*> params() {
    auto v = transmitter_params();
    for (Param* p : receiver_params()) v.push_back(p);
    return v;
  }
  // Matrices that the combiner-side communication loss acts on.
  std::vector<Param*> combiner_params() {
    if (has_shared_combiner()) return {&c_};
    return list_ptrs();
  }

  // Effective k-th precoder (0-based), N_t x N_i.
  CMatrix precoder(int k) const {
    check_k(k);
    if (transmitter_side()) {
      if (combined()) return list_[static_cast<std::size_t>(k)].value;
      return p_.value * w0_.value.middleRows(static_cast<Index>(k) * r_, r_);
    }
    CMatrix out = CMatrix::Zero(n_tx_, n_in_);
    const Index first = static_cast<Index>(k) * r_;
    const Index width = std::min<Index>(r_, n_in_ - first);
    out.middleCols(first, width) = p_.value.leftCols(width);
    return out;
  }

  // Effective k-th combiner (0-based), N_r x N_o.
  CMatrix combiner(int k) const {
    check_k(k);
    if (transmitter_side()) {
      CMatrix out = CMatrix::Zero(n_rx_, n_out_);
      const Index first = static_cast<Index>(k) * r_;
      const Index width = std::min<Index>(r_, n_out_ - first);
      out.middleCols(first, width) = c_.value.leftCols(width);
      return out;
    }
    if (combined()) return list_[static_cast<std::size_t>(k)].value;
    return c_.value * w0_.value.middleCols(static_cast<Index>(k) * r_, r_).adjoint();
  }

  // sum_k C_k^H H P_k.
  CMatrix equivalent_weight(const ChannelState& ch) const {
    check_channel(ch);
    CMatrix w = CMatrix::Zero(n_out_, n_in_);
    for (int k = 0; k < k_; ++k) w.noalias() += combiner(k).adjoint() * ch.H() * precoder(k);
    return w;
  }

  // Forward, transmitter half: precode, normalize, send through the channel.
  ForwardTranscript transmit(const CMatrix& x, const ChannelState& ch, const NoiseModel& noise, Rng& rng) const {
    check_channel(ch);
    if (x.rows() != n_in_) throw DimensionError("oac forward: input rows must equal N_i = " + std::to_string(n_in_));
    ForwardTranscript t;
    t.layer = id();
    t.sequence = ++sequence_;
    t.x = x;
    t.rescaled = options_.rescale_forward;
    if (!feasible(k_, r_, n_in_, n_out_)) t.warnings.push_back("K r below min(N_i, N_o): layer cannot represent every weight");
    if (r_ > std::min(n_tx_, n_rx_)) t.warnings.push_back("rank estimate exceeds antenna count");
    t.tx.reserve(static_cast<std::size_t>(k_));
    for (int k = 0; k < k_; ++k) {
      Transmission s;
      s.k = k;
      CMatrix u;
      if (transmitter_side() && !combined()) {
        s.inner = w0_.value.middleRows(static_cast<Index>(k) * r_, r_) * x;
        u = p_.value * s.inner;
      } else if (!transmitter_side()) {
        s.inner = input_block(x, k);
        u = p_.value * s.inner;
      } else {
        u = list_[static_cast<std::size_t>(k)].value * x;
      }
      auto [sent, a] = power_normalize(u);
      s.sent = std::move(sent);
      s.amplitude = a;
      s.received = transmit_forward(ch, s.sent, noise, rng);
      t.tx.push_back(std::move(s));
    }
    return t;
  }

  // Forward, receiver half: combine all K received blocks and add the bias.
  const CMatrix& combine(ForwardTranscript& t) const {
    check_forward(t);
    const Index cols = t.x.cols();
    CMatrix y = CMatrix::Zero(n_out_, cols);
    for (const Transmission& s : t.tx) {
      const double scale = t.rescaled ? s.amplitude : 1.0;
      if (transmitter_side()) {
        const Index first = static_cast<Index>(s.k) * r_;
        const Index width = std::min<Index>(r_, n_out_ - first);
        y.middleRows(first, width).noalias() += scale * (c_.value.leftCols(width).adjoint() * s.received);
      } else if (combined()) {
        y.noalias() += scale * (list_[static_cast<std::size_t>(s.k)].value.adjoint() * s.received);
      } else {
        y.noalias() += scale * (w0_.value.middleCols(static_cast<Index>(s.k) * r_, r_) * (c_.value.adjoint() * s.received));
      }
    }
    y.colwise() += b_.value.col(0);
    t.y = std::move(y);
    t.combined = true;
    return t.y;
  }

  // Backward, receiver half: receiver-side parameter gradients and the
  // conjugated, power-normalized gradient blocks to send back.
  BackwardTranscript receiver_gradients(const ForwardTranscript& f, const CMatrix& g_y) {
    check_forward(f);
    if (!f.combined) throw StateError("oac backward: forward transcript was never combined");
    if (g_y.rows() != n_out_ || g_y.cols() != f.x.cols()) throw DimensionError("oac backward: g_y shape mismatch");
    BackwardTranscript b;
    b.layer = id();
    b.sequence = f.sequence;
    b.g_y = g_y;
    for (Param* p : receiver_params()) p->zero_grad();
    b_.grad = g_y.rowwise().sum();
    for (const Transmission& s : f.tx) {
      const double scale = f.rescaled ? s.amplitude : 1.0;
      const CMatrix yhat = scale * s.received;
      if (transmitter_side()) {
        const Index first = static_cast<Index>(s.k) * r_;
        const Index width = std::min<Index>(r_, n_out_ - first);
        c_.grad.leftCols(width).noalias() += yhat * g_y.middleRows(first, width).adjoint();
      } else if (combined()) {
        list_[static_cast<std::size_t>(s.k)].grad.noalias() = yhat * g_y.adjoint();
      } else {
        const auto w0k = w0_.value.middleCols(static_cast<Index>(s.k) * r_, r_);
        const CMatrix z = c_.value.adjoint() * yhat;
        w0_.grad.middleCols(static_cast<Index>(s.k) * r_, r_).noalias() = g_y * z.adjoint();
        c_.grad.noalias() += yhat * (w0k.adjoint() * g_y).adjoint();
      }
      BackwardTransmission bt;
      bt.k = s.k;
      auto [sent, a] = power_normalize((combiner(s.k) * g_y).conjugate());
      bt.sent = std::move(sent);
      bt.amplitude = a;
      b.tx.push_back(std::move(bt));
    }
    return b;
  }

  // Backward over the reciprocal channel H^T with fresh noise.
  void backward_transmit(BackwardTranscript& b, const ChannelState& ch, const NoiseModel& noise, Rng& rng) const {
    check_channel(ch);
    if (b.layer != id()) throw StateError("oac backward: transcript belongs to a different layer");
    for (BackwardTransmission& bt : b.tx) bt.received = transmit_backward(ch, bt.sent, noise, rng);
    b.transmitted = true;
  }

  // Backward, transmitter half: conjugate the received blocks into gradients
  // of each precoded block, then fill transmitter-side parameter gradients.
  TransmitterGradients transmitter_gradients(const ForwardTranscript& f, const BackwardTranscript& b) {
    check_forward(f);
    if (b.layer != id() || b.sequence != f.sequence) throw StateError("oac backward: transcripts do not match");
    if (!b.transmitted) throw StateError("oac backward: gradient blocks were never transmitted");
    TransmitterGradients out;
    out.g_x = CMatrix::Zero(n_in_, f.x.cols());
    for (Param* p : transmitter_params()) p->zero_grad();
    for (std::size_t i = 0; i < f.tx.size(); ++i) {
      const Transmission& s = f.tx[i];
      const BackwardTransmission& bt = b.tx[i];
      double scale = options_.rescale_backward ? bt.amplitude : 1.0;
      if (!f.rescaled) scale /= s.amplitude;
      CMatrix g = scale * bt.received.conjugate();
      if (transmitter_side() && combined()) {
        list_[i].grad.noalias() = g * f.x.adjoint();
        out.g_x.noalias() += list_[i].value.adjoint() * g;
      } else if (transmitter_side()) {
        const CMatrix gv = p_.value.adjoint() * g;
        p_.grad.noalias() += g * s.inner.adjoint();
        w0_.grad.middleRows(static_cast<Index>(s.k) * r_, r_).noalias() = gv * f.x.adjoint();
        out.g_x.noalias() += w0_.value.middleRows(static_cast<Index>(s.k) * r_, r_).adjoint() * gv;
      } else {
        p_.grad.noalias() += g * s.inner.adjoint();
        const Index first = static_cast<Index>(s.k) * r_;
        const Index width = std::min<Index>(r_, n_in_ - first);
        out.g_x.middleRows(first, width).noalias() += p_.value.leftCols(width).adjoint() * g;
      }
      out.g_xt.push_back(std::move(g));
    }
    return out;
  }

  // Freezes or unfreezes the shared precoder / combiner.
  void set_trainable_shared(bool precoder, bool combiner) {
    if (has_shared_precoder()) p_.trainable = precoder;
    if (has_shared_combiner()) c_.trainable = combiner;
  }

 private:
  struct Id {
    std::uint64_t value = nn::next_instance_id();
    Id() = default;
    Id(const Id&) : value(nn::next_instance_id()) {}
    Id& operator=(const Id&) {
      value = nn::next_instance_id();
      return *this;
    }
    Id(Id&&) noexcept = default;
    Id& operator=(Id&&) noexcept = default;
  };

  static Param& need(bool ok, Param& p, const char* what) {
    if (!ok) throw StateError(std::string("oac layer: design has no ") + what + " parameter");
    return p;
  }
  Param& listed(bool ok, int k, const char* what) {
    if (!ok) throw StateError(std::string("oac layer: design has no ") + what + " parameter");
    check_k(k);
    return list_[static_cast<std::size_t>(k)];
  }
  std::vector<Param*> list_ptrs() {
    std::vector<Param*> v;
    for (Param& p : list_) v.push_back(&p);
    return v;
  }
  void check_k(int k) const {
    if (k < 0 || k >= k_) throw DimensionError("oac layer: transmission index out of range");
  }
  void check_channel(const ChannelState& ch) const {
    if (ch.n_tx() != n_tx_ || ch.n_rx() != n_rx_) throw DimensionError("oac layer: channel shape does not match antennas");
  }
  void check_forward(const ForwardTranscript& t) const {
    if (t.layer != id()) throw StateError("oac layer: transcript belongs to a different layer");
    if (static_cast<int>(t.tx.size()) != k_) throw StateError("oac layer: transcript has wrong transmission count");
  }
  // Rows k r .. k r + r - 1 of x, zero padded past N_i.
  CMatrix input_block(const CMatrix& x, int k) const {
    CMatrix out = CMatrix::Zero(r_, x.cols());
    const Index first = static_cast<Index>(k) * r_;
    const Index width = std::min<Index>(r_, n_in_ - first);
    out.topRows(width) = x.middleRows(first, width);
    return out;
  }

  OacDesign design_;
  Index n_in_, n_out_;
  int n_tx_, n_rx_, r_, k_ = 1;
  OacOptions options_;
  Param p_, c_, w0_, b_;
  std::vector<Param> list_;
  Id id_;
  mutable std::uint64_t sequence_ = 0;
};

struct ForwardResult {
  CMatrix y;
  ForwardTranscript transcript;
};

inline ForwardResult oac_fc_forward(const OacLayer& layer, const CMatrix& x, const ChannelState& ch, const NoiseModel& noise,
                                    Rng& rng) {
  ForwardTranscript t = layer.transmit(x, ch, noise, rng);
  CMatrix y = layer.combine(t);
  return {std::move(y), std::move(t)};
}

struct BackwardResult {
  CMatrix g_x;
  BackwardTranscript transcript;
  std::vector<CMatrix> g_xt;
};

// Full backward pass; parameter gradients land in the layer's Param::grad.
inline BackwardResult oac_fc_backward(OacLayer& layer, const ForwardTranscript& f, const CMatrix& g_y, const ChannelState& ch,
                                      const NoiseModel& noise, Rng& rng) {
  BackwardTranscript b = layer.receiver_gradients(f, g_y);
  layer.backward_transmit(b, ch, noise, rng);
  TransmitterGradients t = layer.transmitter_gradients(f, b);
  return {std::move(t.g_x), std::move(b), std::move(t.g_xt)};
}

inline nlohmann::json transcript_to_json(const ForwardTranscript& t) {
  nlohmann::json tx = nlohmann::json::array();
  for (const Transmission& s : t.tx) {
    tx.push_back({{"k", s.k + 1}, {"A", s.amplitude}, {"sent", nn::matrix_to_json(s.sent)},
                  {"received", nn::matrix_to_json(s.received)}});
  }
  return {{"layer", t.layer}, {"sequence", t.sequence}, {"rescaled", t.rescaled}, {"warnings", t.warnings}, {"transmissions", tx}};
}

inline nlohmann::json transcript_to_json(const BackwardTranscript& b) {
  nlohmann::json tx = nlohmann::json::array();
  for (const BackwardTransmission& s : b.tx) {
    tx.push_back({{"k", s.k + 1}, {"A_tilde", s.amplitude}, {"sent", nn::matrix_to_json(s.sent)},
                  {"received", nn::matrix_to_json(s.received)}});
  }
  return {{"layer", b.layer}, {"sequence", b.sequence}, {"transmissions", tx}};
}

}  // namespace oacsplit::oac
