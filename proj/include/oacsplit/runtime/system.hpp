#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "oacsplit/nn/net.hpp"
#include "oacsplit/nn/optimizer.hpp"
#include "oacsplit/oac/conv.hpp"
#include "oacsplit/oac/decompose.hpp"
#include "oacsplit/oac/snr.hpp"
#include "oacsplit/runtime/covariance.hpp"

namespace oacsplit::runtime {

// How the over-the-air links are initialized from the logical network.
//   decompose: realize the network's mixing weights exactly on the channel
//   random:    fresh random precoders / combiners (the proposed scheme)
//   ideal:     channel-aware P = V_r, C = U_r, frozen
enum class InitMode { decompose, random, ideal };

inline std::string to_string(InitMode m) {
  switch (m) {
    case InitMode::decompose: return "decompose";
    case InitMode::random: return "random";
    case InitMode::ideal: return "ideal";
  }
  return "?";
}

struct CommLossConfig {
  bool enabled = true;
  double combiner_weight = 1.0;
  double signal_weight = 1.0;
};

// Random stream ids; link streams add the link's global index.
namespace streams {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t data = 2;
inline constexpr std::uint64_t channel = 3;
inline constexpr std::uint64_t eval = 4;
inline constexpr std::uint64_t forward_noise = 100;
inline constexpr std::uint64_t backward_noise = 200;
}  // namespace streams

struct SystemOptions {
  oac::OacDesign design{oac::Side::receiver, oac::Form::separated};
  int r = 1;
  InitMode init = InitMode::random;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
  double lr = 0.005;
  double alpha = 0.99;
  CommLossConfig comm;
  bool rescale_forward = true;
  std::optional<bool> rescale_backward;  // unset: on for SGD, off for Adam
  bool freeze_precoder = false;
  bool freeze_combiner = false;
  double rho = 0.0;  // channel evolution per batch
  bool record_snr = true;
  std::uint64_t seed = 0;
  std::size_t link_offset = 0;  // global index of the first link (stream ids)
};

struct Link {
  oac::OacLayer layer;
  ChannelState channel;
  NoiseModel noise;
  CovarianceTracker forward_cov;   // N_r
  CovarianceTracker backward_cov;  // N_t
  Rng forward_rng, backward_rng;
  bool conv = false;  // realizes a 1x1 convolution rather than a dense layer
};

struct LinkMetrics {
  double forward_snr_db = std::numeric_limits<double>::infinity();
  double backward_snr_db = std::numeric_limits<double>::infinity();
  std::vector<double> amplitude;        // A_k
  std::vector<double> amplitude_tilde;  // Ã_k
  double comm_combiner = 0.0;
  double comm_signal = 0.0;
};

struct BatchMetrics {
  std::size_t step = 0;
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<LinkMetrics> links;
};

// Ordering record used to check that covariance updates precede the
// operations that depend on them.
struct Event {
  std::uint64_t sequence = 0;
  std::size_t link = 0;
  std::string what;
};

// State of one pass through the pipeline.
struct Pass {
  nn::Mode mode = nn::Mode::train;
  std::vector<nn::ActivationCache> node_caches;
  std::vector<oac::ForwardTranscript> transcripts;
  std::vector<Shape> link_inputs;  // node output shapes feeding each link
  std::vector<LinkMetrics> links;
  Tensor output;
};

// A network distributed over nodes joined by over-the-air links. Node n
// holds its fragment, the transmitter half of link n and the receiver half
// of link n-1, and updates them with its own optimizer.
class SplitSystem {
 public:
  SplitSystem(const nn::ComplexNet& net, const std::vector<ChannelState>& channels, const std::vector<NoiseModel>& noises,
              SystemOptions opt)
      : opt_(opt), evolve_rng_(opt.seed, streams::channel) {
    net.validate();
    const auto& splits = net.split_points;
    if (channels.size() != splits.size() || noises.size() != splits.size()) {
      throw DimensionError("split system: need one channel and one noise model per split point");
    }
    const bool rescale_back = opt.rescale_backward.value_or(opt.optimizer == nn::OptimizerKind::sgd);
    Rng init(opt.seed, streams::init);
    std::size_t first = 0;
    for (std::size_t i = 0; i < splits.size(); ++i) {
      nodes_.push_back(net.slice(first, splits[i]));
      nn::ComplexNet mix = net.slice(splits[i], splits[i] + 1);
      nn::Layer& l = mix.layer(0);
      CMatrix w, b;
      bool conv = false;
      if (auto* d = dynamic_cast<nn::Dense*>(&l)) {
        w = d->weight().value;
        b = d->bias().value;
      } else if (auto* c = dynamic_cast<nn::Conv2d*>(&l); c && c->kernel_size() == 1) {
        w = c->kernels().value;
        b = c->bias().value;
        conv = true;
      } else {
        throw ConfigError("split_points", "layer " + std::to_string(splits[i]) + " (" + l.kind() +
                                              ") cannot be realized over the air; use dense or 1x1 conv2d");
      }
      const ChannelState& ch = channels[i];
      const std::size_t g = opt.link_offset + i;
      Link link{oac::OacLayer(opt.design, w.cols(), w.rows(), ch.n_tx(), ch.n_rx(), opt.r, init,
                              oac::OacOptions{opt.rescale_forward, rescale_back}),
                ch,
                noises[i],
                CovarianceTracker(ch.n_rx(), opt.alpha),
                CovarianceTracker(ch.n_tx(), opt.alpha),
                Rng(opt.seed, streams::forward_noise + g),
                Rng(opt.seed, streams::backward_noise + g),
                conv};
      if (opt.init == InitMode::decompose) oac::install_weight(link.layer, w, ch);
      if (opt.init == InitMode::ideal) oac::install_ideal(link.layer, ch);
      link.layer.bias().value = b;
      if (opt.freeze_precoder || opt.freeze_combiner || opt.init == InitMode::ideal) {
        const bool ideal = opt.init == InitMode::ideal;
        link.layer.set_trainable_shared(!(opt.freeze_precoder || ideal), !(opt.freeze_combiner || ideal));
      }
      links_.push_back(std::move(link));
      first = splits[i] + 1;
    }
    nodes_.push_back(net.slice(first, net.size()));
    optimizers_.assign(nodes_.size(), nn::Optimizer(opt.optimizer, opt.lr));
  }

  const SystemOptions& options() const { return opt_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t link_count() const { return links_.size(); }
  nn::ComplexNet& node(std::size_t i) { return nodes_.at(i); }
  Link& link(std::size_t i) { return links_.at(i); }
  const Link& link(std::size_t i) const { return links_.at(i); }
  std::size_t steps() const { return step_; }
  const std::vector<Event>& events() const { return events_; }

  // Parameters owned by node n, in a fixed order.
  std::vector<nn::Param*> node_params(std::size_t n) {
    std::vector<nn::Param*> out = nodes_.at(n).params();
    if (n < links_.size()) {
      for (nn::Param* p : links_[n].layer.transmitter_params()) out.push_back(p);
    }
    if (n > 0) {
      for (nn::Param* p : links_[n - 1].layer.receiver_params()) out.push_back(p);
    }
    return out;
  }

  // Forward through every node and link. Train mode draws forward noise from
  // the per-link streams and updates the forward covariance trackers; eval
  // mode draws from `eval_rng` and leaves the trackers alone.
  Pass forward(const Tensor& x, nn::Mode mode, Rng* eval_rng = nullptr) {
    if (mode == nn::Mode::eval && !eval_rng) throw StateError("split system: eval forward needs a noise stream");
    if (mode == nn::Mode::train) events_.clear();
    Pass p;
    p.mode = mode;
    p.links.resize(links_.size());
    Tensor cur = x;
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
      auto r = nn::forward_pass(nodes_[n], cur, mode);
      p.node_caches.push_back(std::move(r.cache));
      cur = std::move(r.output);
      if (n == links_.size()) break;
      Link& l = links_[n];
      p.link_inputs.push_back(cur.shape);
      Rng& rng = mode == nn::Mode::train ? l.forward_rng : *eval_rng;
      oac::ForwardTranscript t = l.layer.transmit(to_signal_columns(cur), l.channel, l.noise, rng);
      const bool train = mode == nn::Mode::train;
      if (train) log(n, "transmit");
      if (train) {
        l.forward_cov.update(stack_received(t));
        log(n, "forward_covariance");
      }
      Shape out = cur.shape;
      out[1] = l.layer.n_out();
      cur = from_signal_columns(l.layer.combine(t), out);
      if (train) log(n, "combine");
      for (const auto& s : t.tx) p.links[n].amplitude.push_back(s.amplitude);
      p.transcripts.push_back(std::move(t));
    }
    p.output = std::move(cur);
    return p;
  }

  // Backward from the gradient of the final output; fills every gradient,
  // adds the communication terms and returns the gradient of the input.
  Tensor backward(Pass& p, const Tensor& g_out) {
    if (p.mode != nn::Mode::train) throw StateError("split system: backward needs a train-mode pass");
    Tensor g = g_out;
    for (std::size_t n = nodes_.size(); n-- > 0;) {
      g = nn::backward_pass(nodes_[n], p.node_caches[n], g);
      if (n == 0) break;
      const std::size_t li = n - 1;
      Link& l = links_[li];
      const oac::ForwardTranscript& f = p.transcripts[li];
      LinkMetrics& m = p.links[li];
      const CMatrix g_y = to_signal_columns(g);
      oac::BackwardTranscript b = l.layer.receiver_gradients(f, g_y);
      log(li, "receiver_gradients");
      if (opt_.comm.enabled) {
        const CMatrix u_w = l.forward_cov.trailing_subspace(l.layer.r());
        for (nn::Param* c : l.layer.combiner_params()) {
          const CommTerm t = comm_loss_combiner(u_w, c->value);
          m.comm_combiner += t.value;
          c->grad += opt_.comm.combiner_weight * t.grad;
        }
      }
      l.layer.backward_transmit(b, l.channel, l.noise, l.backward_rng);
      log(li, "backward_transmit");
      // Received blocks carry conj(gradient); track the gradient covariance.
      l.backward_cov.update(stack_received(b).conjugate());
      log(li, "backward_covariance");
      oac::TransmitterGradients tg = l.layer.transmitter_gradients(f, b);
      log(li, "transmitter_gradients");
      if (opt_.comm.enabled) {
        const CMatrix v_w = l.backward_cov.trailing_subspace(l.layer.r());
        for (const oac::Transmission& s : f.tx) {
          const CommTerm t = comm_loss_signal(v_w, s.amplitude * s.sent);
          m.comm_signal += t.value;
          tg.g_x.noalias() += opt_.comm.signal_weight * (l.layer.precoder(s.k).adjoint() * t.grad);
        }
      }
      for (const auto& s : b.tx) m.amplitude_tilde.push_back(s.amplitude);
      if (opt_.record_snr) {
        const double pn = l.noise.sigma2 * l.channel.n_rx();
        const oac::SnrReport rep = oac::snr_report(l.layer, l.channel, f, b, pn);
        m.forward_snr_db = rep.min_forward_db();
        m.backward_snr_db = rep.min_backward_db();
      }
      g = from_signal_columns(tg.g_x, p.link_inputs[li]);
    }
    return g;
  }

  // Optimizer step on every node, then one channel time slot.
  void step() {
    for (std::size_t n = 0; n < nodes_.size(); ++n) optimizers_[n].step(node_params(n));
    ++step_;
    if (opt_.rho > 0.0) {
      for (Link& l : links_) {
        l.channel = evolve_channel(l.channel, opt_.rho, evolve_rng_);
        if (l.noise.source == NoiseSource::snr) l.noise = NoiseModel::from_snr_db(l.channel, *l.noise.target_snr_db);
        if (opt_.init == InitMode::ideal) {
          const auto m = oac::ideal_matrices(l.channel, l.layer.r());
          if (l.layer.has_shared_precoder()) l.layer.P().value = m.P;
          if (l.layer.has_shared_combiner()) l.layer.C().value = m.C;
        }
      }
    }
  }

  BatchMetrics train_batch(const Tensor& x, const std::vector<int>& labels) {
    Pass p = forward(x, nn::Mode::train);
    const nn::LossResult loss = nn::softmax_cross_entropy(p.output, labels);
    backward(p, loss.grad);
    step();
    BatchMetrics m;
    m.step = step_;
    m.loss = loss.loss;
    m.accuracy = static_cast<double>(loss.correct) / static_cast<double>(labels.size());
    m.links = std::move(p.links);
    return m;
  }

  struct Evaluation {
    double accuracy = 0.0;
    double loss = 0.0;
  };

  // Eval-mode accuracy with forward channel noise; the noise stream restarts
  // on every call so repeated evaluations agree.
  Evaluation evaluate(const Tensor& x, const std::vector<int>& labels, Index batch = 256) {
    Rng rng(opt_.seed, streams::eval);
    return batched_eval(x, labels, batch, [&](const Tensor& xb) { return forward(xb, nn::Mode::eval, &rng).output; });
  }

  // The logical network realized by the current parameters and channels.
  nn::ComplexNet to_network() const {
    nn::ComplexNet out;
    for (std::size_t n = 0; n < nodes_.size(); ++n) {
      for (std::size_t i = 0; i < nodes_[n].size(); ++i) out.add_layer(nodes_[n].layer(i).clone());
      if (n == links_.size()) break;
      const Link& l = links_[n];
      const CMatrix w = l.layer.equivalent_weight(l.channel);
      out.split_points.push_back(out.size());
      if (l.conv) {
        out.add<nn::Conv2d>(w.cols(), 1, w, l.layer.bias().value);
      } else {
        out.add<nn::Dense>(w, l.layer.bias().value);
      }
    }
    return out;
  }

  template <class F>
  static Evaluation batched_eval(const Tensor& x, const std::vector<int>& labels, Index batch, F&& run) {
    if (static_cast<Index>(labels.size()) != x.batch()) throw DimensionError("evaluate: label count mismatch");
    if (x.batch() == 0) return {};
    const Index per = x.features();
    Evaluation e;
    Index correct = 0;
    for (Index start = 0; start < x.batch(); start += batch) {
      const Index nb = std::min(batch, x.batch() - start);
      Shape s = x.shape;
      s[0] = nb;
      const Tensor xb(s, x.data.segment(start * per, nb * per));
      const std::vector<int> lb(labels.begin() + start, labels.begin() + start + nb);
      const nn::LossResult r = nn::softmax_cross_entropy(run(xb), lb);
      correct += r.correct;
      e.loss += r.loss * static_cast<double>(nb);
    }
    e.accuracy = static_cast<double>(correct) / static_cast<double>(x.batch());
    e.loss /= static_cast<double>(x.batch());
    return e;
  }

 private:
  void log(std::size_t link, const char* what) { events_.push_back({++sequence_, opt_.link_offset + link, what}); }

  template <class T>
  static CMatrix stack_received(const T& t) {
    Index rows = t.tx.front().received.rows(), cols = 0;
    for (const auto& s : t.tx) cols += s.received.cols();
    CMatrix out(rows, cols);
    Index c = 0;
    for (const auto& s : t.tx) {
      out.middleCols(c, s.received.cols()) = s.received;
      c += s.received.cols();
    }
    return out;
  }

  SystemOptions opt_;
  std::vector<nn::ComplexNet> nodes_;
  std::vector<Link> links_;
  std::vector<nn::Optimizer> optimizers_;
  Rng evolve_rng_;
  std::size_t step_ = 0;
  std::uint64_t sequence_ = 0;
  std::vector<Event> events_;
};

// Centralized baseline: the logical network trained directly.
class Centralized {
 public:
  Centralized(nn::ComplexNet net, nn::OptimizerKind kind, double lr) : net_(std::move(net)), opt_(kind, lr) {}

  nn::ComplexNet& net() { return net_; }

  BatchMetrics train_batch(const Tensor& x, const std::vector<int>& labels) {
    auto f = nn::forward_pass(net_, x, nn::Mode::train);
    const nn::LossResult loss = nn::softmax_cross_entropy(f.output, labels);
    nn::backward_pass(net_, f.cache, loss.grad);
    opt_.step(net_.params());
    BatchMetrics m;
    m.step = ++step_;
    m.loss = loss.loss;
    m.accuracy = static_cast<double>(loss.correct) / static_cast<double>(labels.size());
    return m;
  }

  SplitSystem::Evaluation evaluate(const Tensor& x, const std::vector<int>& labels, Index batch = 256) {
    return SplitSystem::batched_eval(x, labels, batch, [&](const Tensor& xb) { return nn::forward_pass(net_, xb, nn::Mode::eval).output; });
  }

 private:
  nn::ComplexNet net_;
  nn::Optimizer opt_;
  std::size_t step_ = 0;
};

}  // namespace oacsplit::runtime
