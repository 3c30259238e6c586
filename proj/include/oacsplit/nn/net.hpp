#pragma once

#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "oacsplit/nn/layers.hpp"

namespace oacsplit::nn {

inline std::uint64_t next_instance_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1);
}

struct ActivationCache {
  std::uint64_t owner = 0;
  std::vector<LayerCache> layers;
};

// Ordered sequence of complex layers. `split_points` lists the indices of the
// layers that an over-the-air link replaces when the network is distributed.
class ComplexNet {
 public:
  ComplexNet() : id_(next_instance_id()) {}
  ComplexNet(const ComplexNet& o) : split_points(o.split_points), id_(next_instance_id()) {
    layers_.reserve(o.layers_.size());
    for (const auto& l : o.layers_) layers_.push_back(l->clone());
  }
  ComplexNet& operator=(const ComplexNet& o) {
    if (this != &o) {
      ComplexNet tmp(o);
      layers_ = std::move(tmp.layers_);
      split_points = o.split_points;
      id_ = next_instance_id();
    }
    return *this;
  }
  ComplexNet(ComplexNet&&) noexcept = default;
  ComplexNet& operator=(ComplexNet&&) noexcept = default;

  std::vector<std::size_t> split_points;

  template <class L, class... Args>
  L& add(Args&&... args) {
    auto p = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *p;
    layers_.push_back(std::move(p));
    return ref;
  }
  void add_layer(std::unique_ptr<Layer> l) { layers_.push_back(std::move(l)); }

  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }
  std::uint64_t id() const { return id_; }

  std::vector<Param*> params() {
    std::vector<Param*> out;
    for (auto& l : layers_) {
      for (Param* p : l->params()) out.push_back(p);
    }
    return out;
  }
  std::vector<Param*> buffers() {
    std::vector<Param*> out;
    for (auto& l : layers_) {
      for (Param* p : l->buffers()) out.push_back(p);
    }
    return out;
  }

  Shape output_shape(Shape in) const {
    for (const auto& l : layers_) in = l->output_shape(in);
    return in;
  }

  void validate() const {
    for (std::size_t i = 1; i < split_points.size(); ++i) {
      if (split_points[i] <= split_points[i - 1]) throw DimensionError("split points must be strictly increasing");
    }
    if (!split_points.empty() && split_points.back() >= layers_.size()) throw DimensionError("split point beyond last layer");
  }

  // Copy of layers [first, last).
  ComplexNet slice(std::size_t first, std::size_t last) const {
    if (first > last || last > layers_.size()) throw DimensionError("slice: bad layer range");
    ComplexNet out;
    for (std::size_t i = first; i < last; ++i) out.add_layer(layers_[i]->clone());
    return out;
  }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
  std::uint64_t id_;
};

struct ForwardResult {
  Tensor output;
  ActivationCache cache;
};

inline ForwardResult forward_pass(ComplexNet& net, const Tensor& x, Mode mode) {
  ForwardResult r;
  r.cache.owner = net.id();
  r.cache.layers.resize(net.size());
  Tensor cur = x;
  for (std::size_t i = 0; i < net.size(); ++i) cur = net.layer(i).forward(cur, mode, r.cache.layers[i]);
  r.output = std::move(cur);
  return r;
}

// Fills every parameter gradient and returns the gradient of the input.
inline Tensor backward_pass(ComplexNet& net, const ActivationCache& cache, const Tensor& g_out) {
  if (cache.owner != net.id() || cache.layers.size() != net.size()) {
    throw StateError("backward_pass: activation cache belongs to a different network");
  }
  Tensor g = g_out;
  for (std::size_t i = net.size(); i-- > 0;) g = net.layer(i).backward(cache.layers[i], g);
  return g;
}

struct LossResult {
  double loss = 0.0;
  Tensor grad;
  Index correct = 0;
};

// Softmax cross-entropy on class scores |z|^2, averaged over the batch.
inline LossResult softmax_cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const Index b = logits.batch(), classes = logits.features();
  if (static_cast<Index>(labels.size()) != b) throw DimensionError("softmax_cross_entropy: label count mismatch");
  LossResult r;
  r.grad = Tensor(logits.shape);
  const auto z = logits.mat();
  auto g = r.grad.mat();
  for (Index j = 0; j < b; ++j) {
    const int y = labels[static_cast<std::size_t>(j)];
    if (y < 0 || y >= classes) throw DimensionError("softmax_cross_entropy: label out of range");
    Eigen::VectorXd s = z.col(j).cwiseAbs2();
    Index arg = 0;
    const double top = s.maxCoeff(&arg);
    if (arg == y) ++r.correct;
    Eigen::VectorXd p = (s.array() - top).exp();
    const double norm = p.sum();
    p /= norm;
    r.loss += -(s(y) - top - std::log(norm));
    p(y) -= 1.0;
    g.col(j) = (2.0 / static_cast<double>(b)) * z.col(j).cwiseProduct(p.cast<cplx>());
  }
  r.loss /= static_cast<double>(b);
  return r;
}

inline std::vector<int> predict(const Tensor& logits) {
  require_rank(logits, 2, "predict");
  std::vector<int> out(static_cast<std::size_t>(logits.batch()));
  const auto z = logits.mat();
  for (Index j = 0; j < logits.batch(); ++j) {
    Index arg = 0;
    z.col(j).cwiseAbs2().maxCoeff(&arg);
    out[static_cast<std::size_t>(j)] = static_cast<int>(arg);
  }
  return out;
}

// Central differences on the real and imaginary part of every parameter
// entry, in train mode. Running statistics are restored after every pass.
inline std::vector<CMatrix> finite_difference_gradient(ComplexNet& net, const Tensor& x,
                                                       const std::function<double(const Tensor&)>& loss_fn,
                                                       double eps = 1e-5) {
  if (!(eps > 0.0)) throw DimensionError("finite_difference_gradient: eps must be positive");
  std::vector<CMatrix> saved;
  for (Param* b : net.buffers()) saved.push_back(b->value);
  auto eval = [&]() {
    const double v = loss_fn(forward_pass(net, x, Mode::train).output);
    auto bufs = net.buffers();
    for (std::size_t i = 0; i < bufs.size(); ++i) bufs[i]->value = saved[i];
    return v;
  };
  std::vector<CMatrix> out;
  for (Param* p : net.params()) {
    CMatrix g(p->value.rows(), p->value.cols());
    for (Index i = 0; i < p->value.size(); ++i) {
      cplx& v = p->value.data()[i];
      const cplx orig = v;
      v = orig + eps;
      const double re_plus = eval();
      v = orig - eps;
      const double re_minus = eval();
      v = orig + cplx(0.0, eps);
      const double im_plus = eval();
      v = orig - cplx(0.0, eps);
      const double im_minus = eval();
      v = orig;
      g.data()[i] = {(re_plus - re_minus) / (2.0 * eps), (im_plus - im_minus) / (2.0 * eps)};
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace oacsplit::nn
