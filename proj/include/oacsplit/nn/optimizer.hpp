#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "oacsplit/nn/layers.hpp"

namespace oacsplit::nn {

enum class OptimizerKind { sgd, adam };

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("optimizer", "unknown optimizer '" + s + "'");
}

// SGD or Adam. Adam treats real and imaginary parts as independent real
// coordinates: the second moment stores (v_re, v_im) packed as a complex number.
class Optimizer {
 public:
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step_count = 0;
  std::vector<CMatrix> m;
  std::vector<CMatrix> v;

  Optimizer() = default;
  Optimizer(OptimizerKind k, double learning_rate) : kind(k), lr(learning_rate) {}

  void step(const std::vector<Param*>& params) {
    ++step_count;
    if (kind == OptimizerKind::sgd) {
      for (Param* p : params) {
        if (p->trainable) p->value -= lr * p->grad;
      }
      return;
    }
    if (m.empty()) {
      for (Param* p : params) {
        m.push_back(CMatrix::Zero(p->value.rows(), p->value.cols()));
        v.push_back(CMatrix::Zero(p->value.rows(), p->value.cols()));
      }
    }
    if (m.size() != params.size()) throw StateError("optimizer: parameter list changed between steps");
    const double t = static_cast<double>(step_count);
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Param& p = *params[i];
      if (m[i].rows() != p.value.rows() || m[i].cols() != p.value.cols()) throw StateError("optimizer: moment shape mismatch");
      if (!p.trainable) continue;
      for (Index j = 0; j < p.value.size(); ++j) {
        const cplx g = p.grad.data()[j];
        cplx& mj = m[i].data()[j];
        cplx& vj = v[i].data()[j];
        mj = beta1 * mj + (1.0 - beta1) * g;
        vj = {beta2 * vj.real() + (1.0 - beta2) * g.real() * g.real(), beta2 * vj.imag() + (1.0 - beta2) * g.imag() * g.imag()};
        const double ur = (mj.real() / c1) / (std::sqrt(vj.real() / c2) + eps);
        const double ui = (mj.imag() / c1) / (std::sqrt(vj.imag() / c2) + eps);
        p.value.data()[j] -= lr * cplx(ur, ui);
      }
    }
  }
};

}  // namespace oacsplit::nn
