#pragma once

#include <chrono>
#include <functional>
#include <string>
#include <vector>

#include "oacsplit/bench/cost.hpp"
#include "oacsplit/bench/experiment.hpp"
#include "oacsplit/oac/conv.hpp"
#include "oacsplit/oac/decompose.hpp"
#include "oacsplit/oac/layer.hpp"

namespace oacsplit::bench {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

inline double rel(const CMatrix& a, const CMatrix& b) {
  const double d = std::max(b.norm(), 1e-300);
  return (a - b).norm() / d;
}

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

inline CheckResult noiseless_layer() {
  Rng rng(101);
  double worst = 0.0;
  for (int n : {4, 8, 16}) {
    const ChannelState ch = sample_channel(n, n, 2 * n, rng);
    for (oac::OacDesign d : oac::OacDesign::all()) {
      oac::OacLayer layer(d, 6, 5, n, n, std::max(1, n / 2), rng);
      layer.bias().value = random_complex(5, 1, rng);
      const CMatrix x = random_complex(6, 7, rng), g = random_complex(5, 7, rng);
      const CMatrix w = layer.equivalent_weight(ch);
      const NoiseModel none = NoiseModel::from_power(0.0);
      auto f = oac::oac_fc_forward(layer, x, ch, none, rng);
      CMatrix expect = w * x;
      expect.colwise() += layer.bias().value.col(0);
      worst = std::max(worst, rel(f.y, expect));
      auto b = oac::oac_fc_backward(layer, f.transcript, g, ch, none, rng);
      worst = std::max(worst, rel(b.g_x, w.adjoint() * g));
    }
  }
  return {"noiseless_layer", worst <= 1e-8, "max relative error " + sci(worst), 0.0};
}

inline CheckResult feasibility_boundary() {
  Rng rng(102);
  int mismatches = 0, cases = 0;
  for (int n : {2, 4, 6}) {
    const ChannelState ch = sample_channel(8, 8, 16, rng);
    for (int K = 1; K <= 4; ++K) {
      for (int r = 1; r <= 4; ++r) {
        ++cases;
        const CMatrix w = random_complex(n, n, rng);
        bool ok = false;
        try {
          ok = rel(oac::reconstruct(oac::decompose_weight(w, ch, K, r), ch), w) <= 1e-8;
        } catch (const FeasibilityError&) {
          ok = false;
        }
        if (ok != (K * r >= n)) ++mismatches;
      }
    }
  }
  return {"feasibility_boundary", mismatches == 0, std::to_string(mismatches) + " of " + std::to_string(cases) + " cases disagree", 0.0};
}

inline CheckResult conv_mixing() {
  Rng rng(103);
  nn::Conv2d conv(4, 4, 3, rng, false);
  const CMatrix w = random_complex(4, 4, rng);
  nn::Conv2d mixed(4, 3, oac::mix_kernels(w, conv.kernels().value), CMatrix());
  Tensor x({2, 4, 8, 8});
  x.data = random_complex(x.data.size(), 1, rng);
  nn::LayerCache c1, c2;
  const Tensor a = oac::mix_channels(w, conv.forward(x, nn::Mode::eval, c1));
  const Tensor b = mixed.forward(x, nn::Mode::eval, c2);
  const double err = rel(b.data, a.data);
  return {"conv_mixing", err <= 1e-10, "relative error " + sci(err), 0.0};
}

inline CheckResult cost_example() {
  LayerSpec s;
  s.n_in = s.n_out = 6;
  s.n_tx = s.n_rx = 4;
  s.r = 3;
  s.batch = 3;
  const CostRow row = cost_rows(s)[1];
  const bool ok = row.params == Rational(60) && row.macs == Rational(252) && row.transmissions == Rational(6);
  return {"cost_example", ok, "tx_separated: " + row.params.str() + " params, " + row.macs.str() + " MACs, " + row.transmissions.str() + " transmissions",
          0.0};
}

inline CheckResult determinism() {
  ExperimentConfig c;
  c.setting = Setting::custom;
  c.channel = {2, 4, 4, 6, 0.0, 5, ""};
  c.oac.r = {2};
  c.oac.noise.values = {20.0};
  c.train.steps = 10;
  c.train.eval_every = 5;
  c.train.batch = 8;
  c.seeds = {0};
  c.dataset.image = false;
  c.dataset.features = 6;
  c.dataset.train_per_class = 10;
  c.dataset.test_per_class = 5;
  c.hidden = 4;
  const ExperimentReport a = run_experiment(c), b = run_experiment(c);
  const bool ok = a.runs.front().ok && a.runs.front().metrics == b.runs.front().metrics && a.summary_csv == b.summary_csv;
  return {"determinism", ok, ok ? "identical metrics on re-run" : "re-run differs or failed: " + a.runs.front().error, 0.0};
}

}  // namespace detail

// Quick property checks of the main invariants.
inline std::vector<CheckResult> verify_all() {
  const std::vector<std::function<CheckResult()>> checks = {detail::noiseless_layer, detail::feasibility_boundary, detail::conv_mixing,
                                                            detail::cost_example, detail::determinism};
  std::vector<CheckResult> out;
  for (const auto& check : checks) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckResult r;
    try {
      r = check();
    } catch (const std::exception& e) {
      r.passed = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace oacsplit::bench
