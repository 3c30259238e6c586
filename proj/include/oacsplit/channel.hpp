#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "oacsplit/linalg.hpp"

namespace oacsplit {

// Multipath parameters of a channel: one gain and one departure/arrival angle
// pair per path.
struct PathSet {
  std::vector<cplx> gains;
  std::vector<double> departure;  // phi_n, radians in (-pi, pi]
  std::vector<double> arrival;    // theta_n, radians in (-pi, pi]

  std::size_t size() const noexcept { return gains.size(); }
  bool operator==(const PathSet&) const = default;
};

inline double wrap_angle(double x) {
  double w = std::remainder(x, 2.0 * std::numbers::pi);
  if (w <= -std::numbers::pi) w += 2.0 * std::numbers::pi;
  return w;
}

// H = sum_n a_n (1, ..., e^{j(Nr-1)theta_n})^H (1, ..., e^{j(Nt-1)phi_n}),
// so H(m, l) = sum_n a_n e^{-j m theta_n} e^{j l phi_n}.
inline CMatrix multipath_matrix(int n_tx, int n_rx, const PathSet& paths) {
  CMatrix h = CMatrix::Zero(n_rx, n_tx);
  for (std::size_t n = 0; n < paths.size(); ++n) {
    CVector rx(n_rx);
    CVector tx(n_tx);
    for (int m = 0; m < n_rx; ++m) rx(m) = std::polar(1.0, -m * paths.arrival[n]);
    for (int l = 0; l < n_tx; ++l) tx(l) = std::polar(1.0, l * paths.departure[n]);
    h.noalias() += paths.gains[n] * rx * tx.transpose();
  }
  return h;
}

// Reciprocal narrowband MIMO channel. Forward direction is H (n_rx x n_tx),
// backward direction is H^T. Immutable once built.
class ChannelState {
 public:
  ChannelState() = default;

  ChannelState(int n_tx, int n_rx, PathSet paths)
      : n_tx_(n_tx), n_rx_(n_rx), paths_(std::move(paths)), h_(multipath_matrix(n_tx, n_rx, paths_)) {
    if (n_tx < 1 || n_rx < 1) throw DimensionError("channel: antenna counts must be positive");
    if (paths_.departure.size() != paths_.size() || paths_.arrival.size() != paths_.size()) {
      throw DimensionError("channel: path arrays have different lengths");
    }
  }

  // Channel given directly as a matrix; carries no path description and
  // cannot be evolved.
  static ChannelState from_matrix(CMatrix h) {
    ChannelState s;
    s.n_tx_ = static_cast<int>(h.cols());
    s.n_rx_ = static_cast<int>(h.rows());
    s.h_ = std::move(h);
    s.synthetic_ = true;
    return s;
  }

  int n_tx() const noexcept { return n_tx_; }
  int n_rx() const noexcept { return n_rx_; }
  const PathSet& paths() const noexcept { return paths_; }
  const CMatrix& H() const noexcept { return h_; }
  bool synthetic() const noexcept { return synthetic_; }

  double spectral_norm() const { return svd(h_).S(0); }

 private:
  int n_tx_ = 0;
  int n_rx_ = 0;
  PathSet paths_;
  CMatrix h_;
  bool synthetic_ = false;
};

// Draw order per path: arrival, departure, |gain|, angle(gain).
inline PathSet sample_paths(int n_paths, Rng& rng) {
  PathSet p;
  p.gains.reserve(n_paths);
  p.departure.reserve(n_paths);
  p.arrival.reserve(n_paths);
  for (int n = 0; n < n_paths; ++n) {
    const double theta = wrap_angle(rng.uniform(-std::numbers::pi, std::numbers::pi));
    const double phi = wrap_angle(rng.uniform(-std::numbers::pi, std::numbers::pi));
    const double mag = rng.uniform(0.5, 1.5);
    const double phase = rng.uniform(-std::numbers::pi, std::numbers::pi);
    p.arrival.push_back(theta);
    p.departure.push_back(phi);
    p.gains.push_back(std::polar(mag, phase));
  }
  return p;
}

inline ChannelState sample_channel(int n_tx, int n_rx, int n_paths, Rng& rng) {
  if (n_tx < 1 || n_rx < 1 || n_paths < 1) throw DimensionError("sample_channel: sizes must be positive");
  return ChannelState(n_tx, n_rx, sample_paths(n_paths, rng));
}

// First-order memory model: every path parameter moves a fraction rho toward
// a fresh draw. rho = 0 returns the state untouched without consuming draws.
inline ChannelState evolve_channel(const ChannelState& state, double rho, Rng& rng) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw DimensionError("evolve_channel: rho must lie in [0, 1]");
  if (rho == 0.0) return state;
  if (state.synthetic()) throw StateError("evolve_channel: channel has no path description");
  const PathSet fresh = sample_paths(static_cast<int>(state.paths().size()), rng);
  PathSet next = state.paths();
  for (std::size_t n = 0; n < next.size(); ++n) {
    next.gains[n] = (1.0 - rho) * next.gains[n] + rho * fresh.gains[n];
    next.arrival[n] = wrap_angle((1.0 - rho) * next.arrival[n] + rho * fresh.arrival[n]);
    next.departure[n] = wrap_angle((1.0 - rho) * next.departure[n] + rho * fresh.departure[n]);
  }
  return ChannelState(state.n_tx(), state.n_rx(), std::move(next));
}

enum class NoiseSource { power, snr };

// AWGN settings. Either the per-antenna noise power is given directly, or
// a target SNR fixes the total noise power P_n = ||H||_2 N_r / 10^(snr/10),
// shared equally by the receive antennas.
struct NoiseModel {
  double sigma2 = 0.0;  // per receive antenna
  NoiseSource source = NoiseSource::power;
  std::optional<double> target_snr_db;

  static NoiseModel from_power(double sigma2) {
    if (sigma2 < 0.0) throw DimensionError("noise power must be nonnegative");
    return {sigma2, NoiseSource::power, std::nullopt};
  }
  static NoiseModel from_snr_db(const ChannelState& state, double snr_db);
};

inline double noise_power_for_snr(const ChannelState& state, double snr_db) {
  return state.spectral_norm() * state.n_rx() / std::pow(10.0, snr_db / 10.0);
}

inline NoiseModel NoiseModel::from_snr_db(const ChannelState& state, double snr_db) {
  const double total = noise_power_for_snr(state, snr_db);
  return {total / state.n_rx(), NoiseSource::snr, snr_db};
}

// SNR = ||H||_2 N_r / P_n in dB, with ||H||_2 the largest singular value.
inline double channel_snr(const ChannelState& state, double total_noise_power) {
  if (!(total_noise_power > 0.0)) throw DimensionError("channel_snr: noise power must be positive");
  return 10.0 * std::log10(state.spectral_norm() * state.n_rx() / total_noise_power);
}

inline void add_noise(CMatrix& y, double sigma2, Rng& rng) {
  if (sigma2 <= 0.0) return;
  for (Eigen::Index j = 0; j < y.cols(); ++j) {
    for (Eigen::Index i = 0; i < y.rows(); ++i) y(i, j) += rng.complex_normal(sigma2);
  }
}

// Y = H X + N, one column per channel use.
inline CMatrix transmit_forward(const ChannelState& state, const CMatrix& x, const NoiseModel& noise, Rng& rng) {
  if (x.rows() != state.n_tx()) throw DimensionError("transmit_forward: signal rows must equal n_tx");
  CMatrix y = state.H() * x;
  add_noise(y, noise.sigma2, rng);
  return y;
}

// Reciprocal direction: Y = H^T X + N (transpose, not conjugate transpose).
inline CMatrix transmit_backward(const ChannelState& state, const CMatrix& x, const NoiseModel& noise, Rng& rng) {
  if (x.rows() != state.n_rx()) throw DimensionError("transmit_backward: signal rows must equal n_rx");
  CMatrix y = state.H().transpose() * x;
  add_noise(y, noise.sigma2, rng);
  return y;
}

// Snapshot record: {"n_tx", "n_rx", "paths": [{"gain": [re, im], "departure", "arrival"}]}
// or, for matrix-defined channels, {"n_tx", "n_rx", "matrix": [[re, im], ...] column-major}.
inline nlohmann::json channel_to_json(const ChannelState& s) {
  nlohmann::json j;
  j["n_tx"] = s.n_tx();
  j["n_rx"] = s.n_rx();
  if (s.synthetic()) {
    nlohmann::json m = nlohmann::json::array();
    for (Eigen::Index c = 0; c < s.H().cols(); ++c) {
      for (Eigen::Index r = 0; r < s.H().rows(); ++r) m.push_back({s.H()(r, c).real(), s.H()(r, c).imag()});
    }
    j["matrix"] = std::move(m);
    return j;
  }
  nlohmann::json paths = nlohmann::json::array();
  for (std::size_t n = 0; n < s.paths().size(); ++n) {
    paths.push_back({{"gain", {s.paths().gains[n].real(), s.paths().gains[n].imag()}},
                     {"departure", s.paths().departure[n]},
                     {"arrival", s.paths().arrival[n]}});
  }
  j["paths"] = std::move(paths);
  return j;
}

inline ChannelState channel_from_json(const nlohmann::json& j) {
  const int n_tx = j.at("n_tx").get<int>();
  const int n_rx = j.at("n_rx").get<int>();
  if (j.contains("matrix")) {
    const auto& m = j.at("matrix");
    if (m.size() != static_cast<std::size_t>(n_tx) * n_rx) throw DimensionError("channel record: matrix size mismatch");
    CMatrix h(n_rx, n_tx);
    std::size_t k = 0;
    for (int c = 0; c < n_tx; ++c) {
      for (int r = 0; r < n_rx; ++r, ++k) h(r, c) = {m[k][0].get<double>(), m[k][1].get<double>()};
    }
    return ChannelState::from_matrix(std::move(h));
  }
  PathSet p;
  for (const auto& e : j.at("paths")) {
    p.gains.emplace_back(e.at("gain")[0].get<double>(), e.at("gain")[1].get<double>());
    p.departure.push_back(e.at("departure").get<double>());
    p.arrival.push_back(e.at("arrival").get<double>());
  }
  return ChannelState(n_tx, n_rx, std::move(p));
}

}  // namespace oacsplit
