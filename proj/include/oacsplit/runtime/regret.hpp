#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "oacsplit/linalg.hpp"

namespace oacsplit::runtime {

// Online complex least squares, f_t(theta) = (1 / 2B) sum_i |a_i^H theta - y_i|^2,
// trained by projected SGD with noisy gradients
//   theta <- Proj(theta - eta_t (g_t + lambda n_t)),  eta_t = c / sqrt(t),
// with n_t ~ CN(0, sigma^2 I). Regret is measured against the batch optimum
// over the whole horizon.
struct RegretConfig {
  int dim = 4;
  int batch = 25;
  double label_noise = 1.0;   // std of the complex label noise
  double theta_scale = 0.2;   // std of the true parameter entries
  double step = 0.5;          // c in eta_t = c / sqrt(t)
  double lambda = 1.0;        // gradient-noise gain; 0 turns the noise off
  long horizon = 100000;
  long first_checkpoint = 100;
  int checkpoints = 31;       // log-spaced over [first_checkpoint, horizon]
  double radius_factor = 10.0;
  std::vector<double> sigmas{0.0, 0.1, 0.4};
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  int tail_points = 8;        // checkpoints averaged for the asymptotic coefficient
};

struct RegretCurve {
  std::vector<long> t;
  std::vector<double> average_regret;  // R(T) / T
  double max_loss_gap = 0.0;           // measured D
  double max_gradient = 0.0;           // measured G
};

struct RegretSeries {
  double sigma = 0.0;
  std::vector<long> t;
  std::vector<double> mean_average_regret;
  std::vector<double> seed_slopes;
  double slope = 0.0;        // least-squares slope of log(R/T) vs log T
  double coefficient = 0.0;  // mean of (R/T) sqrt(T) over the tail
  double max_loss_gap = 0.0;
  double max_gradient = 0.0;
  bool diverged = false;
};

struct RegretResult {
  std::vector<RegretSeries> series;
  // Coefficient ratio between the two largest noise powers, and the ratio
  // predicted by a linear fit c0 + c1 sigma^2 over all noise powers.
  double ratio = 0.0;
  double predicted_ratio = 0.0;
  double fit_offset = 0.0;
  double fit_slope = 0.0;
};

inline std::vector<long> log_checkpoints(long first, long last, int count) {
  std::vector<long> out;
  for (int i = 0; i < count; ++i) {
    const double e = std::log10(static_cast<double>(first)) +
                     (std::log10(static_cast<double>(last)) - std::log10(static_cast<double>(first))) * i / std::max(1, count - 1);
    const long v = std::lround(std::pow(10.0, e));
    if (out.empty() || v > out.back()) out.push_back(v);
  }
  return out;
}

// Least-squares slope of y on x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

namespace detail {

inline void draw_batch(Rng& rng, const CVector& theta_true, double label_noise, CMatrix& a, CVector& y) {
  for (Index j = 0; j < a.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) a(i, j) = rng.complex_normal();
  }
  y = a.conjugate() * theta_true;
  for (Index i = 0; i < y.size(); ++i) y(i) += rng.complex_normal(label_noise * label_noise);
}

}  // namespace detail

// One SGD run. Rows of `a` are the a_i (B x d), so predictions are conj(a) theta.
inline RegretCurve regret_run(const RegretConfig& cfg, double sigma, std::uint64_t seed) {
  if (cfg.dim < 1 || cfg.batch < 1 || cfg.horizon < cfg.first_checkpoint || cfg.first_checkpoint < 1) {
    throw DimensionError("regret: invalid sizes");
  }
  Rng setup(seed, 0);
  CVector theta_true(cfg.dim);
  for (Index i = 0; i < cfg.dim; ++i) theta_true(i) = setup.complex_normal(cfg.theta_scale * cfg.theta_scale);
  const std::uint64_t data_stream = 1, noise_stream = 2;

  // Pre-pass: normal equations of the whole horizon.
  CMatrix a(cfg.batch, cfg.dim);
  CVector y;
  CMatrix gram = CMatrix::Zero(cfg.dim, cfg.dim);
  CVector rhs = CVector::Zero(cfg.dim);
  {
    Rng data(seed, data_stream);
    for (long t = 0; t < cfg.horizon; ++t) {
      detail::draw_batch(data, theta_true, cfg.label_noise, a, y);
      gram.noalias() += a.transpose() * a.conjugate();
      rhs.noalias() += a.transpose() * y;
    }
  }
  const CVector theta_star = gram.ldlt().solve(rhs);
  const double radius = cfg.radius_factor * theta_star.norm();

  Rng data(seed, data_stream), noise(seed, noise_stream);
  CVector theta = CVector::Zero(cfg.dim);
  const auto marks = log_checkpoints(cfg.first_checkpoint, cfg.horizon, cfg.checkpoints);
  RegretCurve curve;
  double regret = 0.0;
  std::size_t next = 0;
  const double inv_b = 1.0 / cfg.batch;
  for (long t = 1; t <= cfg.horizon; ++t) {
    detail::draw_batch(data, theta_true, cfg.label_noise, a, y);
    const CVector e = a.conjugate() * theta - y;
    const double f = 0.5 * inv_b * e.squaredNorm();
    const double f_star = 0.5 * inv_b * (a.conjugate() * theta_star - y).squaredNorm();
    regret += f - f_star;
    curve.max_loss_gap = std::max(curve.max_loss_gap, std::abs(f - f_star));
    CVector g = inv_b * (a.transpose() * e);
    curve.max_gradient = std::max(curve.max_gradient, g.norm());
    CVector n(cfg.dim);
    for (Index i = 0; i < cfg.dim; ++i) n(i) = noise.complex_normal(sigma * sigma);
    if (cfg.lambda != 0.0) g += cfg.lambda * n;
    theta -= (cfg.step / std::sqrt(static_cast<double>(t))) * g;
    const double norm = theta.norm();
    if (norm > radius && radius > 0.0) theta *= radius / norm;
    if (next < marks.size() && t == marks[next]) {
      curve.t.push_back(t);
      curve.average_regret.push_back(regret / static_cast<double>(t));
      ++next;
    }
  }
  return curve;
}

inline RegretSeries regret_series(const RegretConfig& cfg, double sigma) {
  RegretSeries s;
  s.sigma = sigma;
  std::vector<RegretCurve> curves;
  for (std::uint64_t seed : cfg.seeds) curves.push_back(regret_run(cfg, sigma, seed));
  s.t = curves.front().t;
  s.mean_average_regret.assign(s.t.size(), 0.0);
  std::vector<double> lx;
  for (long t : s.t) lx.push_back(std::log(static_cast<double>(t)));
  for (const RegretCurve& c : curves) {
    std::vector<double> ly;
    for (std::size_t i = 0; i < c.t.size(); ++i) {
      s.mean_average_regret[i] += c.average_regret[i] / static_cast<double>(curves.size());
      ly.push_back(std::log(std::abs(c.average_regret[i])));
    }
    s.seed_slopes.push_back(fit_slope(lx, ly));
    s.max_loss_gap = std::max(s.max_loss_gap, c.max_loss_gap);
    s.max_gradient = std::max(s.max_gradient, c.max_gradient);
  }
  std::vector<double> ly;
  for (double v : s.mean_average_regret) ly.push_back(std::log(std::abs(v)));
  s.slope = fit_slope(lx, ly);
  const std::size_t tail = std::min<std::size_t>(static_cast<std::size_t>(cfg.tail_points), s.t.size());
  for (std::size_t i = s.t.size() - tail; i < s.t.size(); ++i) {
    s.coefficient += s.mean_average_regret[i] * std::sqrt(static_cast<double>(s.t[i])) / static_cast<double>(tail);
  }
  // Divergence: the average regret grew over the last decade of the horizon.
  std::size_t decade = 0;
  while (decade + 1 < s.t.size() && s.t[decade] * 10 <= s.t.back()) ++decade;
  if (decade > 0) --decade;
  s.diverged = !(s.mean_average_regret.back() <= s.mean_average_regret[decade]) || !std::isfinite(s.mean_average_regret.back());
  return s;
}

inline RegretResult regret_experiment(const RegretConfig& cfg) {
  if (cfg.sigmas.size() < 2) throw DimensionError("regret: need at least two noise levels");
  RegretResult r;
  for (double sigma : cfg.sigmas) r.series.push_back(regret_series(cfg, sigma));
  std::vector<double> x, y;
  for (const auto& s : r.series) {
    x.push_back(s.sigma * s.sigma);
    y.push_back(s.coefficient);
  }
  r.fit_slope = fit_slope(x, y);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / static_cast<double>(x.size());
    my += y[i] / static_cast<double>(y.size());
  }
  r.fit_offset = my - r.fit_slope * mx;
  // Two largest noise powers, in input order.
  std::vector<std::size_t> idx(r.series.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  const std::size_t hi = idx[idx.size() - 1], lo = idx[idx.size() - 2];
  r.ratio = y[hi] / y[lo];
  r.predicted_ratio = (r.fit_offset + r.fit_slope * x[hi]) / (r.fit_offset + r.fit_slope * x[lo]);
  return r;
}

}  // namespace oacsplit::runtime
