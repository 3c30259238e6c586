#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oacsplit/errors.hpp"
#include "oacsplit/oac/layer.hpp"

namespace oacsplit::bench {

// Exact nonnegative fraction; the closed forms divide by r, so counts need
// not be integers for arbitrary sizes.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d = 1) : num(n), den(d) {
    if (d == 0) throw DimensionError("rational: zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const std::int64_t g = std::gcd(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  bool is_integer() const { return den == 1; }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  std::string str() const { return den == 1 ? std::to_string(num) : std::to_string(num) + "/" + std::to_string(den); }
  bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
  friend Rational operator+(const Rational& a, const Rational& b) {
    const std::int64_t g = std::gcd(a.den, b.den);
    return Rational(a.num * (b.den / g) + b.num * (a.den / g), a.den / g * b.den);
  }
  friend Rational operator*(const Rational& a, const Rational& b) {
    const std::int64_t g1 = std::gcd(a.num, b.den), g2 = std::gcd(b.num, a.den);
    const std::int64_t d1 = g1 ? g1 : 1, d2 = g2 ? g2 : 1;
    return Rational((a.num / d1) * (b.num / d2), (a.den / d2) * (b.den / d1));
  }
  friend Rational operator/(const Rational& a, const Rational& b) {
    if (b.num == 0) throw DimensionError("rational: division by zero");
    return a * Rational(b.den, b.num);
  }
};

enum class LayerKind { fc, conv };

// Sizes of one split layer. FC uses n_in / n_out; conv uses the channel,
// kernel and spatial sizes.
struct LayerSpec {
  LayerKind kind = LayerKind::fc;
  std::int64_t n_in = 0, n_out = 0;
  std::int64_t n_tx = 0, n_rx = 0, r = 0, batch = 1;
  std::int64_t n_ci = 0, n_co = 0, n_k = 0;
  std::int64_t h_in = 0, w_in = 0, h_out = 0, w_out = 0;
};

struct CostRow {
  LayerKind kind = LayerKind::fc;
  oac::OacDesign design;
  Rational params, macs, transmissions;
};

inline std::string to_string(LayerKind k) { return k == LayerKind::fc ? "fc" : "conv"; }

namespace detail {

inline void require_positive(std::int64_t v, const char* field) {
  if (v < 1) throw ConfigError(field, "must be a positive integer");
}

inline void check(const LayerSpec& s) {
  require_positive(s.n_tx, "n_tx");
  require_positive(s.n_rx, "n_rx");
  require_positive(s.r, "r");
  require_positive(s.batch, "batch");
  if (s.kind == LayerKind::fc) {
    require_positive(s.n_in, "n_in");
    require_positive(s.n_out, "n_out");
  } else {
    require_positive(s.n_ci, "n_ci");
    require_positive(s.n_co, "n_co");
    require_positive(s.n_k, "n_k");
    require_positive(s.h_in, "h_in");
    require_positive(s.w_in, "w_in");
    require_positive(s.h_out, "h_out");
    require_positive(s.w_out, "w_out");
  }
}

}  // namespace detail

// Parameter, MAC and transmission counts per batch for one layer kind and
// all four designs, in the order tx_combined, tx_separated, rx_combined,
// rx_separated.
inline std::vector<CostRow> cost_rows(const LayerSpec& s) {
  detail::check(s);
  using R = Rational;
  const R B(s.batch), Nt(s.n_tx), Nr(s.n_rx), r(s.r);
  const auto designs = oac::OacDesign::all();
  std::vector<CostRow> rows;
  if (s.kind == LayerKind::fc) {
    const R Ni(s.n_in), No(s.n_out);
    rows.push_back({s.kind, designs[0], Ni * No * Nt / r + Nr * r, B * No * (Nr + Ni * Nt / r), B * No / r});
    rows.push_back({s.kind, designs[1], Ni * No + (Nt + Nr) * r, B * No * (Ni + Nt + Nr), B * No / r});
    rows.push_back({s.kind, designs[2], Ni * No * Nr / r + Nt * r, B * Ni * (Nt + No * Nr / r), B * Ni / r});
    rows.push_back({s.kind, designs[3], Ni * No + (Nt + Nr) * r, B * Ni * (No + Nt + Nr), B * Ni / r});
  } else {
    const R Nci(s.n_ci), Nco(s.n_co), Nk(s.n_k), Nwi(s.w_in), Nhi(s.h_in), Nwo(s.w_out), Nho(s.h_out);
    const R Nk2 = Nk * Nk;
    const R out_px = Nco * Nwo * Nho, in_px = Nci * Nwi * Nhi;
    rows.push_back({s.kind, designs[0], Nco * Nk2 * Nt / r + Nr * r, B * Nci * out_px * Nk2 * Nt / r + B * out_px * Nr, B * out_px / r});
    rows.push_back({s.kind, designs[1], Nco * Nk2 + (Nt + Nr) * r, B * Nci * out_px * Nk2 + B * out_px * (Nt + Nr), B * out_px / r});
    rows.push_back({s.kind, designs[2], Nco * Nk2 * Nr / r + Nt * r, B * Nci * out_px * Nk2 * Nr / r + B * in_px * Nt, B * in_px / r});
    rows.push_back({s.kind, designs[3], Nco * Nk2 + (Nt + Nr) * r, B * Nci * out_px * Nk2 + B * in_px * (Nt + Nr), B * in_px / r});
  }
  return rows;
}

// All eight rows: the FC rows from n_in / n_out and the conv rows from the
// conv sizes. Either half may be skipped by leaving its sizes at zero.
inline std::vector<CostRow> cost_report(const LayerSpec& s) {
  std::vector<CostRow> out;
  const bool has_fc = s.n_in > 0 || s.n_out > 0;
  const bool has_conv = s.n_ci > 0 || s.n_co > 0 || s.n_k > 0;
  if (!has_fc && !has_conv) throw ConfigError("layer", "give FC sizes (n_in, n_out), conv sizes (n_ci, n_co, n_k, ...), or both");
  if (has_fc) {
    LayerSpec fc = s;
    fc.kind = LayerKind::fc;
    for (const CostRow& row : cost_rows(fc)) out.push_back(row);
  }
  if (has_conv) {
    LayerSpec cv = s;
    cv.kind = LayerKind::conv;
    for (const CostRow& row : cost_rows(cv)) out.push_back(row);
  }
  return out;
}

// Relative cost of whole algorithms given the digital per-batch costs. Each
// entry is a multiple of the named base cost; `bound` marks upper bounds.
struct ComparisonRow {
  std::string algorithm;
  std::string computation;
  Rational transmission;  // times C_Trans
  bool transmission_bound = false;
  Rational channel_estimation;  // times C_CE
  bool channel_estimation_bound = false;
};

// A 64-bit complex value occupies 16 symbols of 16-QAM, so one analog use of
// r streams replaces up to 16 r digital symbols.
inline constexpr std::int64_t symbols_per_value = 16;

inline std::vector<ComparisonRow> cost_comparison(std::int64_t r) {
  if (r < 1) throw ConfigError("r", "must be a positive integer");
  const Rational one(1), per_r(1, r), analog(1, symbols_per_value * r);
  return {{"traditional_split", "C_NN", one, false, one, false},
          {"mimo_split", "C_NN + C_MIMO", per_r, false, per_r, false},
          {"ideal", "C_NN + C_MIMO", analog, true, analog, true},
          {"proposed", "C_NN + C_MIMO", analog, true, Rational(0), false}};
}

inline nlohmann::json to_json(const CostRow& row) {
  return {{"kind", to_string(row.kind)},
          {"design", row.design.name()},
          {"params", row.params.str()},
          {"macs", row.macs.str()},
          {"transmissions", row.transmissions.str()}};
}

inline nlohmann::json to_json(const ComparisonRow& row) {
  return {{"algorithm", row.algorithm},
          {"computation", row.computation},
          {"transmission", row.transmission.str()},
          {"transmission_bound", row.transmission_bound ? "at_most" : "exact"},
          {"channel_estimation", row.channel_estimation.str()},
          {"channel_estimation_bound", row.channel_estimation_bound ? "at_most" : "exact"}};
}

inline LayerSpec layer_spec_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("", "layer spec must be a JSON object");
  LayerSpec s;
  static const char* keys[] = {"n_in", "n_out", "n_tx", "n_rx", "r", "batch", "n_ci", "n_co", "n_k", "h_in", "w_in", "h_out", "w_out"};
  std::int64_t* slots[] = {&s.n_in, &s.n_out, &s.n_tx, &s.n_rx, &s.r, &s.batch, &s.n_ci, &s.n_co, &s.n_k, &s.h_in, &s.w_in, &s.h_out, &s.w_out};
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (std::size_t i = 0; i < std::size(keys); ++i) {
      if (key != keys[i]) continue;
      if (!value.is_number_integer()) throw ConfigError(key, "must be an integer");
      *slots[i] = value.get<std::int64_t>();
      known = true;
    }
    if (!known) throw ConfigError(key, "unknown field");
  }
  // Same-size convolutions unless the output size is given.
  if (s.h_out == 0) s.h_out = s.h_in;
  if (s.w_out == 0) s.w_out = s.w_in;
  return s;
}

}  // namespace oacsplit::bench
