#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oacsplit/bench/dataset.hpp"
#include "oacsplit/errors.hpp"
#include "oacsplit/oac/layer.hpp"
#include "oacsplit/runtime/regret.hpp"
#include "oacsplit/runtime/system.hpp"

namespace oacsplit::bench {

using nlohmann::json;

enum class Setting { complex_2node, sparse_3node, massive_3node, moving_3node, custom };
enum class Baseline { proposed, ideal, centralized };

inline std::string to_string(Setting s) {
  switch (s) {
    case Setting::complex_2node: return "complex_2node";
    case Setting::sparse_3node: return "sparse_3node";
    case Setting::massive_3node: return "massive_3node";
    case Setting::moving_3node: return "moving_3node";
    case Setting::custom: return "custom";
  }
  return "?";
}

inline std::string to_string(Baseline b) {
  switch (b) {
    case Baseline::proposed: return "proposed";
    case Baseline::ideal: return "ideal";
    case Baseline::centralized: return "centralized";
  }
  return "?";
}

struct ChannelConfig {
  int nodes = 2;
  int n_tx = 16, n_rx = 16, n_paths = 20;
  double rho = 0.0;
  std::uint64_t seed = 2024;  // channels are drawn once from this seed and reused
  std::string file;           // replay stored channels instead of drawing
};

// Noise sweep: either SNR values in dB or per-antenna noise powers.
struct NoiseConfig {
  enum class Kind { snr_db, power } kind = Kind::snr_db;
  std::vector<double> values{35.0};
};

struct OacConfig {
  std::string design = "auto";  // or a design name
  std::vector<int> r{16};
  NoiseConfig noise;
  runtime::InitMode init = runtime::InitMode::random;
  bool comm_loss = true;
  bool rescale_forward = true;
  std::optional<bool> rescale_backward;  // unset: automatic
};

struct TrainConfig {
  int batch = 64;
  double lr = 0.005;
  double alpha = 0.99;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
  int steps = 1000;
  int eval_every = 250;
};

struct ExperimentConfig {
  Setting setting = Setting::complex_2node;
  ChannelConfig channel;
  OacConfig oac;
  TrainConfig train;
  Baseline baseline = Baseline::proposed;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  DatasetSpec dataset;
  std::uint64_t dataset_seed = 7;
  int hidden = 16;   // width of the dense network for feature datasets
  int workers = 1;   // 0: one per hardware thread
};

struct PresetChannel {
  int nodes, n_tx, n_rx, n_paths;
};

inline std::optional<PresetChannel> preset_channel(Setting s) {
  switch (s) {
    case Setting::complex_2node: return PresetChannel{2, 16, 16, 20};
    case Setting::sparse_3node: return PresetChannel{3, 16, 16, 4};
    case Setting::moving_3node: return PresetChannel{3, 16, 16, 4};
    case Setting::massive_3node: return PresetChannel{3, 64, 64, 8};
    case Setting::custom: return std::nullopt;
  }
  return std::nullopt;
}

// Receiver parameterization when the layer does not widen, transmitter
// otherwise; combined form when r uses every subchannel, separated otherwise.
inline oac::OacDesign auto_design(Index n_in, Index n_out, int r, int n_tx, int n_rx) {
  const oac::Side side = n_in >= n_out ? oac::Side::receiver : oac::Side::transmitter;
  const oac::Form form = r >= std::min(n_tx, n_rx) ? oac::Form::combined : oac::Form::separated;
  return {side, form};
}

namespace detail {

// Reads a JSON object while tracking which keys were used, so leftovers can
// be reported with their full path.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "" : path_, "must be an object");
  }
  ~Reader() = default;

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_.contains(key); }

  const json* get(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <class T>
  void number(const std::string& key, T& out) {
    const json* v = get(key);
    if (!v) return;
    if constexpr (std::is_integral_v<T>) {
      if (!v->is_number_integer()) throw ConfigError(at(key), "must be an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v->get<long long>() < 0) throw ConfigError(at(key), "must be nonnegative");
      }
      out = v->get<T>();
    } else {
      if (!v->is_number()) throw ConfigError(at(key), "must be a number");
      out = v->get<T>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_boolean()) throw ConfigError(at(key), "must be true or false");
    out = v->get<bool>();
  }

  void string(const std::string& key, std::string& out) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_string()) throw ConfigError(at(key), "must be a string");
    out = v->get<std::string>();
  }

  template <class T>
  void list(const std::string& key, std::vector<T>& out) {
    const json* v = get(key);
    if (!v) return;
    if (!v->is_array() || v->empty()) throw ConfigError(at(key), "must be a nonempty list");
    out.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      const json& e = (*v)[i];
      const std::string p = at(key) + "[" + std::to_string(i) + "]";
      if constexpr (std::is_integral_v<T>) {
        if (!e.is_number_integer()) throw ConfigError(p, "must be an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (e.get<long long>() < 0) throw ConfigError(p, "must be nonnegative");
        }
      } else if (!e.is_number()) {
        throw ConfigError(p, "must be a number");
      }
      out.push_back(e.get<T>());
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) throw ConfigError(at(key), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <class E, class F>
E parse_enum(const std::string& path, const std::string& value, F&& names, std::initializer_list<E> all) {
  std::string expected;
  for (E e : all) {
    if (names(e) == value) return e;
    expected += (expected.empty() ? "" : ", ") + names(e);
  }
  throw ConfigError(path, "unknown value '" + value + "' (expected " + expected + ")");
}

inline std::string optimizer_name(nn::OptimizerKind k) { return k == nn::OptimizerKind::adam ? "adam" : "sgd"; }

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  auto fail = [](const char* path, const std::string& msg) { throw ConfigError(path, msg); };
  if (c.channel.nodes != 2 && c.channel.nodes != 3) fail("channel.nodes", "must be 2 or 3");
  if (c.channel.n_tx < 1) fail("channel.n_tx", "must be positive");
  if (c.channel.n_rx < 1) fail("channel.n_rx", "must be positive");
  if (c.channel.n_paths < 1) fail("channel.n_paths", "must be positive");
  if (!(c.channel.rho >= 0.0 && c.channel.rho <= 1.0)) fail("channel.rho", "must lie in [0, 1]");
  if (auto p = preset_channel(c.setting)) {
    const std::string name = to_string(c.setting);
    if (c.channel.nodes != p->nodes) fail("channel.nodes", name + " pins " + std::to_string(p->nodes));
    if (c.channel.n_tx != p->n_tx) fail("channel.n_tx", name + " pins " + std::to_string(p->n_tx));
    if (c.channel.n_rx != p->n_rx) fail("channel.n_rx", name + " pins " + std::to_string(p->n_rx));
    if (c.channel.n_paths != p->n_paths) fail("channel.n_paths", name + " pins " + std::to_string(p->n_paths));
    if (c.setting != Setting::moving_3node && c.channel.rho != 0.0) fail("channel.rho", name + " is a static setting");
  }
  if (c.oac.design != "auto") oac::OacDesign::parse(c.oac.design);
  if (c.oac.r.empty()) fail("oac.r", "must be a nonempty list");
  for (std::size_t i = 0; i < c.oac.r.size(); ++i) {
    if (c.oac.r[i] < 1) throw ConfigError("oac.r[" + std::to_string(i) + "]", "must be positive");
  }
  if (c.oac.noise.values.empty()) fail("oac.noise", "must list at least one value");
  for (std::size_t i = 0; i < c.oac.noise.values.size(); ++i) {
    const double v = c.oac.noise.values[i];
    const std::string p = std::string(c.oac.noise.kind == NoiseConfig::Kind::snr_db ? "oac.snr_db" : "oac.noise_power") + "[" + std::to_string(i) + "]";
    if (!std::isfinite(v)) throw ConfigError(p, "must be finite");
    if (c.oac.noise.kind == NoiseConfig::Kind::power && v < 0.0) throw ConfigError(p, "must be nonnegative");
  }
  if (c.train.batch < 1) fail("train.batch", "must be positive");
  if (!(c.train.lr > 0.0)) fail("train.lr", "must be positive");
  if (!(c.train.alpha >= 0.0 && c.train.alpha < 1.0)) fail("train.alpha", "must lie in [0, 1)");
  if (c.train.steps < 1) fail("train.steps", "must be positive");
  if (c.train.eval_every < 1) fail("train.eval_every", "must be positive");
  if (c.seeds.empty()) fail("seeds", "must be a nonempty list");
  {
    std::set<std::uint64_t> s(c.seeds.begin(), c.seeds.end());
    if (s.size() != c.seeds.size()) fail("seeds", "must not repeat");
  }
  const DatasetSpec& d = c.dataset;
  if (d.classes < 2) fail("dataset.classes", "must be at least 2");
  if (d.train_per_class < 1) fail("dataset.train_per_class", "must be positive");
  if (d.test_per_class < 1) fail("dataset.test_per_class", "must be positive");
  if (!(d.separation >= 0.0)) fail("dataset.separation", "must be nonnegative");
  if (d.image) {
    if (d.channels < 1) fail("dataset.channels", "must be positive");
    if (d.height < 2 || d.height % 2) fail("dataset.height", "must be even and at least 2");
    if (d.width < 2 || d.width % 2) fail("dataset.width", "must be even and at least 2");
  } else {
    if (d.features < 1) fail("dataset.features", "must be positive");
    if (c.channel.nodes != 2) fail("channel.nodes", "feature datasets use the 2-node dense network");
  }
  if (c.hidden < 1) fail("hidden", "must be positive");
  if (c.workers < 0) fail("workers", "must be nonnegative");
}

inline ExperimentConfig config_from_json(const json& j) {
  detail::Reader top(j, "");
  ExperimentConfig c;
  std::string setting = "custom";
  top.string("setting", setting);
  c.setting = detail::parse_enum(top.at("setting"), setting, [](Setting s) { return to_string(s); },
                                 {Setting::complex_2node, Setting::sparse_3node, Setting::massive_3node, Setting::moving_3node, Setting::custom});
  if (auto p = preset_channel(c.setting)) {
    c.channel.nodes = p->nodes;
    c.channel.n_tx = p->n_tx;
    c.channel.n_rx = p->n_rx;
    c.channel.n_paths = p->n_paths;
    if (c.setting == Setting::moving_3node) c.channel.rho = 1e-4;
  }
  if (const json* v = top.get("channel")) {
    detail::Reader r(*v, "channel");
    r.number("nodes", c.channel.nodes);
    r.number("n_tx", c.channel.n_tx);
    r.number("n_rx", c.channel.n_rx);
    r.number("n_paths", c.channel.n_paths);
    r.number("rho", c.channel.rho);
    r.number("seed", c.channel.seed);
    r.string("file", c.channel.file);
    r.finish();
  }
  if (const json* v = top.get("oac")) {
    detail::Reader r(*v, "oac");
    r.string("design", c.oac.design);
    if (r.has("r") && (*v)["r"].is_number_integer()) {
      c.oac.r = {(*v)["r"].get<int>()};
      r.get("r");
    } else {
      r.list("r", c.oac.r);
    }
    const bool snr = r.has("snr_db"), power = r.has("noise_power");
    if (snr && power) throw ConfigError("oac.noise_power", "give either snr_db or noise_power, not both");
    if (snr) {
      c.oac.noise.kind = NoiseConfig::Kind::snr_db;
      r.list("snr_db", c.oac.noise.values);
    }
    if (power) {
      c.oac.noise.kind = NoiseConfig::Kind::power;
      r.list("noise_power", c.oac.noise.values);
    }
    std::string init = runtime::to_string(c.oac.init);
    r.string("init", init);
    c.oac.init = detail::parse_enum(r.at("init"), init, [](runtime::InitMode m) { return runtime::to_string(m); },
                                    {runtime::InitMode::random, runtime::InitMode::decompose, runtime::InitMode::ideal});
    r.boolean("comm_loss", c.oac.comm_loss);
    r.boolean("rescale_forward", c.oac.rescale_forward);
    if (const json* rb = r.get("rescale_backward")) {
      if (rb->is_string() && rb->get<std::string>() == "auto") {
        c.oac.rescale_backward.reset();
      } else if (rb->is_boolean()) {
        c.oac.rescale_backward = rb->get<bool>();
      } else {
        throw ConfigError("oac.rescale_backward", "must be true, false or \"auto\"");
      }
    }
    r.finish();
  }
  if (const json* v = top.get("train")) {
    detail::Reader r(*v, "train");
    r.number("batch", c.train.batch);
    r.number("lr", c.train.lr);
    r.number("alpha", c.train.alpha);
    r.number("steps", c.train.steps);
    r.number("eval_every", c.train.eval_every);
    std::string opt = detail::optimizer_name(c.train.optimizer);
    r.string("optimizer", opt);
    c.train.optimizer = detail::parse_enum(r.at("optimizer"), opt, detail::optimizer_name, {nn::OptimizerKind::adam, nn::OptimizerKind::sgd});
    r.finish();
  }
  std::string baseline = to_string(c.baseline);
  top.string("baseline", baseline);
  c.baseline = detail::parse_enum(top.at("baseline"), baseline, [](Baseline b) { return to_string(b); },
                                  {Baseline::proposed, Baseline::ideal, Baseline::centralized});
  top.list("seeds", c.seeds);
  if (const json* v = top.get("dataset")) {
    detail::Reader r(*v, "dataset");
    r.number("classes", c.dataset.classes);
    r.number("train_per_class", c.dataset.train_per_class);
    r.number("test_per_class", c.dataset.test_per_class);
    r.boolean("image", c.dataset.image);
    r.number("channels", c.dataset.channels);
    r.number("height", c.dataset.height);
    r.number("width", c.dataset.width);
    r.number("features", c.dataset.features);
    r.number("separation", c.dataset.separation);
    r.number("seed", c.dataset_seed);
    r.finish();
  }
  top.number("hidden", c.hidden);
  top.number("workers", c.workers);
  top.finish();
  validate(c);
  return c;
}

inline json config_to_json(const ExperimentConfig& c) {
  json oac = {{"design", c.oac.design},
              {"r", c.oac.r},
              {"init", runtime::to_string(c.oac.init)},
              {"comm_loss", c.oac.comm_loss},
              {"rescale_forward", c.oac.rescale_forward}};
  oac[c.oac.noise.kind == NoiseConfig::Kind::snr_db ? "snr_db" : "noise_power"] = c.oac.noise.values;
  if (c.oac.rescale_backward) {
    oac["rescale_backward"] = *c.oac.rescale_backward;
  } else {
    oac["rescale_backward"] = "auto";
  }
  json channel = {{"nodes", c.channel.nodes}, {"n_tx", c.channel.n_tx},   {"n_rx", c.channel.n_rx},
                  {"n_paths", c.channel.n_paths}, {"rho", c.channel.rho}, {"seed", c.channel.seed}};
  if (!c.channel.file.empty()) channel["file"] = c.channel.file;
  json dataset = spec_to_json(c.dataset);
  dataset["seed"] = c.dataset_seed;
  return {{"setting", to_string(c.setting)},
          {"channel", channel},
          {"oac", oac},
          {"train",
           {{"batch", c.train.batch},
            {"lr", c.train.lr},
            {"alpha", c.train.alpha},
            {"optimizer", detail::optimizer_name(c.train.optimizer)},
            {"steps", c.train.steps},
            {"eval_every", c.train.eval_every}}},
          {"baseline", to_string(c.baseline)},
          {"seeds", c.seeds},
          {"dataset", dataset},
          {"hidden", c.hidden},
          {"workers", c.workers}};
}

// key=value with a dotted key; the value is read as JSON when it parses and
// as a plain string otherwise.
inline void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override", "expected key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "empty path component");
    if (!node->is_object()) throw ConfigError(key, "cannot descend into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open '" + path + "'");
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("", "'" + path + "' is not valid JSON");
  return j;
}

// File values, then overrides in order.
inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  json j = read_json_file(path);
  for (const std::string& o : overrides) apply_override(j, o);
  return config_from_json(j);
}

// Dataset description for gen-data; the same fields as the config's
// "dataset" object.
inline std::pair<DatasetSpec, std::uint64_t> dataset_spec_from_json(const json& j, std::uint64_t seed = 7) {
  detail::Reader r(j, "");
  DatasetSpec d;
  r.number("classes", d.classes);
  r.number("train_per_class", d.train_per_class);
  r.number("test_per_class", d.test_per_class);
  r.boolean("image", d.image);
  r.number("channels", d.channels);
  r.number("height", d.height);
  r.number("width", d.width);
  r.number("features", d.features);
  r.number("separation", d.separation);
  r.number("seed", seed);
  r.finish();
  if (d.classes < 1) throw ConfigError("classes", "must be positive");
  if (d.train_per_class < 0 || d.test_per_class < 0) throw ConfigError("train_per_class", "must be nonnegative");
  if (d.feature_count() < 1) throw ConfigError(d.image ? "channels" : "features", "sample size must be positive");
  if (!(d.separation >= 0.0)) throw ConfigError("separation", "must be nonnegative");
  return {d, seed};
}

inline runtime::RegretConfig regret_config_from_json(const json& j) {
  detail::Reader r(j, "");
  runtime::RegretConfig c;
  r.number("dim", c.dim);
  r.number("batch", c.batch);
  r.number("label_noise", c.label_noise);
  r.number("theta_scale", c.theta_scale);
  r.number("step", c.step);
  r.number("lambda", c.lambda);
  r.number("horizon", c.horizon);
  r.number("first_checkpoint", c.first_checkpoint);
  r.number("checkpoints", c.checkpoints);
  r.number("radius_factor", c.radius_factor);
  r.list("sigmas", c.sigmas);
  r.list("seeds", c.seeds);
  r.number("tail_points", c.tail_points);
  r.finish();
  if (c.dim < 1) throw ConfigError("dim", "must be positive");
  if (c.batch < 1) throw ConfigError("batch", "must be positive");
  if (!(c.step > 0.0)) throw ConfigError("step", "must be positive");
  if (c.first_checkpoint < 1) throw ConfigError("first_checkpoint", "must be positive");
  if (c.horizon < c.first_checkpoint) throw ConfigError("horizon", "must not be below first_checkpoint");
  if (c.checkpoints < 2) throw ConfigError("checkpoints", "must be at least 2");
  if (c.tail_points < 1) throw ConfigError("tail_points", "must be positive");
  if (c.sigmas.size() < 2) throw ConfigError("sigmas", "need at least two noise levels");
  for (std::size_t i = 0; i < c.sigmas.size(); ++i) {
    if (!(c.sigmas[i] >= 0.0)) throw ConfigError("sigmas[" + std::to_string(i) + "]", "must be nonnegative");
  }
  return c;
}

inline json regret_config_to_json(const runtime::RegretConfig& c) {
  return {{"dim", c.dim},         {"batch", c.batch},   {"label_noise", c.label_noise},
          {"theta_scale", c.theta_scale}, {"step", c.step}, {"lambda", c.lambda},
          {"horizon", c.horizon}, {"first_checkpoint", c.first_checkpoint}, {"checkpoints", c.checkpoints},
          {"radius_factor", c.radius_factor}, {"sigmas", c.sigmas}, {"seeds", c.seeds},
          {"tail_points", c.tail_points}};
}

}  // namespace oacsplit::bench
