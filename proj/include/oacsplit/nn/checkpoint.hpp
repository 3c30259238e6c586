#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oacsplit/nn/optimizer.hpp"

namespace oacsplit::nn {

// Matrix record: {"rows", "cols", "data": [re0, im0, re1, im1, ...]} in
// column-major order. JSON number formatting round-trips doubles exactly.
inline nlohmann::json matrix_to_json(const CMatrix& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(2 * m.size()));
  for (Index i = 0; i < m.size(); ++i) {
    flat.push_back(m.data()[i].real());
    flat.push_back(m.data()[i].imag());
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", flat}};
}

inline CMatrix matrix_from_json(const nlohmann::json& j) {
  const Index rows = j.at("rows").get<Index>(), cols = j.at("cols").get<Index>();
  const auto flat = j.at("data").get<std::vector<double>>();
  if (static_cast<Index>(flat.size()) != 2 * rows * cols) throw DimensionError("matrix record: data length mismatch");
  CMatrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = {flat[2 * i], flat[2 * i + 1]};
  return m;
}

inline nlohmann::json params_to_json(const std::vector<Param*>& ps) {
  nlohmann::json out = nlohmann::json::array();
  for (const Param* p : ps) {
    nlohmann::json e = matrix_to_json(p->value);
    e["name"] = p->name;
    e["trainable"] = p->trainable;
    out.push_back(std::move(e));
  }
  return out;
}

inline void params_from_json(const nlohmann::json& j, const std::vector<Param*>& ps) {
  if (j.size() != ps.size()) throw StateError("checkpoint: parameter count mismatch");
  for (std::size_t i = 0; i < ps.size(); ++i) {
    CMatrix v = matrix_from_json(j[i]);
    if (v.rows() != ps[i]->value.rows() || v.cols() != ps[i]->value.cols() || j[i].at("name") != ps[i]->name) {
      throw StateError("checkpoint: parameter " + std::to_string(i) + " does not match the model");
    }
    ps[i]->value = std::move(v);
    ps[i]->trainable = j[i].value("trainable", true);
  }
}

inline nlohmann::json optimizer_to_json(const Optimizer& o) {
  nlohmann::json m = nlohmann::json::array(), v = nlohmann::json::array();
  for (const auto& x : o.m) m.push_back(matrix_to_json(x));
  for (const auto& x : o.v) v.push_back(matrix_to_json(x));
  return {{"kind", to_string(o.kind)}, {"lr", o.lr}, {"beta1", o.beta1}, {"beta2", o.beta2},
          {"eps", o.eps}, {"step", o.step_count}, {"m", m}, {"v", v}};
}

inline Optimizer optimizer_from_json(const nlohmann::json& j) {
  Optimizer o(optimizer_from_string(j.at("kind").get<std::string>()), j.at("lr").get<double>());
  o.beta1 = j.at("beta1").get<double>();
  o.beta2 = j.at("beta2").get<double>();
  o.eps = j.at("eps").get<double>();
  o.step_count = j.at("step").get<std::uint64_t>();
  for (const auto& x : j.at("m")) o.m.push_back(matrix_from_json(x));
  for (const auto& x : j.at("v")) o.v.push_back(matrix_from_json(x));
  return o;
}

// Full training state of one parameter set: values, running statistics,
// optimizer moments and step counter.
inline nlohmann::json make_checkpoint(const std::vector<Param*>& params, const std::vector<Param*>& buffers,
                                      const Optimizer& opt) {
  return {{"format", "oacsplit-checkpoint"}, {"version", 1}, {"params", params_to_json(params)},
          {"buffers", params_to_json(buffers)}, {"optimizer", optimizer_to_json(opt)}};
}

inline Optimizer restore_checkpoint(const nlohmann::json& j, const std::vector<Param*>& params,
                                    const std::vector<Param*>& buffers) {
  if (j.value("format", "") != "oacsplit-checkpoint") throw StateError("checkpoint: unrecognized format");
  params_from_json(j.at("params"), params);
  params_from_json(j.at("buffers"), buffers);
  return optimizer_from_json(j.at("optimizer"));
}

}  // namespace oacsplit::nn
