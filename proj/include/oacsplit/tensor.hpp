#pragma once

#include <initializer_list>
#include <numeric>
#include <string>
#include <vector>

#include "oacsplit/linalg.hpp"

namespace oacsplit {

using Shape = std::vector<Index>;

inline Index shape_size(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), Index{1}, [](Index a, Index b) { return a * b; });
}

inline std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

// Dense complex tensor, row-major, batch dimension first. A 2-D tensor
// (B, F) doubles as an F x B column-major matrix with one sample per column.
struct Tensor {
  Shape shape;
  CVector data;

  Tensor() = default;
  explicit Tensor(Shape s) : shape(std::move(s)), data(CVector::Zero(shape_size(shape))) {}
  Tensor(Shape s, CVector d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_size(shape)) throw DimensionError("tensor: data size does not match shape " + shape_str(shape));
  }

  Index rank() const { return static_cast<Index>(shape.size()); }
  Index batch() const { return shape.empty() ? 0 : shape[0]; }
  Index features() const { return batch() ? data.size() / batch() : 0; }

  // Feature-by-batch view.
  Eigen::Map<CMatrix> mat() { return {data.data(), features(), batch()}; }
  Eigen::Map<const CMatrix> mat() const { return {data.data(), features(), batch()}; }

  static Tensor from_columns(const CMatrix& m) {
    Tensor t({m.cols(), m.rows()});
    t.mat() = m;
    return t;
  }

  bool operator==(const Tensor& o) const { return shape == o.shape && data == o.data; }
};

inline void require_rank(const Tensor& t, Index rank, const char* what) {
  if (t.rank() != rank) {
    throw DimensionError(std::string(what) + ": expected rank " + std::to_string(rank) + " tensor, got " + shape_str(t.shape));
  }
}

// (B, C, H, W) -> C x (B*H*W); column index (b*H + h)*W + w.
inline CMatrix to_channel_columns(const Tensor& t) {
  require_rank(t, 4, "to_channel_columns");
  const Index b = t.shape[0], c = t.shape[1], hw = t.shape[2] * t.shape[3];
  CMatrix out(c, b * hw);
  for (Index bi = 0; bi < b; ++bi) {
    for (Index ci = 0; ci < c; ++ci) {
      out.row(ci).segment(bi * hw, hw) = t.data.segment((bi * c + ci) * hw, hw).transpose();
    }
  }
  return out;
}

inline Tensor from_channel_columns(const CMatrix& m, Index batch, Index height, Index width) {
  const Index c = m.rows(), hw = height * width;
  if (m.cols() != batch * hw) throw DimensionError("from_channel_columns: column count mismatch");
  Tensor t({batch, c, height, width});
  for (Index bi = 0; bi < batch; ++bi) {
    for (Index ci = 0; ci < c; ++ci) {
      t.data.segment((bi * c + ci) * hw, hw) = m.row(ci).segment(bi * hw, hw).transpose();
    }
  }
  return t;
}

// Columns that carry one feature vector each: samples for 2-D tensors,
// pixels for 4-D tensors.
inline CMatrix to_signal_columns(const Tensor& t) {
  if (t.rank() == 2) return t.mat();
  if (t.rank() == 4) return to_channel_columns(t);
  throw DimensionError("signal columns need a rank 2 or 4 tensor, got " + shape_str(t.shape));
}

inline Tensor from_signal_columns(const CMatrix& m, const Shape& like) {
  if (like.size() == 2) return Tensor::from_columns(m);
  if (like.size() == 4) return from_channel_columns(m, like[0], like[2], like[3]);
  throw DimensionError("signal columns need a rank 2 or 4 shape");
}

}  // namespace oacsplit
