#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "oacsplit/tensor.hpp"

namespace oacsplit::nn {

enum class Mode { train, eval };

// Trainable matrix plus its most recent gradient. Gradients use the
// convention dL = Re(sum(conj(grad) .* d value)).
struct Param {
  std::string name;
  CMatrix value;
  CMatrix grad;
  bool trainable = true;

  Param() = default;
  Param(std::string n, CMatrix v, bool t = true)
      : name(std::move(n)), value(std::move(v)), grad(CMatrix::Zero(value.rows(), value.cols())), trainable(t) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

// Whatever a layer needs to run its backward pass.
struct LayerCache {
  Shape input_shape;
  CMatrix a;  // layer-specific saved activation
  RVector s;  // layer-specific saved statistics
  bool valid = false;
  Mode mode = Mode::train;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string kind() const = 0;
  virtual Shape output_shape(const Shape& in) const = 0;
  virtual Tensor forward(const Tensor& x, Mode mode, LayerCache& cache) = 0;
  // Overwrites parameter gradients and returns the input gradient.
  virtual Tensor backward(const LayerCache& cache, const Tensor& g) = 0;
  virtual std::vector<Param*> params() { return {}; }
  virtual std::vector<Param*> buffers() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
  virtual nlohmann::json describe() const = 0;
};

inline void check_cache(const LayerCache& c, const Tensor& g, const Shape& out, const char* who) {
  if (!c.valid) throw StateError(std::string(who) + ": backward called without a forward cache");
  if (g.shape != out) throw DimensionError(std::string(who) + ": gradient shape " + shape_str(g.shape) + " != " + shape_str(out));
}

// y = W x + b on (B, in) tensors.
class Dense final : public Layer {
 public:
  Dense(Index in, Index out, Rng& rng, bool bias = true)
      : in_(in), out_(out), has_bias_(bias),
        w_("weight", random_complex(out, in, rng, 1.0 / static_cast<double>(in))),
        b_("bias", CMatrix::Zero(out, 1), bias) {}
  Dense(CMatrix w, CMatrix b)
      : in_(w.cols()), out_(w.rows()), has_bias_(b.size() > 0), w_("weight", std::move(w)),
        b_("bias", has_bias_ ? CMatrix(std::move(b)) : CMatrix(CMatrix::Zero(out_, 1)), has_bias_) {
    require_shape(b_.value, out_, 1, "dense bias");
  }

  std::string kind() const override { return "dense"; }
  Shape output_shape(const Shape& in) const override {
    if (in.size() != 2 || in[1] != in_) throw DimensionError("dense: input shape " + shape_str(in));
    return {in[0], out_};
  }
  Tensor forward(const Tensor& x, Mode, LayerCache& cache) override {
    const Shape out = output_shape(x.shape);
    Tensor y(out);
    y.mat().noalias() = w_.value * x.mat();
    if (has_bias_) y.mat().colwise() += b_.value.col(0);
    cache = {x.shape, x.mat(), {}, true};
    return y;
  }
  Tensor backward(const LayerCache& cache, const Tensor& g) override {
    check_cache(cache, g, output_shape(cache.input_shape), "dense");
    w_.grad.noalias() = g.mat() * cache.a.adjoint();
    b_.grad = has_bias_ ? CMatrix(g.mat().rowwise().sum()) : CMatrix::Zero(out_, 1);
    Tensor gx(cache.input_shape);
    gx.mat().noalias() = w_.value.adjoint() * g.mat();
    return gx;
  }
  std::vector<Param*> params() override {
    if (has_bias_) return {&w_, &b_};
    return {&w_};
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }
  nlohmann::json describe() const override { return {{"kind", kind()}, {"in", in_}, {"out", out_}, {"bias", has_bias_}}; }

  Param& weight() { return w_; }
  const Param& weight() const { return w_; }
  Param& bias() { return b_; }
  bool has_bias() const { return has_bias_; }

 private:
  Index in_, out_;
  bool has_bias_;
  Param w_, b_;
};

// 2-D cross-correlation, stride 1, zero "same" padding (odd kernel sizes).
// Kernels are stored as a C_out x (C_in * k * k) matrix; column (c*k + dy)*k + dx.
class Conv2d final : public Layer {
 public:
  Conv2d(Index c_in, Index c_out, Index k, Rng& rng, bool bias = true)
      : c_in_(c_in), c_out_(c_out), k_(k), has_bias_(bias),
        w_("kernel", random_complex(c_out, c_in * k * k, rng, 1.0 / static_cast<double>(c_in * k * k))),
        b_("bias", CMatrix::Zero(c_out, 1), bias) {
    if (k % 2 == 0) throw DimensionError("conv2d: kernel size must be odd");
  }
  Conv2d(Index c_in, Index k, CMatrix kernels, CMatrix bias)
      : c_in_(c_in), c_out_(kernels.rows()), k_(k), has_bias_(bias.size() > 0), w_("kernel", std::move(kernels)),
        b_("bias", has_bias_ ? CMatrix(std::move(bias)) : CMatrix(CMatrix::Zero(c_out_, 1)), has_bias_) {
    if (k % 2 == 0) throw DimensionError("conv2d: kernel size must be odd");
    require_shape(w_.value, c_out_, c_in * k * k, "conv2d kernels");
  }

  std::string kind() const override { return "conv2d"; }
  Shape output_shape(const Shape& in) const override {
    if (in.size() != 4 || in[1] != c_in_) throw DimensionError("conv2d: input shape " + shape_str(in));
    return {in[0], c_out_, in[2], in[3]};
  }

  CMatrix im2col(const Tensor& x) const {
    const Index b = x.shape[0], h = x.shape[2], w = x.shape[3], pad = k_ / 2;
    CMatrix cols = CMatrix::Zero(c_in_ * k_ * k_, b * h * w);
    for (Index bi = 0; bi < b; ++bi) {
      for (Index c = 0; c < c_in_; ++c) {
        const cplx* plane = x.data.data() + (bi * c_in_ + c) * h * w;
        for (Index dy = 0; dy < k_; ++dy) {
          for (Index dx = 0; dx < k_; ++dx) {
            const Index row = (c * k_ + dy) * k_ + dx;
            for (Index yy = 0; yy < h; ++yy) {
              const Index sy = yy + dy - pad;
              if (sy < 0 || sy >= h) continue;
              for (Index xx = 0; xx < w; ++xx) {
                const Index sx = xx + dx - pad;
                if (sx < 0 || sx >= w) continue;
                cols(row, (bi * h + yy) * w + xx) = plane[sy * w + sx];
              }
            }
          }
        }
      }
    }
    return cols;
  }

  Tensor col2im(const CMatrix& cols, const Shape& in) const {
    const Index b = in[0], h = in[2], w = in[3], pad = k_ / 2;
    Tensor x(in);
    for (Index bi = 0; bi < b; ++bi) {
      for (Index c = 0; c < c_in_; ++c) {
        cplx* plane = x.data.data() + (bi * c_in_ + c) * h * w;
        for (Index dy = 0; dy < k_; ++dy) {
          for (Index dx = 0; dx < k_; ++dx) {
            const Index row = (c * k_ + dy) * k_ + dx;
            for (Index yy = 0; yy < h; ++yy) {
              const Index sy = yy + dy - pad;
              if (sy < 0 || sy >= h) continue;
              for (Index xx = 0; xx < w; ++xx) {
                const Index sx = xx + dx - pad;
                if (sx < 0 || sx >= w) continue;
                plane[sy * w + sx] += cols(row, (bi * h + yy) * w + xx);
              }
            }
          }
        }
      }
    }
    return x;
  }

  Tensor forward(const Tensor& x, Mode, LayerCache& cache) override {
    const Shape out = output_shape(x.shape);
    CMatrix cols = im2col(x);
    CMatrix y = w_.value * cols;
    if (has_bias_) y.colwise() += b_.value.col(0);
    cache = {x.shape, std::move(cols), {}, true};
    return from_channel_columns(y, out[0], out[2], out[3]);
  }
  Tensor backward(const LayerCache& cache, const Tensor& g) override {
    check_cache(cache, g, output_shape(cache.input_shape), "conv2d");
    const CMatrix gy = to_channel_columns(g);
    w_.grad.noalias() = gy * cache.a.adjoint();
    b_.grad = has_bias_ ? CMatrix(gy.rowwise().sum()) : CMatrix::Zero(c_out_, 1);
    return col2im(w_.value.adjoint() * gy, cache.input_shape);
  }
  std::vector<Param*> params() override {
    if (has_bias_) return {&w_, &b_};
    return {&w_};
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }
  nlohmann::json describe() const override {
    return {{"kind", kind()}, {"in", c_in_}, {"out", c_out_}, {"k", k_}, {"bias", has_bias_}};
  }

  Index in_channels() const { return c_in_; }
  Index out_channels() const { return c_out_; }
  Index kernel_size() const { return k_; }
  bool has_bias() const { return has_bias_; }
  Param& kernels() { return w_; }
  const Param& kernels() const { return w_; }
  Param& bias() { return b_; }

 private:
  Index c_in_, c_out_, k_;
  bool has_bias_;
  Param w_, b_;
};

// Batch normalization of real and imaginary parts separately, followed by a
// complex affine map. Features are the second axis (channels for 4-D input).
class ComplexBN final : public Layer {
 public:
  static constexpr double kEps = 1e-8;
  static constexpr double kMomentum = 0.1;

  explicit ComplexBN(Index features)
      : f_(features), gamma_("gamma", CMatrix::Ones(features, 1)), beta_("beta", CMatrix::Zero(features, 1)),
        mean_("running_mean", CMatrix::Zero(features, 1), false),
        var_("running_var", CMatrix::Constant(features, 1, cplx(1.0, 1.0)), false) {}

  std::string kind() const override { return "complex_bn"; }
  Shape output_shape(const Shape& in) const override {
    if ((in.size() != 2 && in.size() != 4) || in[1] != f_) throw DimensionError("complex_bn: input shape " + shape_str(in));
    return in;
  }

  Tensor forward(const Tensor& x, Mode mode, LayerCache& cache) override {
    output_shape(x.shape);
    const CMatrix xc = to_signal_columns(x);
    const Index n = xc.cols();
    Eigen::ArrayXXd re = xc.real().array(), im = xc.imag().array();
    RVector inv(2 * f_);
    if (mode == Mode::train) {
      if (n < 2) throw DimensionError("complex_bn: training needs at least two values per feature");
      const Eigen::ArrayXd mr = re.rowwise().mean(), mi = im.rowwise().mean();
      re.colwise() -= mr;
      im.colwise() -= mi;
      const Eigen::ArrayXd vr = re.square().rowwise().mean(), vi = im.square().rowwise().mean();
      for (Index j = 0; j < f_; ++j) {
        mean_.value(j, 0) = (1.0 - kMomentum) * mean_.value(j, 0) + kMomentum * cplx(mr(j), mi(j));
        var_.value(j, 0) = (1.0 - kMomentum) * var_.value(j, 0) + kMomentum * cplx(vr(j), vi(j));
      }
      inv.head(f_) = (vr + kEps).rsqrt().matrix();
      inv.tail(f_) = (vi + kEps).rsqrt().matrix();
    } else {
      for (Index j = 0; j < f_; ++j) {
        re.row(j) -= mean_.value(j, 0).real();
        im.row(j) -= mean_.value(j, 0).imag();
        inv(j) = 1.0 / std::sqrt(var_.value(j, 0).real() + kEps);
        inv(f_ + j) = 1.0 / std::sqrt(var_.value(j, 0).imag() + kEps);
      }
    }
    re.colwise() *= inv.head(f_).array();
    im.colwise() *= inv.tail(f_).array();
    CMatrix xhat(f_, n);
    xhat.real() = re.matrix();
    xhat.imag() = im.matrix();
    CMatrix y = gamma_.value.col(0).asDiagonal() * xhat;
    y.colwise() += beta_.value.col(0);
    cache = {x.shape, std::move(xhat), std::move(inv), true, mode};
    return from_signal_columns(y, x.shape);
  }

  Tensor backward(const LayerCache& cache, const Tensor& g) override {
    check_cache(cache, g, cache.input_shape, "complex_bn");
    const CMatrix gy = to_signal_columns(g);
    const CMatrix& xhat = cache.a;
    const double n = static_cast<double>(xhat.cols());
    gamma_.grad = (gy.cwiseProduct(xhat.conjugate())).rowwise().sum();
    beta_.grad = gy.rowwise().sum();
    const CMatrix gxhat = gamma_.value.conjugate().col(0).asDiagonal() * gy;
    CMatrix gx(f_, xhat.cols());
    if (cache.mode == Mode::eval) {
      gx.real() = cache.s.head(f_).asDiagonal() * gxhat.real();
      gx.imag() = cache.s.tail(f_).asDiagonal() * gxhat.imag();
    } else {
      auto part = [&](const Eigen::MatrixXd& gp, const Eigen::MatrixXd& xp, const auto& inv) {
        Eigen::ArrayXXd out = gp.array();
        const Eigen::ArrayXd sum_g = gp.rowwise().sum().array();
        const Eigen::ArrayXd sum_gx = (gp.array() * xp.array()).rowwise().sum();
        out.colwise() -= sum_g / n;
        out -= xp.array().colwise() * (sum_gx / n);
        out.colwise() *= inv.array();
        return Eigen::MatrixXd(out.matrix());
      };
      gx.real() = part(gxhat.real(), xhat.real(), cache.s.head(f_));
      gx.imag() = part(gxhat.imag(), xhat.imag(), cache.s.tail(f_));
    }
    return from_signal_columns(gx, cache.input_shape);
  }

  std::vector<Param*> params() override { return {&gamma_, &beta_}; }
  std::vector<Param*> buffers() override { return {&mean_, &var_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<ComplexBN>(*this); }
  nlohmann::json describe() const override { return {{"kind", kind()}, {"features", f_}}; }

  Param& gamma() { return gamma_; }
  Param& beta() { return beta_; }

 private:
  Index f_;
  Param gamma_, beta_, mean_, var_;
};

// ReLU on real and imaginary parts independently.
class CReLU final : public Layer {
 public:
  std::string kind() const override { return "crelu"; }
  Shape output_shape(const Shape& in) const override { return in; }
  Tensor forward(const Tensor& x, Mode, LayerCache& cache) override {
    Tensor y(x.shape);
    for (Index i = 0; i < x.data.size(); ++i) y.data(i) = {std::max(x.data(i).real(), 0.0), std::max(x.data(i).imag(), 0.0)};
    cache = {x.shape, CMatrix(x.data), {}, true};
    return y;
  }
  Tensor backward(const LayerCache& cache, const Tensor& g) override {
    check_cache(cache, g, cache.input_shape, "crelu");
    Tensor gx(cache.input_shape);
    for (Index i = 0; i < g.data.size(); ++i) {
      const cplx x = cache.a(i, 0);
      gx.data(i) = {x.real() > 0.0 ? g.data(i).real() : 0.0, x.imag() > 0.0 ? g.data(i).imag() : 0.0};
    }
    return gx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<CReLU>(*this); }
  nlohmann::json describe() const override { return {{"kind", kind()}}; }
};

// Non-overlapping average pooling; window 0 pools the whole image.
class AvgPool final : public Layer {
 public:
  explicit AvgPool(Index window) : window_(window) {}
  std::string kind() const override { return "avg_pool"; }
  Shape output_shape(const Shape& in) const override {
    if (in.size() != 4) throw DimensionError("avg_pool: needs (B, C, H, W), got " + shape_str(in));
    const Index wy = window_ ? window_ : in[2], wx = window_ ? window_ : in[3];
    if (in[2] % wy || in[3] % wx) throw DimensionError("avg_pool: window does not divide image size");
    return {in[0], in[1], in[2] / wy, in[3] / wx};
  }
  Tensor forward(const Tensor& x, Mode, LayerCache& cache) override {
    const Shape out = output_shape(x.shape);
    const Index wy = x.shape[2] / out[2], wx = x.shape[3] / out[3];
    const double scale = 1.0 / static_cast<double>(wy * wx);
    Tensor y(out);
    const Index planes = out[0] * out[1];
    for (Index p = 0; p < planes; ++p) {
      for (Index yy = 0; yy < x.shape[2]; ++yy) {
        for (Index xx = 0; xx < x.shape[3]; ++xx) {
          y.data((p * out[2] + yy / wy) * out[3] + xx / wx) += scale * x.data((p * x.shape[2] + yy) * x.shape[3] + xx);
        }
      }
    }
    cache = {x.shape, {}, {}, true};
    return y;
  }
  Tensor backward(const LayerCache& cache, const Tensor& g) override {
    const Shape out = output_shape(cache.input_shape);
    check_cache(cache, g, out, "avg_pool");
    const Shape& in = cache.input_shape;
    const Index wy = in[2] / out[2], wx = in[3] / out[3];
    const double scale = 1.0 / static_cast<double>(wy * wx);
    Tensor gx(in);
    const Index planes = in[0] * in[1];
    for (Index p = 0; p < planes; ++p) {
      for (Index yy = 0; yy < in[2]; ++yy) {
        for (Index xx = 0; xx < in[3]; ++xx) {
          gx.data((p * in[2] + yy) * in[3] + xx) = scale * g.data((p * out[2] + yy / wy) * out[3] + xx / wx);
        }
      }
    }
    return gx;
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<AvgPool>(*this); }
  nlohmann::json describe() const override { return {{"kind", kind()}, {"window", window_}}; }

 private:
  Index window_;
};

class Flatten final : public Layer {
 public:
  std::string kind() const override { return "flatten"; }
  Shape output_shape(const Shape& in) const override {
    if (in.empty()) throw DimensionError("flatten: empty shape");
    return {in[0], shape_size(in) / std::max<Index>(in[0], 1)};
  }
  Tensor forward(const Tensor& x, Mode, LayerCache& cache) override {
    cache = {x.shape, {}, {}, true};
    return Tensor(output_shape(x.shape), x.data);
  }
  Tensor backward(const LayerCache& cache, const Tensor& g) override {
    check_cache(cache, g, output_shape(cache.input_shape), "flatten");
    return Tensor(cache.input_shape, g.data);
  }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Flatten>(*this); }
  nlohmann::json describe() const override { return {{"kind", kind()}}; }
};

}  // namespace oacsplit::nn
