#pragma once

#include "oacsplit/oac/layer.hpp"

namespace oacsplit::oac {

// Applies the channel-mixing matrix W (N_co' x N_co) to the kernels directly:
// K' = (W kron I_{k x k}) K, which in the row layout of Conv2d is W * K.
inline CMatrix mix_kernels(const CMatrix& W, const CMatrix& kernels) {
  if (W.cols() != kernels.rows()) throw DimensionError("mix_kernels: W columns must equal the output channel count");
  return W * kernels;
}

// Per-pixel channel mixing of (B, C, H, W) feature maps.
inline Tensor mix_channels(const CMatrix& W, const Tensor& maps) {
  const CMatrix cols = to_channel_columns(maps);
  if (W.cols() != cols.rows()) throw DimensionError("mix_channels: W columns must equal the channel count");
  return from_channel_columns(W * cols, maps.shape[0], maps.shape[2], maps.shape[3]);
}

struct TensorForward {
  Tensor y;
  ForwardTranscript transcript;
};

// Over-the-air mixing of a 2-D (B, N_i) or 4-D (B, N_i, H, W) tensor. For
// images every pixel position of every sample is one channel use.
inline TensorForward oac_tensor_forward(const OacLayer& layer, const Tensor& x, const ChannelState& ch, const NoiseModel& noise,
                                        Rng& rng) {
  ForwardTranscript t = layer.transmit(to_signal_columns(x), ch, noise, rng);
  const CMatrix& y = layer.combine(t);
  Shape out = x.shape;
  out[1] = layer.n_out();
  return {from_signal_columns(y, out), std::move(t)};
}

struct TensorBackward {
  Tensor g_x;
  BackwardTranscript transcript;
};

inline TensorBackward oac_tensor_backward(OacLayer& layer, const ForwardTranscript& f, const Tensor& g_y, const Shape& x_shape,
                                          const ChannelState& ch, const NoiseModel& noise, Rng& rng) {
  BackwardResult b = oac_fc_backward(layer, f, to_signal_columns(g_y), ch, noise, rng);
  return {from_signal_columns(b.g_x, x_shape), std::move(b.transcript)};
}

// Convolutional layer split across a link: the transmitter computes the
// spatial convolution with its local kernels, and the over-the-air layer
// realizes the channel-mixing matrix applied to the resulting feature maps.
struct OacConvLayer {
  nn::Conv2d spatial;
  OacLayer mixing;
};

inline TensorForward oac_conv_forward(OacConvLayer& layer, const Tensor& images, const ChannelState& ch, const NoiseModel& noise,
                                      Rng& rng) {
  nn::LayerCache cache;
  const Tensor maps = layer.spatial.forward(images, nn::Mode::eval, cache);
  return oac_tensor_forward(layer.mixing, maps, ch, noise, rng);
}

}  // namespace oacsplit::oac
