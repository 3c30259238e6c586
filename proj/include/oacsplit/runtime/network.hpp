#pragma once

#include "oacsplit/nn/net.hpp"

namespace oacsplit::runtime {

// Small convolutional classifier for (B, C, H, W) inputs with even H and W.
// Mixing layers (1x1 convolutions) mark the split points:
//   2 nodes: conv3x3(C->8) BN CReLU conv3x3(8->16) [mix 16] BN CReLU pool2 flatten dense
//   3 nodes: conv3x3(C->8) [mix 8] BN CReLU conv3x3(8->16) [mix 16] BN CReLU pool2 flatten dense
inline nn::ComplexNet make_conv_network(Index channels, Index height, Index width, Index classes, int nodes, Rng& rng) {
  if (nodes != 2 && nodes != 3) throw ConfigError("nodes", "the built-in network supports 2 or 3 nodes");
  if (height % 2 || width % 2) throw ConfigError("dataset.image", "image height and width must be even");
  nn::ComplexNet net;
  net.add<nn::Conv2d>(channels, 8, 3, rng);
  if (nodes == 3) {
    net.split_points.push_back(net.size());
    net.add<nn::Conv2d>(8, 8, 1, rng);
  }
  net.add<nn::ComplexBN>(8);
  net.add<nn::CReLU>();
  net.add<nn::Conv2d>(8, 16, 3, rng);
  net.split_points.push_back(net.size());
  net.add<nn::Conv2d>(16, 16, 1, rng);
  net.add<nn::ComplexBN>(16);
  net.add<nn::CReLU>();
  net.add<nn::AvgPool>(2);
  net.add<nn::Flatten>();
  net.add<nn::Dense>(16 * (height / 2) * (width / 2), classes, rng);
  return net;
}

// Fully connected variant for (B, F) inputs: dense(F->16) [mix 16] BN CReLU dense.
inline nn::ComplexNet make_dense_network(Index features, Index classes, Index hidden, Rng& rng) {
  nn::ComplexNet net;
  net.add<nn::Dense>(features, hidden, rng);
  net.split_points.push_back(net.size());
  net.add<nn::Dense>(hidden, hidden, rng);
  net.add<nn::ComplexBN>(hidden);
  net.add<nn::CReLU>();
  net.add<nn::Dense>(hidden, classes, rng);
  return net;
}

}  // namespace oacsplit::runtime
