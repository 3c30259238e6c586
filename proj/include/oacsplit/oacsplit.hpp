#pragma once

// Everything in one include.
#include "oacsplit/errors.hpp"
#include "oacsplit/rng.hpp"
#include "oacsplit/linalg.hpp"
#include "oacsplit/tensor.hpp"
#include "oacsplit/channel.hpp"
#include "oacsplit/nn/layers.hpp"
#include "oacsplit/nn/net.hpp"
#include "oacsplit/nn/optimizer.hpp"
#include "oacsplit/nn/checkpoint.hpp"
#include "oacsplit/oac/layer.hpp"
#include "oacsplit/oac/decompose.hpp"
#include "oacsplit/oac/conv.hpp"
#include "oacsplit/oac/snr.hpp"
#include "oacsplit/runtime/covariance.hpp"
#include "oacsplit/runtime/system.hpp"
#include "oacsplit/runtime/network.hpp"
#include "oacsplit/runtime/regret.hpp"
#include "oacsplit/bench/dataset.hpp"
#include "oacsplit/bench/config.hpp"
#include "oacsplit/bench/cost.hpp"
#include "oacsplit/bench/experiment.hpp"
#include "oacsplit/bench/verify.hpp"
