// Copyright 2026 The snnfuse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "snnfuse/rng.hpp"
#include "snnfuse/tensor.hpp"

namespace snnfuse {

struct AdamConfig {
  float learning_rate = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

struct AffineGrads {
  std::vector<float> weights;
  std::vector<float> bias;

  AffineGrads() = default;
  AffineGrads(std::size_t in_width, std::size_t out_width)
      : weights(in_width * out_width, 0.0f), bias(out_width, 0.0f) {}

  friend bool operator==(const AffineGrads&, const AffineGrads&) = default;
};

/// Fully connected synapses applied independently at every time step:
/// out(t, b, :) = W x(t, b, :) + bias, with W stored row-major [out x in].
struct AffineLayer {
  std::size_t in_width = 0;
  std::size_t out_width = 0;
  std::vector<float> weights;
  std::vector<float> bias;

  // Adam state; moments start at zero.
  std::vector<float> m_weights, v_weights, m_bias, v_bias;
  std::uint64_t step = 0;

  AffineLayer() = default;
  AffineLayer(std::size_t in, std::size_t out)
      : in_width(in),
        out_width(out),
        weights(in * out, 0.0f),
        bias(out, 0.0f),
        m_weights(in * out, 0.0f),
        v_weights(in * out, 0.0f),
        m_bias(out, 0.0f),
        v_bias(out, 0.0f) {
    if (in == 0 || out == 0) throw std::invalid_argument("snnfuse: affine widths must be >= 1");
  }

  /// Weights and bias uniform in +-1/sqrt(in).
  static AffineLayer uniform_init(std::size_t in, std::size_t out, Rng& rng) {
    AffineLayer layer(in, out);
    const float bound = 1.0f / std::sqrt(static_cast<float>(in));
    for (auto& w : layer.weights) w = rng.uniform(-bound, bound);
    for (auto& b : layer.bias) b = rng.uniform(-bound, bound);
    return layer;
  }

  float& w(std::size_t o, std::size_t i) { return weights[o * in_width + i]; }
  float w(std::size_t o, std::size_t i) const { return weights[o * in_width + i]; }
};

namespace detail {

// Row kernels. A row is one (t, b) pair; rows of a tensor are contiguous, so
// a range of rows [r_lo, r_hi) is a plain offset into the flat data. Each
// output element is accumulated in a fixed order so any partition of the
// rows (or of the output neurons, for the parameter gradients) reproduces the
// unpartitioned result bit for bit.

inline void affine_rows(const AffineLayer& layer, const float* x, float* out, std::size_t rows) {
  const std::size_t in = layer.in_width;
  const std::size_t n_out = layer.out_width;
  for (std::size_t r = 0; r < rows; ++r) {
    const float* xr = x + r * in;
    float* yr = out + r * n_out;
    for (std::size_t o = 0; o < n_out; ++o) {
      const float* wr = layer.weights.data() + o * in;
      float acc = layer.bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
      yr[o] = acc;
    }
  }
}

inline void affine_input_grad_rows(const AffineLayer& layer, const float* g_out, float* g_in,
                                   std::size_t rows) {
  const std::size_t in = layer.in_width;
  const std::size_t n_out = layer.out_width;
  for (std::size_t r = 0; r < rows; ++r) {
    const float* gr = g_out + r * n_out;
    float* gi = g_in + r * in;
    std::fill_n(gi, in, 0.0f);
    for (std::size_t o = 0; o < n_out; ++o) {
      const float go = gr[o];
      const float* wr = layer.weights.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) gi[i] += go * wr[i];
    }
  }
}

/// Accumulates parameter gradients of output neurons [o_lo, o_hi) over
/// `rows` rows, in row order, into `grads` (which must be zeroed by the
/// caller for a fresh reduction).
inline void affine_param_grad_rows(const AffineLayer& layer, const float* g_out, const float* x,
                                   std::size_t rows, std::size_t o_lo, std::size_t o_hi,
                                   AffineGrads& grads) {
  const std::size_t in = layer.in_width;
  const std::size_t n_out = layer.out_width;
  for (std::size_t r = 0; r < rows; ++r) {
    const float* gr = g_out + r * n_out;
    const float* xr = x + r * in;
    for (std::size_t o = o_lo; o < o_hi; ++o) {
      const float go = gr[o];
      grads.bias[o] += go;
      float* dw = grads.weights.data() + o * in;
      for (std::size_t i = 0; i < in; ++i) dw[i] += go * xr[i];
    }
  }
}

}  // namespace detail

inline TimeMajorTensor affine_apply(const AffineLayer& layer, const TimeMajorTensor& x) {
  if (x.width() != layer.in_width) {
    throw std::invalid_argument("snnfuse: affine input width " + std::to_string(x.width()) +
                                " != " + std::to_string(layer.in_width));
  }
  TimeMajorTensor out(x.t_len(), x.batch(), layer.out_width);
  detail::affine_rows(layer, x.data().data(), out.data().data(), x.t_len() * x.batch());
  return out;
}

struct AffineBackward {
  TimeMajorTensor g_in;
  AffineGrads grads;
};

inline AffineBackward affine_backward(const AffineLayer& layer, const TimeMajorTensor& g_out,
                                      const TimeMajorTensor& x_saved) {
  if (g_out.width() != layer.out_width || x_saved.width() != layer.in_width ||
      g_out.t_len() != x_saved.t_len() || g_out.batch() != x_saved.batch()) {
    throw std::invalid_argument("snnfuse: affine_backward shape mismatch");
  }
  const std::size_t rows = g_out.t_len() * g_out.batch();
  AffineBackward out{TimeMajorTensor(x_saved.t_len(), x_saved.batch(), layer.in_width),
                     AffineGrads(layer.in_width, layer.out_width)};
  detail::affine_input_grad_rows(layer, g_out.data().data(), out.g_in.data().data(), rows);
  detail::affine_param_grad_rows(layer, g_out.data().data(), x_saved.data().data(), rows, 0,
                                 layer.out_width, out.grads);
  return out;
}

/// Bias-corrected Adam. Throws std::domain_error on a non-finite gradient
/// before touching any parameter.
inline void adam_step(AffineLayer& layer, const AffineGrads& grads, const AdamConfig& cfg) {
  if (grads.weights.size() != layer.weights.size() || grads.bias.size() != layer.bias.size()) {
    throw std::invalid_argument("snnfuse: adam_step gradient shape mismatch");
  }
  auto check_finite = [](const std::vector<float>& g, const char* what) {
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw std::domain_error(std::string("snnfuse: non-finite ") + what + " gradient at index " +
                                std::to_string(i));
      }
    }
  };
  check_finite(grads.weights, "weight");
  check_finite(grads.bias, "bias");

  ++layer.step;
  const double b1 = cfg.beta1;
  const double b2 = cfg.beta2;
  const double t = static_cast<double>(layer.step);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  auto update = [&](std::vector<float>& theta, std::vector<float>& m, std::vector<float>& v,
                    const std::vector<float>& g) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      const double step = cfg.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + cfg.epsilon);
      theta[i] = static_cast<float>(theta[i] - step);
    }
  };
  update(layer.weights, layer.m_weights, layer.v_weights, grads.weights);
  update(layer.bias, layer.m_bias, layer.v_bias, grads.bias);
}

}  // namespace snnfuse
