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

// Central finite-difference checks for the smooth pieces of the model: an
// affine layer feeding the rate cross-entropy. Spiking layers are excluded
// because their forward map is piecewise constant.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "snnfuse/affine.hpp"
#include "snnfuse/loss.hpp"
#include "snnfuse/neuron.hpp"
#include "snnfuse/rng.hpp"

namespace snnfuse {

struct GradCheckResult {
  std::size_t in_width = 0, out_width = 0, t_len = 0, batch = 0;
  /// ||fd - analytic|| / ||analytic|| over all weights, then over all biases.
  double rel_error_weights = 0.0;
  double rel_error_bias = 0.0;

  double worst() const { return std::max(rel_error_weights, rel_error_bias); }
};

namespace detail {

inline double relative_l2(const std::vector<double>& fd, const std::vector<float>& an) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    const double d = fd[i] - an[i];
    num += d * d;
    den += static_cast<double>(an[i]) * an[i];
  }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace detail

/// One random case: loss = rate_cross_entropy(affine(x), labels), with the
/// affine output standing in for the spike record so the map stays smooth.
inline GradCheckResult affine_loss_gradcheck(std::uint64_t seed, float step = 1e-2f) {
  Rng rng(seed);
  GradCheckResult r;
  r.in_width = 1 + rng.below(8);
  r.out_width = 2 + rng.below(5);
  r.t_len = 1 + rng.below(8);
  r.batch = 1 + rng.below(6);

  AffineLayer layer = AffineLayer::uniform_init(r.in_width, r.out_width, rng);
  TimeMajorTensor x(r.t_len, r.batch, r.in_width);
  for (auto& v : x.data()) v = rng.uniform(0.0f, 1.0f);
  std::vector<std::uint32_t> labels(r.batch);
  for (auto& l : labels) l = static_cast<std::uint32_t>(rng.below(r.out_width));

  auto loss_of = [&](const AffineLayer& a) {
    return rate_cross_entropy(affine_apply(a, x), labels).loss;
  };
  const auto base = rate_cross_entropy(affine_apply(layer, x), labels);
  const auto analytic = affine_backward(layer, base.g_y, x).grads;

  auto probe = [&](std::vector<float>& params) {
    std::vector<double> fd(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const float keep = params[i];
      const float hi = keep + step;
      const float lo = keep - step;
      params[i] = hi;
      const double l_hi = loss_of(layer);
      params[i] = lo;
      const double l_lo = loss_of(layer);
      params[i] = keep;
      fd[i] = (l_hi - l_lo) / (static_cast<double>(hi) - static_cast<double>(lo));
    }
    return fd;
  };
  r.rel_error_weights = detail::relative_l2(probe(layer.weights), analytic.weights);
  r.rel_error_bias = detail::relative_l2(probe(layer.bias), analytic.bias);
  return r;
}

/// Trapezoid integral of the surrogate over [-half_width, half_width].
inline double surrogate_integral(float alpha = 4.0f, double half_width = 20.0, double h = 1e-3) {
  const auto n = static_cast<std::size_t>(std::llround(2.0 * half_width / h));
  double sum = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const double u = -half_width + static_cast<double>(i) * h;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    sum += w * surrogate(static_cast<float>(u), alpha);
  }
  return sum * h;
}

/// Largest |sum_c g_y(t, b, c)| over all rows of a random loss gradient.
inline double softmax_row_sum_error(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t t = 1 + rng.below(16), b = 1 + rng.below(8), c = 2 + rng.below(9);
  TimeMajorTensor y(t, b, c);
  for (auto& v : y.data()) v = rng.bernoulli(0.5f) ? 1.0f : 0.0f;
  std::vector<std::uint32_t> labels(b);
  for (auto& l : labels) l = static_cast<std::uint32_t>(rng.below(c));
  const auto res = rate_cross_entropy(y, labels);
  // Rows are scaled by 1/(T B); undo that so the bound is scale free.
  const double scale = static_cast<double>(t) * static_cast<double>(b);
  double worst = 0.0;
  for (std::size_t s = 0; s < t; ++s) {
    for (std::size_t r = 0; r < b; ++r) {
      double sum = 0.0;
      for (std::size_t k = 0; k < c; ++k) sum += res.g_y.at(s, r, k);
      worst = std::max(worst, std::abs(sum * scale));
    }
  }
  return worst;
}

}  // namespace snnfuse
