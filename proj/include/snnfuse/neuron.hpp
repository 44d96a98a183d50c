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

// Leaky integrate-and-fire primitives.
//
//   forward:  v[t] = k_tau * v[t-1] * (1 - y[t-1]) + v_rest * y[t-1] + x[t]
//             y[t] = 1 if v[t] - v_th >= 0 else 0
//   backward: gx[t] = k_tau * gv[t+1] * (1 - y[t] - v[t] * d) + gy[t] * d
//             with d = surrogate(v[t] - v_th) and gv[t+1] == gx[t+1].
//
// Every engine in the library evaluates these expressions through the scalar
// kernels below, in the same operand order, which is what makes the engines
// bitwise interchangeable.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace snnfuse {

/// Where the surrogate derivative is evaluated in the backward recursion.
enum class SurrogateArg {
  /// delta(v - v_th): peaks where the spike function switches. Default.
  centered,
  /// delta(v): the argument exactly as the recursion is usually written.
  literal,
};

struct LifParams {
  float v_rest = 0.0f;
  float k_tau = 0.2f;
  float v_th = 0.3f;
  float alpha = 4.0f;
  SurrogateArg surrogate_arg = SurrogateArg::centered;

  /// Decay factor from a membrane time constant: k_tau = 1 - 1/tau.
  static LifParams from_tau(double tau, float v_rest = 0.0f, float v_th = 0.3f,
                            float alpha = 4.0f) {
    if (!(tau > 1.0)) throw std::invalid_argument("snnfuse: tau must be > 1");
    LifParams p;
    p.v_rest = v_rest;
    p.k_tau = static_cast<float>(1.0 - 1.0 / tau);
    p.v_th = v_th;
    p.alpha = alpha;
    p.validate();
    return p;
  }

  void validate() const {
    if (!(k_tau >= 0.0f && k_tau < 1.0f)) {
      throw std::invalid_argument("snnfuse: k_tau must lie in [0, 1), got " + std::to_string(k_tau));
    }
    if (!(alpha > 0.0f)) throw std::invalid_argument("snnfuse: alpha must be > 0");
    if (!(v_th > v_rest)) throw std::invalid_argument("snnfuse: v_th must exceed v_rest");
    if (!std::isfinite(v_rest) || !std::isfinite(v_th) || !std::isfinite(alpha)) {
      throw std::invalid_argument("snnfuse: LIF parameters must be finite");
    }
  }

  /// Offset subtracted from v before the surrogate is applied.
  float surrogate_shift() const noexcept {
    return surrogate_arg == SurrogateArg::centered ? v_th : 0.0f;
  }

  friend bool operator==(const LifParams&, const LifParams&) = default;
};

namespace detail {

/// e^x for x <= 0, branch-free so element-wise loops vectorize. Cody-Waite
/// reduction with a degree-6 minimax polynomial; max relative error about
/// 1e-7. Inputs below -87 flush to +0.
inline float exp_nonpositive(float x) noexcept {
  constexpr float kLowest = -87.0f;
  constexpr float kRound = 12582912.0f;  // 1.5 * 2^23
  const float xc = std::max(x, kLowest);
  float n = xc * 1.44269504088896341f + kRound;
  const std::int32_t ni = std::bit_cast<std::int32_t>(n) - std::bit_cast<std::int32_t>(kRound);
  n = n - kRound;
  float r = xc - n * 0.693359375f;
  r = r - n * -2.12194440e-4f;
  float q = 1.9875691500e-4f;
  q = q * r + 1.3981999507e-3f;
  q = q * r + 8.3334519073e-3f;
  q = q * r + 4.1665795894e-2f;
  q = q * r + 1.6666665459e-1f;
  q = q * r + 5.0000001201e-1f;
  const float e = (q * r * r + r + 1.0f) * std::bit_cast<float>((ni + 127) << 23);
  const std::uint32_t keep = x >= kLowest ? 0xFFFFFFFFu : 0u;
  return std::bit_cast<float>(std::bit_cast<std::uint32_t>(e) & keep);
}

}  // namespace detail

/// Sigmoid surrogate alpha * e^{-alpha u} / (1 + e^{-alpha u})^2.
///
/// Evaluated through |u| so the result is exactly symmetric and the
/// exponential never overflows; underflows to 0 for large |u|.
inline float surrogate(float u, float alpha) noexcept {
  const float z = detail::exp_nonpositive(-alpha * std::fabs(u));
  const float denom = (1.0f + z) * (1.0f + z);
  return alpha * z / denom;
}

inline float surrogate(float u, const LifParams& p) noexcept { return surrogate(u, p.alpha); }

inline float surrogate_at(float v, const LifParams& p) noexcept {
  return surrogate(v - p.surrogate_shift(), p.alpha);
}

// Scalar kernels shared by all engines.

inline float lif_membrane(float v_prev, float y_prev, float x, const LifParams& p) noexcept {
  return p.k_tau * v_prev * (1.0f - y_prev) + p.v_rest * y_prev + x;
}

inline float lif_spike(float v, const LifParams& p) noexcept {
  return v - p.v_th >= 0.0f ? 1.0f : 0.0f;
}

inline float lif_grad(float g_v_next, float g_y, float v, float y, const LifParams& p) noexcept {
  const float d = surrogate_at(v, p);
  return p.k_tau * g_v_next * (1.0f - y - v * d) + g_y * d;
}

/// A [batch x width] slab of values at one time boundary.
struct Block {
  std::size_t batch = 0;
  std::size_t width = 0;
  std::vector<float> values;

  Block() = default;
  Block(std::size_t b, std::size_t w, float fill = 0.0f) : batch(b), width(w), values(b * w, fill) {}

  std::size_t size() const noexcept { return values.size(); }
  float& operator()(std::size_t b, std::size_t n) { return values[b * width + n]; }
  float operator()(std::size_t b, std::size_t n) const { return values[b * width + n]; }

  friend bool operator==(const Block&, const Block&) = default;
};

/// Carry state of a LIF layer between two time steps.
struct LifState {
  Block v;
  Block y;

  /// v = v_rest, y = 0 everywhere.
  static LifState initial(std::size_t batch, std::size_t width, const LifParams& p) {
    return {Block(batch, width, p.v_rest), Block(batch, width, 0.0f)};
  }

  std::size_t batch() const noexcept { return v.batch; }
  std::size_t width() const noexcept { return v.width; }

  friend bool operator==(const LifState&, const LifState&) = default;
};

/// Gradient w.r.t. the membrane potential flowing across a time boundary.
using VoltageGrad = Block;

namespace detail {

inline void require_same(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string("snnfuse: shape mismatch in ") + what + " (" +
                                std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

}  // namespace detail

/// One time step for a whole block. Returns the new state; its y is the
/// step's spike output and its v the pre-reset membrane.
inline LifState lif_step_forward(const LifState& state, std::span<const float> x_t,
                                 const LifParams& p) {
  detail::require_same(state.v.size(), x_t.size(), "lif_step_forward");
  detail::require_same(state.y.size(), x_t.size(), "lif_step_forward");
  LifState next{Block(state.batch(), state.width()), Block(state.batch(), state.width())};
  for (std::size_t i = 0; i < x_t.size(); ++i) {
    const float v = lif_membrane(state.v.values[i], state.y.values[i], x_t[i], p);
    next.v.values[i] = v;
    next.y.values[i] = lif_spike(v, p);
  }
  return next;
}

/// One step of the backward recursion. The result is both the gradient
/// w.r.t. x[t] and w.r.t. v[t] (v depends additively on x).
inline std::vector<float> lif_step_backward(std::span<const float> g_v_next,
                                            std::span<const float> g_y_t,
                                            std::span<const float> v_t,
                                            std::span<const float> y_t, const LifParams& p) {
  const std::size_t n = v_t.size();
  detail::require_same(g_v_next.size(), n, "lif_step_backward");
  detail::require_same(g_y_t.size(), n, "lif_step_backward");
  detail::require_same(y_t.size(), n, "lif_step_backward");
  std::vector<float> g_x(n);
  for (std::size_t i = 0; i < n; ++i) g_x[i] = lif_grad(g_v_next[i], g_y_t[i], v_t[i], y_t[i], p);
  return g_x;
}

}  // namespace snnfuse
