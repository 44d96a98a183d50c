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

// Serial and temporally fused LIF engines.
//
// The serial engine advances the whole layer one time step at a time, the
// way a per-step framework loop does: every step allocates fresh output
// blocks in main memory, the next step reads its state back from them, and
// the retained per-step blocks are stacked into the history at the end. The fused engine walks each tile of
// neuron columns through the entire time axis with (v, y) held in a small
// local buffer, reading every input once and writing every output once.
//
// Both engines evaluate the scalar kernels of neuron.hpp in identical order,
// so their results are bitwise equal. Any change that reorders the per-step
// arithmetic (e.g. FMA contraction) breaks that and must be treated as such.

#include <algorithm>
#include <cstddef>
#include <utility>

#include "snnfuse/neuron.hpp"
#include "snnfuse/tensor.hpp"

namespace snnfuse {

struct FusedForwardRecord {
  TimeMajorTensor y_hist;
  /// Pre-reset membrane of every step; consumed by the backward pass.
  TimeMajorTensor v_hist;
  LifState final_state;
};

struct BackwardResult {
  TimeMajorTensor g_x;
  /// Gradient w.r.t. v at the first step, handed to the earlier segment.
  VoltageGrad grad_carry_out;
};

namespace detail {

/// Keeps the compiler from eliding stores to, or loads from, `p`.
inline void opaque(const void* p) noexcept { asm volatile("" : : "g"(p) : "memory"); }

inline void check_state(const LifState& s, std::size_t batch, std::size_t width, const char* op) {
  if (s.batch() != batch || s.width() != width || s.y.batch != batch || s.y.width != width ||
      s.v.size() != batch * width || s.y.size() != batch * width) {
    throw std::invalid_argument(std::string("snnfuse: carry state shape mismatch in ") + op);
  }
}

inline void check_record(const TimeMajorTensor& g, const FusedForwardRecord& rec, const char* op) {
  auto same = [](const TimeMajorTensor& a, const TimeMajorTensor& b) {
    return a.t_len() == b.t_len() && a.batch() == b.batch() && a.width() == b.width();
  };
  if (!same(g, rec.y_hist) || !same(g, rec.v_hist)) {
    throw std::invalid_argument(std::string("snnfuse: gradient/record shape mismatch in ") + op);
  }
}

/// Columns per fused tile; the local (v, y) pair is 32 KiB and stays in L1.
constexpr std::size_t kFusedTile = 4096;

/// Fused forward over `cols` adjacent columns and `t_len` steps. Row t of
/// each operand starts at base + t * stride. `state_v` / `state_y` hold the
/// carry-in on entry and the carry-out on return.
inline void fused_forward_kernel(const float* x, float* y_out, float* v_out, std::size_t t_len,
                                 std::size_t stride, std::size_t cols, float* state_v,
                                 float* state_y, const LifParams& p) noexcept {
  float v[kFusedTile];
  float y[kFusedTile];
  for (std::size_t c0 = 0; c0 < cols; c0 += kFusedTile) {
    const std::size_t len = std::min(kFusedTile, cols - c0);
    std::copy_n(state_v + c0, len, v);
    std::copy_n(state_y + c0, len, y);
    for (std::size_t t = 0; t < t_len; ++t) {
      const float* xr = x + t * stride + c0;
      float* vr = v_out + t * stride + c0;
      float* yr = y_out + t * stride + c0;
      for (std::size_t j = 0; j < len; ++j) {
        const float vn = lif_membrane(v[j], y[j], xr[j], p);
        const float yn = lif_spike(vn, p);
        v[j] = vn;
        y[j] = yn;
        vr[j] = vn;
        yr[j] = yn;
      }
    }
    std::copy_n(v, len, state_v + c0);
    std::copy_n(y, len, state_y + c0);
  }
}

/// Reverse sweep matching fused_forward_kernel. `carry` holds the gradient
/// w.r.t. v one step past the range on entry and w.r.t. v at its first step
/// on return.
inline void fused_backward_kernel(const float* g_y, const float* v_hist, const float* y_hist,
                                  float* g_x, std::size_t t_len, std::size_t stride,
                                  std::size_t cols, float* carry, const LifParams& p) noexcept {
  float g[kFusedTile];
  for (std::size_t c0 = 0; c0 < cols; c0 += kFusedTile) {
    const std::size_t len = std::min(kFusedTile, cols - c0);
    std::copy_n(carry + c0, len, g);
    for (std::size_t t = t_len; t-- > 0;) {
      const std::size_t off = t * stride + c0;
      for (std::size_t j = 0; j < len; ++j) {
        g[j] = lif_grad(g[j], g_y[off + j], v_hist[off + j], y_hist[off + j], p);
        g_x[off + j] = g[j];
      }
    }
    std::copy_n(g, len, carry + c0);
  }
}

}  // namespace detail

namespace detail {

inline FusedForwardRecord make_record(const TimeMajorTensor& x, const LifState& carry_in) {
  return {TimeMajorTensor(x.t_len(), x.batch(), x.width()),
          TimeMajorTensor(x.t_len(), x.batch(), x.width()), carry_in};
}

inline void check_forward_out(const TimeMajorTensor& x, const FusedForwardRecord& out,
                              const char* op) {
  check_record(x, out, op);
  check_state(out.final_state, x.batch(), x.width(), op);
}

}  // namespace detail

// The *_into variants write into caller-owned buffers of matching shape so
// that timing can exclude allocation; everything else is identical.

inline void serial_forward_into(const TimeMajorTensor& x, const LifState& carry_in,
                                const LifParams& p, FusedForwardRecord& out) {
  detail::check_state(carry_in, x.batch(), x.width(), "serial_forward");
  detail::check_forward_out(x, out, "serial_forward");
  std::vector<LifState> steps;
  steps.reserve(x.t_len());
  const LifState* state = &carry_in;
  for (std::size_t t = 0; t < x.t_len(); ++t) {
    steps.push_back(lif_step_forward(*state, x.step(t), p));
    detail::opaque(steps.back().v.values.data());
    detail::opaque(steps.back().y.values.data());
    state = &steps.back();
  }
  for (std::size_t t = 0; t < x.t_len(); ++t) {
    std::copy(steps[t].v.values.begin(), steps[t].v.values.end(), out.v_hist.step(t).begin());
    std::copy(steps[t].y.values.begin(), steps[t].y.values.end(), out.y_hist.step(t).begin());
  }
  out.final_state = std::move(steps.back());
}

inline void fused_forward_into(const TimeMajorTensor& x, const LifState& carry_in,
                               const LifParams& p, FusedForwardRecord& out) {
  detail::check_state(carry_in, x.batch(), x.width(), "fused_forward");
  detail::check_forward_out(x, out, "fused_forward");
  out.final_state.v.values = carry_in.v.values;
  out.final_state.y.values = carry_in.y.values;
  detail::fused_forward_kernel(x.data().data(), out.y_hist.data().data(),
                               out.v_hist.data().data(), x.t_len(), x.step_size(), x.step_size(),
                               out.final_state.v.values.data(), out.final_state.y.values.data(),
                               p);
}

inline FusedForwardRecord serial_forward(const TimeMajorTensor& x, const LifState& carry_in,
                                         const LifParams& p) {
  detail::check_state(carry_in, x.batch(), x.width(), "serial_forward");
  auto rec = detail::make_record(x, carry_in);
  serial_forward_into(x, carry_in, p, rec);
  return rec;
}

inline FusedForwardRecord fused_forward(const TimeMajorTensor& x, const LifState& carry_in,
                                        const LifParams& p) {
  detail::check_state(carry_in, x.batch(), x.width(), "fused_forward");
  auto rec = detail::make_record(x, carry_in);
  fused_forward_into(x, carry_in, p, rec);
  return rec;
}

inline void serial_backward_into(const TimeMajorTensor& g_y, const FusedForwardRecord& rec,
                                 const VoltageGrad& grad_carry_in, const LifParams& p,
                                 BackwardResult& out) {
  detail::check_record(g_y, rec, "serial_backward");
  detail::require_same(grad_carry_in.size(), g_y.step_size(), "serial_backward carry");
  detail::check_record(out.g_x, rec, "serial_backward output");
  std::vector<std::vector<float>> steps(g_y.t_len());
  std::span<const float> g_next = grad_carry_in.values;
  for (std::size_t t = g_y.t_len(); t-- > 0;) {
    steps[t] = lif_step_backward(g_next, g_y.step(t), rec.v_hist.step(t), rec.y_hist.step(t), p);
    detail::opaque(steps[t].data());
    g_next = steps[t];
  }
  for (std::size_t t = 0; t < g_y.t_len(); ++t) {
    std::copy(steps[t].begin(), steps[t].end(), out.g_x.step(t).begin());
  }
  out.grad_carry_out = VoltageGrad(g_y.batch(), g_y.width());
  out.grad_carry_out.values = std::move(steps.front());
}

inline void fused_backward_into(const TimeMajorTensor& g_y, const FusedForwardRecord& rec,
                                const VoltageGrad& grad_carry_in, const LifParams& p,
                                BackwardResult& out) {
  detail::check_record(g_y, rec, "fused_backward");
  detail::require_same(grad_carry_in.size(), g_y.step_size(), "fused_backward carry");
  detail::check_record(out.g_x, rec, "fused_backward output");
  out.grad_carry_out = grad_carry_in;
  detail::fused_backward_kernel(g_y.data().data(), rec.v_hist.data().data(),
                                rec.y_hist.data().data(), out.g_x.data().data(), g_y.t_len(),
                                g_y.step_size(), g_y.step_size(),
                                out.grad_carry_out.values.data(), p);
}

inline BackwardResult serial_backward(const TimeMajorTensor& g_y, const FusedForwardRecord& rec,
                                      const VoltageGrad& grad_carry_in, const LifParams& p) {
  detail::check_record(g_y, rec, "serial_backward");
  BackwardResult out{TimeMajorTensor(g_y.t_len(), g_y.batch(), g_y.width()), {}};
  serial_backward_into(g_y, rec, grad_carry_in, p, out);
  return out;
}

inline BackwardResult fused_backward(const TimeMajorTensor& g_y, const FusedForwardRecord& rec,
                                     const VoltageGrad& grad_carry_in, const LifParams& p) {
  detail::check_record(g_y, rec, "fused_backward");
  BackwardResult out{TimeMajorTensor(g_y.t_len(), g_y.batch(), g_y.width()), {}};
  fused_backward_into(g_y, rec, grad_carry_in, p, out);
  return out;
}

enum class LifEngine { serial, fused };

inline FusedForwardRecord lif_forward(LifEngine e, const TimeMajorTensor& x,
                                      const LifState& carry_in, const LifParams& p) {
  return e == LifEngine::serial ? serial_forward(x, carry_in, p) : fused_forward(x, carry_in, p);
}

inline BackwardResult lif_backward(LifEngine e, const TimeMajorTensor& g_y,
                                   const FusedForwardRecord& rec, const VoltageGrad& carry,
                                   const LifParams& p) {
  return e == LifEngine::serial ? serial_backward(g_y, rec, carry, p)
                                : fused_backward(g_y, rec, carry, p);
}

}  // namespace snnfuse
