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

// Randomized self-verification.
//
// Four suites compare engines against each other and against plain scalar
// interpreters that spell the recursions out one element at a time:
//
//   fused-vs-serial     fused, serial and scalar LIF forward/backward
//   segmentation        chained segments vs one pass over the whole axis
//   pipeline-vs-single  multi-worker pipeline vs single-worker fused network
//   scalar-interpreter  full network gradients vs a scalar interpreter
//
// Every comparison is bitwise. On the first mismatch of a suite the case is
// shrunk where the math allows it (LIF is element-wise in (b, n) and causal
// in t) and the operands are dumped in the tensor binary format.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "snnfuse/fusion.hpp"
#include "snnfuse/loss.hpp"
#include "snnfuse/net.hpp"
#include "snnfuse/pipeline.hpp"
#include "snnfuse/rng.hpp"

namespace snnfuse {

/// Deliberate defects for exercising the failure path.
enum class Fault {
  none,
  /// Fused engine runs with k_tau one ulp too large.
  fused_k_tau,
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  /// Random cases per suite.
  std::size_t cases = 100;
  Fault fault = Fault::none;
  /// Where failing cases are written; empty disables dumping.
  std::string dump_dir;
  std::size_t max_t = 128;
  std::size_t max_batch = 16;
  std::size_t max_width = 512;
};

struct Mismatch {
  std::string suite;
  std::size_t case_index = 0;
  /// Which quantity differed, e.g. "forward v_hist".
  std::string quantity;
  /// Element coordinates when the quantity is a time-major tensor.
  std::optional<std::size_t> t, b, n;
  /// Flat index otherwise.
  std::size_t index = 0;
  float expected = 0.0f;
  float actual = 0.0f;
  std::string case_shape;
  std::vector<std::string> dumped;

  std::string describe() const {
    std::ostringstream os;
    os.precision(9);
    os << suite << " case " << case_index << " [" << case_shape << "]: " << quantity;
    if (t) os << " differs at (t,b,n)=(" << *t << "," << *b << "," << *n << ")";
    else os << " differs at index " << index;
    os << ": expected " << expected << ", got " << actual;
    return os.str();
  }
};

struct SuiteResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t mismatches = 0;
  std::optional<Mismatch> first;
};

struct VerifyReport {
  std::vector<SuiteResult> suites;

  std::size_t mismatches() const {
    std::size_t n = 0;
    for (const auto& s : suites) n += s.mismatches;
    return n;
  }
  bool ok() const { return mismatches() == 0; }
};

// ---------------------------------------------------------------------------
// Scalar interpreters. One element at a time, nothing shared with the engines
// but the surrogate function.

struct ScalarLifForward {
  std::vector<float> y, v;          // [T * B * N], time-major
  std::vector<float> v_out, y_out;  // carry-out [B * N]
};

inline ScalarLifForward scalar_lif_forward(const TimeMajorTensor& x, const LifState& carry,
                                           const LifParams& p) {
  const std::size_t T = x.t_len(), cols = x.step_size();
  ScalarLifForward r{std::vector<float>(x.size()), std::vector<float>(x.size()), carry.v.values,
                     carry.y.values};
  for (std::size_t c = 0; c < cols; ++c) {
    float v = carry.v.values[c];
    float y = carry.y.values[c];
    for (std::size_t t = 0; t < T; ++t) {
      v = p.k_tau * v * (1.0f - y) + p.v_rest * y + x.data()[t * cols + c];
      y = (v - p.v_th >= 0.0f) ? 1.0f : 0.0f;
      r.v[t * cols + c] = v;
      r.y[t * cols + c] = y;
    }
    r.v_out[c] = v;
    r.y_out[c] = y;
  }
  return r;
}

struct ScalarLifBackward {
  std::vector<float> g_x;
  std::vector<float> carry_out;
};

inline ScalarLifBackward scalar_lif_backward(const TimeMajorTensor& g_y,
                                             const std::vector<float>& v_hist,
                                             const std::vector<float>& y_hist,
                                             const std::vector<float>& carry_in,
                                             const LifParams& p) {
  const std::size_t T = g_y.t_len(), cols = g_y.step_size();
  const float shift = p.surrogate_arg == SurrogateArg::centered ? p.v_th : 0.0f;
  ScalarLifBackward r{std::vector<float>(g_y.size()), carry_in};
  for (std::size_t c = 0; c < cols; ++c) {
    float g = carry_in[c];
    for (std::size_t t = T; t-- > 0;) {
      const std::size_t i = t * cols + c;
      const float d = surrogate(v_hist[i] - shift, p.alpha);
      g = p.k_tau * g * (1.0f - y_hist[i] - v_hist[i] * d) + g_y.data()[i] * d;
      r.g_x[i] = g;
    }
    r.carry_out[c] = g;
  }
  return r;
}

/// Reference forward, loss gradient and backward of a whole network with
/// nested loops. Returns the gradients in the engine's layout.
struct ScalarNetResult {
  std::vector<std::vector<float>> activations;  // per layer input, plus output
  double loss = 0.0;
  NetGrads grads;
};

inline ScalarNetResult scalar_net(const SpikingNet& net, const TimeMajorTensor& x,
                                  std::span<const std::uint32_t> labels) {
  const std::size_t T = x.t_len(), B = x.batch(), L = net.layers.size();
  ScalarNetResult r;
  r.activations.push_back(std::vector<float>(x.data().begin(), x.data().end()));
  std::vector<std::vector<float>> v_hist(L);
  for (std::size_t l = 0; l < L; ++l) {
    const auto& in = r.activations[l];
    const std::size_t ni = net.in_width(l), no = net.out_width(l);
    std::vector<float> out(T * B * no);
    if (const auto* a = std::get_if<AffineLayer>(&net.layers[l])) {
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t o = 0; o < no; ++o) {
            float acc = a->bias[o];
            for (std::size_t i = 0; i < ni; ++i) acc += a->weights[o * ni + i] * in[(t * B + b) * ni + i];
            out[(t * B + b) * no + o] = acc;
          }
    } else {
      const auto& p = std::get<LifLayer>(net.layers[l]).params;
      v_hist[l].resize(T * B * no);
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t n = 0; n < no; ++n) {
          float v = p.v_rest, y = 0.0f;
          for (std::size_t t = 0; t < T; ++t) {
            const std::size_t i = (t * B + b) * no + n;
            v = p.k_tau * v * (1.0f - y) + p.v_rest * y + in[i];
            y = (v - p.v_th >= 0.0f) ? 1.0f : 0.0f;
            v_hist[l][i] = v;
            out[i] = y;
          }
        }
    }
    r.activations.push_back(std::move(out));
  }

  TimeMajorTensor y_out(T, B, net.output_width());
  std::copy(r.activations.back().begin(), r.activations.back().end(), y_out.data().begin());
  const auto loss = rate_cross_entropy(y_out, labels);
  r.loss = loss.loss;

  std::vector<float> g(loss.g_y.data().begin(), loss.g_y.data().end());
  r.grads.affine.resize(L);
  for (std::size_t l = L; l-- > 0;) {
    const auto& in = r.activations[l];
    const std::size_t ni = net.in_width(l), no = net.out_width(l);
    std::vector<float> g_in(T * B * ni, 0.0f);
    if (const auto* a = std::get_if<AffineLayer>(&net.layers[l])) {
      AffineGrads pg(ni, no);
      for (std::size_t row = 0; row < T * B; ++row)
        for (std::size_t o = 0; o < no; ++o) {
          const float go = g[row * no + o];
          for (std::size_t i = 0; i < ni; ++i) g_in[row * ni + i] += go * a->weights[o * ni + i];
        }
      for (std::size_t row = 0; row < T * B; ++row)
        for (std::size_t o = 0; o < no; ++o) {
          const float go = g[row * no + o];
          pg.bias[o] += go;
          for (std::size_t i = 0; i < ni; ++i) pg.weights[o * ni + i] += go * in[row * ni + i];
        }
      r.grads.affine[l] = std::move(pg);
    } else {
      const auto& p = std::get<LifLayer>(net.layers[l]).params;
      const auto& y = r.activations[l + 1];
      const float shift = p.surrogate_arg == SurrogateArg::centered ? p.v_th : 0.0f;
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t n = 0; n < no; ++n) {
          float gv = 0.0f;
          for (std::size_t t = T; t-- > 0;) {
            const std::size_t i = (t * B + b) * no + n;
            const float d = surrogate(v_hist[l][i] - shift, p.alpha);
            gv = p.k_tau * gv * (1.0f - y[i] - v_hist[l][i] * d) + g[i] * d;
            g_in[i] = gv;
          }
        }
    }
    g = std::move(g_in);
  }
  r.grads.g_x = TimeMajorTensor(T, B, x.width());
  std::copy(g.begin(), g.end(), r.grads.g_x.data().begin());
  return r;
}

// ---------------------------------------------------------------------------

namespace detail {

inline bool bits_equal(float a, float b) {
  return std::memcmp(&a, &b, sizeof(float)) == 0;
}

/// First differing flat index, if any.
inline std::optional<std::size_t> first_diff(std::span<const float> expected,
                                             std::span<const float> actual) {
  if (expected.size() != actual.size()) return 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (!bits_equal(expected[i], actual[i])) return i;
  }
  return std::nullopt;
}

inline LifParams apply_fault(LifParams p, Fault f) {
  if (f == Fault::fused_k_tau) p.k_tau = std::nextafter(p.k_tau, 1.0f);
  return p;
}

inline SpikingNet apply_fault(SpikingNet net, Fault f) {
  for (auto& l : net.layers) {
    if (auto* lif = std::get_if<LifLayer>(&l)) lif->params = apply_fault(lif->params, f);
  }
  return net;
}

inline std::string shape_of(const TimeMajorTensor& x) {
  return "T=" + std::to_string(x.t_len()) + " B=" + std::to_string(x.batch()) +
         " N=" + std::to_string(x.width());
}

/// Builds mismatches and accumulates the counts of one suite.
class SuiteRecorder {
 public:
  SuiteRecorder(std::string name, const VerifyOptions& opts) : opts_(opts) { result.name = std::move(name); }

  /// Compares two time-major quantities. Returns true when they match.
  bool tensor(std::size_t case_index, const std::string& quantity, const TimeMajorTensor& shape,
              std::span<const float> expected, std::span<const float> actual) {
    const auto at = first_diff(expected, actual);
    if (!at) return true;
    Mismatch m = base(case_index, quantity, shape_of(shape), *at, expected, actual);
    const std::size_t cols = shape.step_size();
    m.t = *at / cols;
    m.b = (*at % cols) / shape.width();
    m.n = *at % shape.width();
    return fail(std::move(m));
  }

  /// Compares a flat quantity (carry block, parameter gradient).
  bool flat(std::size_t case_index, const std::string& quantity, const std::string& shape,
            std::span<const float> expected, std::span<const float> actual) {
    const auto at = first_diff(expected, actual);
    if (!at) return true;
    return fail(base(case_index, quantity, shape, *at, expected, actual));
  }

  bool check(std::size_t case_index, const std::string& quantity, const std::string& shape,
             bool ok) {
    if (ok) return true;
    return fail(base(case_index, quantity, shape, 0, {}, {}));
  }

  /// Writes named tensors next to the first mismatch.
  void dump(const std::vector<std::pair<std::string, const TimeMajorTensor*>>& tensors) {
    if (opts_.dump_dir.empty() || !result.first || !result.first->dumped.empty()) return;
    std::filesystem::create_directories(opts_.dump_dir);
    for (const auto& [name, x] : tensors) {
      const auto path = (std::filesystem::path(opts_.dump_dir) /
                         (result.name + "_case" + std::to_string(result.first->case_index) + "_" +
                          name + ".bin"))
                            .string();
      save_tensor(path, *x);
      result.first->dumped.push_back(path);
    }
  }

  /// True when the suite's first mismatch came from case `idx`.
  bool first_from(std::size_t idx) const { return result.first && result.first->case_index == idx; }

  SuiteResult result;

 private:
  Mismatch base(std::size_t case_index, const std::string& quantity, const std::string& shape,
                std::size_t at, std::span<const float> expected, std::span<const float> actual) {
    Mismatch m;
    m.suite = result.name;
    m.case_index = case_index;
    m.quantity = quantity;
    m.case_shape = shape;
    m.index = at;
    if (at < expected.size()) m.expected = expected[at];
    if (at < actual.size()) m.actual = actual[at];
    return m;
  }

  bool fail(Mismatch m) {
    ++result.mismatches;
    if (!result.first) result.first = std::move(m);
    return false;
  }

  const VerifyOptions& opts_;
};

struct LifCase {
  TimeMajorTensor x;
  TimeMajorTensor g_y;
  LifState carry;
  VoltageGrad grad_carry;
};

inline LifCase random_lif_case(Rng& rng, std::size_t min_t, const VerifyOptions& o) {
  const std::size_t T = min_t + rng.below(o.max_t - min_t + 1);
  const std::size_t B = 1 + rng.below(o.max_batch);
  const std::size_t N = 1 + rng.below(o.max_width);
  LifCase c{TimeMajorTensor(T, B, N), TimeMajorTensor(T, B, N), LifState::initial(B, N, LifParams{}),
            VoltageGrad(B, N)};
  for (auto& v : c.x.data()) v = rng.uniform(-0.2f, 0.7f);
  for (auto& v : c.g_y.data()) v = rng.uniform(-1.0f, 1.0f);
  for (auto& v : c.carry.v.values) v = rng.uniform(-0.5f, 0.8f);
  for (auto& v : c.carry.y.values) v = rng.bernoulli(0.3f) ? 1.0f : 0.0f;
  for (auto& v : c.grad_carry.values) v = rng.uniform(-1.0f, 1.0f);
  return c;
}

/// The prefix [0, t] of column (b, n) of a case, as a 1 x 1 problem.
inline LifCase shrink_lif_case(const LifCase& c, std::size_t t, std::size_t b, std::size_t n) {
  LifCase s{TimeMajorTensor(t + 1, 1, 1), TimeMajorTensor(t + 1, 1, 1),
            LifState::initial(1, 1, LifParams{}), VoltageGrad(1, 1)};
  for (std::size_t i = 0; i <= t; ++i) {
    s.x.at(i, 0, 0) = c.x.at(i, b, n);
    s.g_y.at(i, 0, 0) = c.g_y.at(i, b, n);
  }
  s.carry.v.values[0] = c.carry.v(b, n);
  s.carry.y.values[0] = c.carry.y(b, n);
  s.grad_carry.values[0] = c.grad_carry(b, n);
  return s;
}

inline TimeMajorTensor block_tensor(const Block& blk) {
  TimeMajorTensor t(1, blk.batch, blk.width);
  std::copy(blk.values.begin(), blk.values.end(), t.data().begin());
  return t;
}

/// Runs one LIF case through serial, fused and scalar; records mismatches.
/// Returns false on any mismatch.
inline bool check_lif_case(SuiteRecorder& rec, std::size_t idx, const LifCase& c,
                           const LifParams& p, const LifParams& fused_p) {
  const auto ref = scalar_lif_forward(c.x, c.carry, p);
  const auto sf = serial_forward(c.x, c.carry, p);
  const auto ff = fused_forward(c.x, c.carry, fused_p);
  bool ok = true;
  ok = rec.tensor(idx, "serial forward y_hist", c.x, ref.y, sf.y_hist.data()) && ok;
  ok = rec.tensor(idx, "serial forward v_hist", c.x, ref.v, sf.v_hist.data()) && ok;
  ok = rec.tensor(idx, "fused forward y_hist", c.x, sf.y_hist.data(), ff.y_hist.data()) && ok;
  ok = rec.tensor(idx, "fused forward v_hist", c.x, sf.v_hist.data(), ff.v_hist.data()) && ok;
  const auto shape = shape_of(c.x);
  ok = rec.flat(idx, "fused forward carry v", shape, ref.v_out, ff.final_state.v.values) && ok;
  ok = rec.flat(idx, "fused forward carry y", shape, ref.y_out, ff.final_state.y.values) && ok;
  ok = rec.flat(idx, "serial forward carry v", shape, ref.v_out, sf.final_state.v.values) && ok;

  // Backward on the reference record so a forward defect does not mask it.
  const auto rb = scalar_lif_backward(c.g_y, ref.v, ref.y, c.grad_carry.values, p);
  const auto sb = serial_backward(c.g_y, sf, c.grad_carry, p);
  const auto fb = fused_backward(c.g_y, sf, c.grad_carry, fused_p);
  ok = rec.tensor(idx, "serial backward g_x", c.x, rb.g_x, sb.g_x.data()) && ok;
  ok = rec.tensor(idx, "fused backward g_x", c.x, sb.g_x.data(), fb.g_x.data()) && ok;
  ok = rec.flat(idx, "fused backward carry", shape, rb.carry_out, fb.grad_carry_out.values) && ok;
  ok = rec.flat(idx, "serial backward carry", shape, rb.carry_out, sb.grad_carry_out.values) && ok;
  return ok;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Suites

inline SuiteResult verify_fused_vs_serial(const VerifyOptions& o) {
  detail::SuiteRecorder rec("fused-vs-serial", o);
  Rng rng(derive_seed(o.seed, {0xf5}));
  const LifParams p{};
  const LifParams fp = detail::apply_fault(p, o.fault);
  for (std::size_t i = 0; i < o.cases; ++i) {
    const auto c = detail::random_lif_case(rng, 1, o);
    const bool was_clean = !rec.result.first.has_value();
    if (detail::check_lif_case(rec, i, c, p, fp) || !was_clean) continue;
    // Shrink to the failing column's prefix and dump that.
    auto& m = *rec.result.first;
    if (m.t) {
      const auto s = detail::shrink_lif_case(c, *m.t, *m.b, *m.n);
      detail::SuiteRecorder probe("probe", VerifyOptions{});
      const bool still = !detail::check_lif_case(probe, i, s, p, fp);
      const auto& keep = still ? s : c;
      if (still) m.case_shape += " (shrunk to T=" + std::to_string(*m.t + 1) + " B=1 N=1)";
      const auto sf = serial_forward(keep.x, keep.carry, p);
      const auto ff = fused_forward(keep.x, keep.carry, fp);
      const auto cv = detail::block_tensor(keep.carry.v), cy = detail::block_tensor(keep.carry.y);
      const auto gc = detail::block_tensor(keep.grad_carry);
      rec.dump({{"x", &keep.x}, {"g_y", &keep.g_y}, {"carry_v", &cv}, {"carry_y", &cy},
                {"grad_carry", &gc}, {"expected_v_hist", &sf.v_hist}, {"actual_v_hist", &ff.v_hist},
                {"expected_y_hist", &sf.y_hist}, {"actual_y_hist", &ff.y_hist}});
    }
  }
  rec.result.cases = o.cases;
  return rec.result;
}

inline SuiteResult verify_segmentation(const VerifyOptions& o) {
  detail::SuiteRecorder rec("segmentation", o);
  Rng rng(derive_seed(o.seed, {0x5e9}));
  const LifParams p{};
  const LifParams fp = detail::apply_fault(p, o.fault);
  for (std::size_t i = 0; i < o.cases; ++i) {
    const auto c = detail::random_lif_case(rng, std::min<std::size_t>(2, o.max_t), o);
    const std::size_t T = c.x.t_len();
    // Random cut set: up to 6 distinct interior cut points.
    std::vector<std::size_t> cuts{0, T};
    const std::size_t n_cuts = T > 1 ? 1 + rng.below(std::min<std::size_t>(T - 1, 6)) : 0;
    for (std::size_t j = 0; j < n_cuts; ++j) cuts.push_back(1 + rng.below(T - 1));
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    const auto whole = fused_forward(c.x, c.carry, p);
    const auto whole_b = fused_backward(c.g_y, whole, c.grad_carry, p);

    std::vector<TimeMajorTensor> ys, vs, gs(cuts.size() - 1);
    std::vector<FusedForwardRecord> recs;
    LifState carry = c.carry;
    for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
      auto r = fused_forward(time_slice(c.x, cuts[s], cuts[s + 1]), carry, fp);
      carry = r.final_state;
      ys.push_back(r.y_hist);
      vs.push_back(r.v_hist);
      recs.push_back(std::move(r));
    }
    VoltageGrad g = c.grad_carry;
    for (std::size_t s = recs.size(); s-- > 0;) {
      auto r = fused_backward(time_slice(c.g_y, cuts[s], cuts[s + 1]), recs[s], g, fp);
      g = std::move(r.grad_carry_out);
      gs[s] = std::move(r.g_x);
    }
    const auto y = concat_time(ys), v = concat_time(vs), gx = concat_time(gs);
    std::string shape = detail::shape_of(c.x) + " cuts=";
    for (std::size_t j = 1; j + 1 < cuts.size(); ++j) shape += (j > 1 ? "," : "") + std::to_string(cuts[j]);
    bool ok = rec.tensor(i, "chained forward y_hist", c.x, whole.y_hist.data(), y.data());
    ok = rec.tensor(i, "chained forward v_hist", c.x, whole.v_hist.data(), v.data()) && ok;
    ok = rec.flat(i, "chained forward carry v", shape, whole.final_state.v.values, carry.v.values) && ok;
    ok = rec.tensor(i, "chained backward g_x", c.x, whole_b.g_x.data(), gx.data()) && ok;
    ok = rec.flat(i, "chained backward carry", shape, whole_b.grad_carry_out.values, g.values) && ok;
    if (!ok && rec.first_from(i)) {
      rec.result.first->case_shape = shape;
      rec.dump({{"x", &c.x}, {"g_y", &c.g_y}, {"expected_v_hist", &whole.v_hist}, {"actual_v_hist", &v},
                {"expected_g_x", &whole_b.g_x}, {"actual_g_x", &gx}});
    }
  }
  rec.result.cases = o.cases;
  return rec.result;
}

namespace detail {

/// Random alternating network: 0 to 2 hidden layers of width 1..8.
inline SpikingNet random_small_net(Rng& rng, std::size_t& in_width) {
  std::vector<std::size_t> widths{1 + rng.below(8)};
  const std::size_t hidden = rng.below(3);
  for (std::size_t h = 0; h < hidden; ++h) widths.push_back(1 + rng.below(8));
  widths.push_back(2 + rng.below(3));
  in_width = widths.front();
  return SpikingNet::mlp(widths, LifParams{}, rng.next_u64());
}

inline std::vector<std::uint32_t> random_labels(Rng& rng, std::size_t batch, std::size_t classes) {
  std::vector<std::uint32_t> labels(batch);
  for (auto& l : labels) l = static_cast<std::uint32_t>(rng.below(classes));
  return labels;
}

/// Compares two gradient sets quantity by quantity.
inline bool compare_grads(SuiteRecorder& rec, std::size_t idx, const std::string& shape,
                          const NetGrads& expected, const NetGrads& actual) {
  bool ok = rec.check(idx, "gradient layer count", shape, expected.affine.size() == actual.affine.size());
  for (std::size_t l = 0; ok && l < expected.affine.size(); ++l) {
    if (!expected.affine[l]) continue;
    if (!rec.check(idx, "affine gradient presence", shape, actual.affine[l].has_value())) return false;
    ok = rec.flat(idx, "layer " + std::to_string(l) + " weight gradient", shape,
                  expected.affine[l]->weights, actual.affine[l]->weights) && ok;
    ok = rec.flat(idx, "layer " + std::to_string(l) + " bias gradient", shape,
                  expected.affine[l]->bias, actual.affine[l]->bias) && ok;
  }
  return rec.tensor(idx, "input gradient g_x", expected.g_x, expected.g_x.data(), actual.g_x.data()) && ok;
}

}  // namespace detail

inline SuiteResult verify_pipeline(const VerifyOptions& o) {
  detail::SuiteRecorder rec("pipeline-vs-single", o);
  Rng rng(derive_seed(o.seed, {0x919e}));
  for (std::size_t i = 0; i < o.cases; ++i) {
    std::size_t in_w = 0;
    const auto net = detail::random_small_net(rng, in_w);
    const std::size_t k = 1 + i % 4;
    const std::size_t T = k + rng.below(24);
    const std::size_t B = 1 + rng.below(6);
    const std::size_t M = 1 + rng.below(B);
    TimeMajorTensor x(T, B, in_w);
    for (auto& v : x.data()) v = rng.uniform(0.0f, 1.0f);
    const auto labels = detail::random_labels(rng, B, net.output_width());

    const auto single = forward_pass(net, x, LifEngine::fused);
    const auto loss = rate_cross_entropy(single.output(), labels);
    const auto grads = backward_pass(net, single, loss.g_y, LifEngine::fused);

    const auto pnet = detail::apply_fault(net, o.fault);
    const auto plan = PipelinePlan::even(T, k, std::chrono::nanoseconds{0}, M);
    const auto pf = pipeline_forward(pnet, x, plan);
    const auto ploss = rate_cross_entropy(pf.trace.output(), labels);
    const auto pb = pipeline_backward(pnet, pf.trace, ploss.g_y, plan);

    const std::string shape = detail::shape_of(x) + " k=" + std::to_string(k) +
                              " micro=" + std::to_string(M) + " layers=" +
                              std::to_string(net.layers.size());
    const std::size_t expect_msgs = (k - 1) * net.lif_count() * M;
    bool ok = rec.tensor(i, "pipeline output", single.output(), single.output().data(),
                         pf.trace.output().data());
    ok = rec.check(i, "loss", shape, loss.loss == ploss.loss) && ok;
    ok = detail::compare_grads(rec, i, shape, grads, pb.grads) && ok;
    ok = rec.check(i, "forward message count", shape, pf.messages == expect_msgs) && ok;
    ok = rec.check(i, "backward message count", shape, pb.messages == expect_msgs) && ok;
    if (!ok && rec.first_from(i)) {
      rec.dump({{"x", &x}, {"expected_output", &single.output()}, {"actual_output", &pf.trace.output()},
                {"expected_g_x", &grads.g_x}, {"actual_g_x", &pb.grads.g_x}});
    }
  }
  rec.result.cases = o.cases;
  return rec.result;
}

inline SuiteResult verify_scalar_interpreter(const VerifyOptions& o) {
  detail::SuiteRecorder rec("scalar-interpreter", o);
  Rng rng(derive_seed(o.seed, {0x5ca1}));
  for (std::size_t i = 0; i < o.cases; ++i) {
    // Tiny nets: T <= 3, widths <= 4.
    std::vector<std::size_t> widths{1 + rng.below(4)};
    for (std::size_t h = rng.below(2); h > 0; --h) widths.push_back(1 + rng.below(4));
    widths.push_back(2 + rng.below(3));
    const auto net = SpikingNet::mlp(widths, LifParams{}, rng.next_u64());
    const std::size_t T = 1 + rng.below(3), B = 1 + rng.below(3);
    TimeMajorTensor x(T, B, widths.front());
    for (auto& v : x.data()) v = rng.uniform(0.0f, 1.0f);
    const auto labels = detail::random_labels(rng, B, net.output_width());

    const auto ref = scalar_net(net, x, labels);
    const auto enet = detail::apply_fault(net, o.fault);
    const auto tr = forward_pass(enet, x, LifEngine::fused);
    const auto loss = rate_cross_entropy(tr.output(), labels);
    const auto grads = backward_pass(enet, tr, loss.g_y, LifEngine::fused);

    std::string shape = detail::shape_of(x) + " widths=";
    for (std::size_t j = 0; j < widths.size(); ++j) shape += (j ? "," : "") + std::to_string(widths[j]);
    bool ok = rec.tensor(i, "network output", tr.output(), ref.activations.back(), tr.output().data());
    ok = rec.check(i, "loss", shape, ref.loss == loss.loss) && ok;
    ok = detail::compare_grads(rec, i, shape, ref.grads, grads) && ok;
    if (!ok && rec.first_from(i)) {
      rec.result.first->case_shape = shape;
      rec.dump({{"x", &x}, {"expected_g_x", &ref.grads.g_x}, {"actual_g_x", &grads.g_x}});
    }
  }
  rec.result.cases = o.cases;
  return rec.result;
}

inline VerifyReport run_verify(const VerifyOptions& o) {
  if (o.max_t == 0 || o.max_batch == 0 || o.max_width == 0) {
    throw std::invalid_argument("snnfuse: verify size limits must be >= 1");
  }
  VerifyReport r;
  if (o.cases == 0) return r;
  r.suites.push_back(verify_fused_vs_serial(o));
  r.suites.push_back(verify_segmentation(o));
  r.suites.push_back(verify_pipeline(o));
  r.suites.push_back(verify_scalar_interpreter(o));
  return r;
}

}  // namespace snnfuse
