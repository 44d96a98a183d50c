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

// Time-partitioned pipeline.
//
// The time axis is cut into k contiguous segments and worker d owns segment
// d for every layer. Going forward, a LIF layer on worker d waits for the
// layer's (v, y) carry from worker d - 1, runs the fused kernel over its
// segment and immediately forwards its own carry to worker d + 1 before moving
// on to the next layer, so worker d is on layer l + 1 while worker d + 1 is
// still on layer l. Backward mirrors this with the membrane gradient flowing
// from worker d + 1 to worker d.
//
// Optionally the batch is split into micro-batches that flow through the
// same protocol one after another, which is what lets a single-layer network
// overlap across workers.
//
// Every worker writes only its own rows of the shared, preallocated output
// tensors. Affine parameter gradients are reduced in a second phase in which
// each worker owns a block of output neurons and sums over the full time axis
// in canonical row order; together with the segmentation soundness of the
// fused kernels this makes every result bitwise equal to single-worker
// execution.

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "snnfuse/channel.hpp"
#include "snnfuse/fusion.hpp"
#include "snnfuse/net.hpp"
#include "snnfuse/tensor.hpp"

namespace snnfuse {

struct Segment {
  std::size_t t_lo = 0;
  std::size_t t_hi = 0;

  std::size_t size() const noexcept { return t_hi - t_lo; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

/// k contiguous segments covering [0, t_len); the first t_len % k are one
/// step longer.
inline std::vector<Segment> partition_time(std::size_t t_len, std::size_t k) {
  if (k == 0 || k > t_len) {
    throw std::invalid_argument("snnfuse: cannot split " + std::to_string(t_len) +
                                " steps into " + std::to_string(k) + " segments");
  }
  std::vector<Segment> segs;
  segs.reserve(k);
  const std::size_t base = t_len / k;
  const std::size_t extra = t_len % k;
  std::size_t lo = 0;
  for (std::size_t d = 0; d < k; ++d) {
    const std::size_t len = base + (d < extra ? 1 : 0);
    segs.push_back({lo, lo + len});
    lo += len;
  }
  return segs;
}

struct PipelinePlan {
  std::size_t k = 1;
  std::vector<Segment> segments;
  /// Latency added to every boundary message, applied when it is received.
  std::chrono::nanoseconds injected_comm_delay{0};
  std::size_t micro_batches = 1;

  static PipelinePlan even(std::size_t t_len, std::size_t k,
                           std::chrono::nanoseconds delay = std::chrono::nanoseconds{0},
                           std::size_t micro_batches = 1) {
    return PipelinePlan{k, partition_time(t_len, k), delay, micro_batches};
  }

  void validate(std::size_t t_len, std::size_t batch) const {
    if (k == 0 || segments.size() != k) {
      throw std::invalid_argument("snnfuse: plan has " + std::to_string(segments.size()) +
                                  " segments for k = " + std::to_string(k));
    }
    std::size_t expect = 0;
    std::size_t shortest = t_len;
    std::size_t longest = 0;
    for (const auto& s : segments) {
      if (s.t_lo != expect || s.t_hi <= s.t_lo) {
        throw std::invalid_argument("snnfuse: plan segments must be ordered, non-empty and contiguous");
      }
      expect = s.t_hi;
      shortest = std::min(shortest, s.size());
      longest = std::max(longest, s.size());
    }
    if (expect != t_len) throw std::invalid_argument("snnfuse: plan does not cover the time axis");
    if (longest - shortest > 1) {
      throw std::invalid_argument("snnfuse: plan segment lengths differ by more than one");
    }
    if (injected_comm_delay.count() < 0) throw std::invalid_argument("snnfuse: negative delay");
    if (micro_batches == 0 || micro_batches > batch) {
      throw std::invalid_argument("snnfuse: micro_batches must lie in [1, batch]");
    }
  }
};

enum class Direction { forward, backward };

struct BoundaryMessage {
  std::size_t layer = 0;
  /// Segment of the sender.
  std::size_t segment = 0;
  std::size_t micro_batch = 0;
  Direction direction = Direction::forward;
  /// LifState going forward, VoltageGrad going backward; sized to the
  /// micro-batch's columns.
  std::variant<LifState, VoltageGrad> payload;
  std::int64_t send_ns = 0;
  std::int64_t recv_ns = 0;
};

/// One compute or communication span. Times are nanoseconds on a monotonic
/// clock, relative to the start of the run.
struct TraceSpan {
  std::size_t worker = 0;
  std::size_t layer = 0;
  std::size_t segment = 0;
  std::size_t micro_batch = 0;
  std::string kind;
  std::int64_t start_ns = 0;
  std::int64_t end_ns = 0;
};

/// One JSON object per line.
inline void write_trace_jsonl(std::ostream& os, const std::vector<TraceSpan>& spans) {
  for (const auto& s : spans) {
    os << "{\"worker\":" << s.worker << ",\"layer\":" << s.layer << ",\"segment\":" << s.segment
       << ",\"micro_batch\":" << s.micro_batch << ",\"kind\":\"" << s.kind
       << "\",\"start_ns\":" << s.start_ns << ",\"end_ns\":" << s.end_ns << "}\n";
  }
}

/// Test seam: called by a worker before it starts each layer.
struct PipelineHooks {
  std::function<void(std::size_t worker, std::size_t layer)> before_layer;
};

struct PipelineForwardResult {
  ForwardTrace trace;
  /// carries[l][d]: carry-out of segment d at LIF layer l (empty for affine layers).
  std::vector<std::vector<LifState>> carries;
  std::vector<TraceSpan> timing;
  std::size_t messages = 0;
};

struct PipelineBackwardResult {
  NetGrads grads;
  std::vector<TraceSpan> timing;
  std::size_t messages = 0;
};

namespace detail {

using Clock = std::chrono::steady_clock;

struct MicroRange {
  std::size_t b_lo;
  std::size_t b_hi;
};

inline std::vector<MicroRange> micro_ranges(std::size_t batch, std::size_t m) {
  std::vector<MicroRange> out;
  for (const auto& s : partition_time(batch, m)) out.push_back({s.t_lo, s.t_hi});
  return out;
}

/// Column sub-block [b_lo, b_hi) x width of a [batch x width] block.
inline Block sub_block(const Block& src, const MicroRange& r) {
  Block out(r.b_hi - r.b_lo, src.width);
  std::copy_n(src.values.begin() + static_cast<std::ptrdiff_t>(r.b_lo * src.width), out.size(),
              out.values.begin());
  return out;
}

inline void put_sub_block(Block& dst, const Block& src, const MicroRange& r) {
  std::copy(src.values.begin(), src.values.end(),
            dst.values.begin() + static_cast<std::ptrdiff_t>(r.b_lo * dst.width));
}

/// Runs body(d) on k threads and joins them. The first failure closes every
/// channel (waking blocked peers) and is rethrown with the worker's index.
class WorkerGroup {
 public:
  template <typename Body>
  void run(std::size_t k, const std::vector<std::shared_ptr<Channel<BoundaryMessage>>>& channels,
           Body&& body) {
    std::vector<std::exception_ptr> errors(k);
    std::atomic<bool> failed{false};
    std::vector<std::thread> threads;
    threads.reserve(k);
    for (std::size_t d = 0; d < k; ++d) {
      threads.emplace_back([&, d] {
        try {
          body(d);
        } catch (const ChannelClosed&) {
          if (!failed.exchange(true)) errors[d] = std::current_exception();
        } catch (...) {
          errors[d] = std::current_exception();
          failed = true;
          for (auto& ch : channels) ch->close();
        }
      });
    }
    for (auto& t : threads) t.join();
    // Prefer a root cause over the ChannelClosed it triggered in a peer.
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t d = 0; d < k; ++d) {
        if (!errors[d]) continue;
        try {
          std::rethrow_exception(errors[d]);
        } catch (const ChannelClosed&) {
          if (pass == 0) continue;
          throw std::runtime_error("snnfuse: pipeline aborted, worker " + std::to_string(d) +
                                   " lost its channel");
        } catch (const std::exception& e) {
          throw std::runtime_error("snnfuse: pipeline aborted, worker " + std::to_string(d) +
                                   " failed: " + e.what());
        }
      }
    }
  }
};

class SpanLog {
 public:
  SpanLog(Clock::time_point epoch, std::size_t worker) : epoch_(epoch), worker_(worker) {}

  std::int64_t now() const {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - epoch_).count();
  }

  void add(std::size_t layer, std::size_t micro, const char* kind, std::int64_t start,
           std::int64_t end) {
    spans.push_back({worker_, layer, worker_, micro, kind, start, end});
  }

  template <typename F>
  void timed(std::size_t layer, std::size_t micro, const char* kind, F&& f) {
    const auto start = now();
    f();
    add(layer, micro, kind, start, now());
  }

  /// Blocks until the message's injected latency has elapsed since it was sent.
  BoundaryMessage receive(Channel<BoundaryMessage>& ch, std::chrono::nanoseconds delay,
                          std::size_t layer, std::size_t micro, Direction dir) {
    const auto start = now();
    BoundaryMessage msg = ch.receive();
    if (delay.count() > 0) std::this_thread::sleep_until(epoch_ + std::chrono::nanoseconds(msg.send_ns) + delay);
    msg.recv_ns = now();
    if (msg.layer != layer || msg.micro_batch != micro || msg.direction != dir) {
      throw std::logic_error("snnfuse: out-of-order boundary message");
    }
    add(layer, micro, dir == Direction::forward ? "recv_forward" : "recv_backward", start,
        msg.recv_ns);
    return msg;
  }

  void send(Channel<BoundaryMessage>& ch, BoundaryMessage msg) {
    msg.send_ns = now();
    const auto layer = msg.layer;
    const auto micro = msg.micro_batch;
    const char* kind = msg.direction == Direction::forward ? "send_forward" : "send_backward";
    const auto sent = msg.send_ns;
    ch.send(std::move(msg));
    add(layer, micro, kind, sent, sent);
  }

  std::vector<TraceSpan> spans;

 private:
  Clock::time_point epoch_;
  std::size_t worker_;
};

inline std::vector<TraceSpan> merge_spans(std::vector<SpanLog>& logs) {
  std::vector<TraceSpan> all;
  for (auto& l : logs) all.insert(all.end(), l.spans.begin(), l.spans.end());
  std::stable_sort(all.begin(), all.end(),
                   [](const TraceSpan& a, const TraceSpan& b) { return a.start_ns < b.start_ns; });
  return all;
}

inline std::vector<std::shared_ptr<Channel<BoundaryMessage>>> make_channels(std::size_t n) {
  std::vector<std::shared_ptr<Channel<BoundaryMessage>>> chans;
  for (std::size_t i = 0; i < n; ++i) chans.push_back(std::make_shared<Channel<BoundaryMessage>>());
  return chans;
}

}  // namespace detail

/// Buffers for pipeline_forward_into: activations, records and carries sized
/// for (net, t_len, batch, k). The input slot is filled by the run itself.
inline PipelineForwardResult make_pipeline_result(const SpikingNet& net, std::size_t t_len,
                                                  std::size_t batch, std::size_t k) {
  net.validate();
  const std::size_t n_layers = net.layers.size();
  PipelineForwardResult res;
  auto& tr = res.trace;
  tr.activations.reserve(n_layers + 1);
  tr.activations.emplace_back(t_len, batch, net.input_width());
  tr.lif_records.resize(n_layers);
  res.carries.resize(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t w = net.out_width(l);
    tr.activations.emplace_back(t_len, batch, w);
    if (const auto* lif = std::get_if<LifLayer>(&net.layers[l])) {
      tr.lif_records[l] = FusedForwardRecord{TimeMajorTensor(t_len, batch, w),
                                             TimeMajorTensor(t_len, batch, w),
                                             LifState::initial(batch, w, lif->params)};
      res.carries[l].assign(k, LifState::initial(batch, w, lif->params));
    }
  }
  return res;
}

/// Runs the forward pipeline into buffers from make_pipeline_result, so a
/// caller timing the run can keep allocation outside the clock. Every output
/// element is overwritten.
inline void pipeline_forward_into(const SpikingNet& net, const TimeMajorTensor& x,
                                  const PipelinePlan& plan, PipelineForwardResult& res,
                                  const PipelineHooks& hooks = {}) {
  net.validate();
  plan.validate(x.t_len(), x.batch());
  if (x.width() != net.input_width()) {
    throw std::invalid_argument("snnfuse: input width does not match network");
  }
  const std::size_t k = plan.k;
  const std::size_t n_layers = net.layers.size();
  const std::size_t T = x.t_len();
  const std::size_t B = x.batch();
  const auto micros = detail::micro_ranges(B, plan.micro_batches);

  auto& tr = res.trace;
  auto same = [&](const TimeMajorTensor& a, std::size_t w) {
    return a.t_len() == T && a.batch() == B && a.width() == w;
  };
  bool shaped = tr.activations.size() == n_layers + 1 && tr.lif_records.size() == n_layers &&
                res.carries.size() == n_layers && same(tr.activations[0], x.width());
  for (std::size_t l = 0; shaped && l < n_layers; ++l) {
    shaped = same(tr.activations[l + 1], net.out_width(l)) &&
             std::holds_alternative<LifLayer>(net.layers[l]) == tr.lif_records[l].has_value() &&
             (!tr.lif_records[l] || (same(tr.lif_records[l]->v_hist, net.out_width(l)) &&
                                     res.carries[l].size() == k));
  }
  if (!shaped) throw std::invalid_argument("snnfuse: pipeline result buffers do not match the run");
  res.timing.clear();
  res.messages = 0;

  // forward_ch[d] carries messages from worker d to d + 1.
  auto forward_ch = detail::make_channels(k > 0 ? k - 1 : 0);
  const auto epoch = detail::Clock::now();
  std::vector<detail::SpanLog> logs;
  for (std::size_t d = 0; d < k; ++d) logs.emplace_back(epoch, d);
  std::atomic<std::size_t> messages{0};

  detail::WorkerGroup{}.run(k, forward_ch, [&](std::size_t d) {
    auto& log = logs[d];
    const Segment seg = plan.segments[d];
    log.timed(0, 0, "copy_input", [&] {
      const auto lo = static_cast<std::ptrdiff_t>(seg.t_lo * x.step_size());
      const auto hi = static_cast<std::ptrdiff_t>(seg.t_hi * x.step_size());
      std::copy(x.data().begin() + lo, x.data().begin() + hi, tr.activations[0].data().begin() + lo);
    });
    for (std::size_t l = 0; l < n_layers; ++l) {
      if (hooks.before_layer) hooks.before_layer(d, l);
      const TimeMajorTensor& in = tr.activations[l];
      TimeMajorTensor& out = tr.activations[l + 1];
      if (const auto* a = std::get_if<AffineLayer>(&net.layers[l])) {
        for (std::size_t m = 0; m < micros.size(); ++m) {
          const auto r = micros[m];
          log.timed(l, m, "affine_forward", [&] {
            for (std::size_t t = seg.t_lo; t < seg.t_hi; ++t) {
              detail::affine_rows(*a, in.data().data() + in.index(t, r.b_lo, 0),
                                  out.data().data() + out.index(t, r.b_lo, 0), r.b_hi - r.b_lo);
            }
          });
        }
        continue;
      }
      const auto& lif = std::get<LifLayer>(net.layers[l]);
      auto& rec = *tr.lif_records[l];
      const std::size_t w = lif.width;
      const LifState initial = LifState::initial(B, w, lif.params);
      for (std::size_t m = 0; m < micros.size(); ++m) {
        const auto r = micros[m];
        LifState carry = d == 0
                             ? LifState{detail::sub_block(initial.v, r), detail::sub_block(initial.y, r)}
                             : std::get<LifState>(log.receive(*forward_ch[d - 1],
                                                              plan.injected_comm_delay, l, m,
                                                              Direction::forward)
                                                      .payload);
        log.timed(l, m, "lif_forward", [&] {
          const std::size_t off = in.index(seg.t_lo, r.b_lo, 0);
          detail::fused_forward_kernel(in.data().data() + off, rec.y_hist.data().data() + off,
                                       rec.v_hist.data().data() + off, seg.size(), in.step_size(),
                                       (r.b_hi - r.b_lo) * w, carry.v.values.data(),
                                       carry.y.values.data(), lif.params);
        });
        if (d + 1 < k) {
          log.send(*forward_ch[d], BoundaryMessage{l, d, m, Direction::forward, carry, 0, 0});
          ++messages;
        }
        detail::put_sub_block(res.carries[l][d].v, carry.v, r);
        detail::put_sub_block(res.carries[l][d].y, carry.y, r);
        if (d + 1 == k) {
          detail::put_sub_block(rec.final_state.v, carry.v, r);
          detail::put_sub_block(rec.final_state.y, carry.y, r);
        }
        log.timed(l, m, "lif_output", [&] {
          for (std::size_t t = seg.t_lo; t < seg.t_hi; ++t) {
            const std::size_t off = out.index(t, r.b_lo, 0);
            std::copy_n(rec.y_hist.data().data() + off, (r.b_hi - r.b_lo) * w,
                        out.data().data() + off);
          }
        });
      }
    }
  });

  res.timing = detail::merge_spans(logs);
  res.messages = messages.load();
}

inline PipelineForwardResult pipeline_forward(const SpikingNet& net, const TimeMajorTensor& x,
                                              const PipelinePlan& plan,
                                              const PipelineHooks& hooks = {}) {
  plan.validate(x.t_len(), x.batch());
  auto res = make_pipeline_result(net, x.t_len(), x.batch(), plan.k);
  pipeline_forward_into(net, x, plan, res, hooks);
  return res;
}

inline PipelineBackwardResult pipeline_backward(const SpikingNet& net, const ForwardTrace& tr,
                                                const TimeMajorTensor& g_y,
                                                const PipelinePlan& plan,
                                                const PipelineHooks& hooks = {}) {
  net.validate();
  const std::size_t n_layers = net.layers.size();
  if (tr.activations.size() != n_layers + 1) {
    throw std::invalid_argument("snnfuse: forward trace does not match network");
  }
  const TimeMajorTensor& y = tr.output();
  if (g_y.t_len() != y.t_len() || g_y.batch() != y.batch() || g_y.width() != y.width()) {
    throw std::invalid_argument("snnfuse: loss gradient shape does not match network output");
  }
  plan.validate(g_y.t_len(), g_y.batch());
  const std::size_t k = plan.k;
  const std::size_t T = g_y.t_len();
  const std::size_t B = g_y.batch();
  const auto micros = detail::micro_ranges(B, plan.micro_batches);

  // grad_act[l]: gradient w.r.t. activations[l]; grad_act[n_layers] is g_y.
  std::vector<TimeMajorTensor> grad_act;
  grad_act.reserve(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) grad_act.emplace_back(T, B, net.in_width(l));
  auto grad_out = [&](std::size_t l) -> const TimeMajorTensor& {
    return l + 1 == n_layers ? g_y : grad_act[l + 1];
  };

  PipelineBackwardResult res;
  res.grads.affine.resize(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    if (const auto* a = std::get_if<AffineLayer>(&net.layers[l])) {
      res.grads.affine[l] = AffineGrads(a->in_width, a->out_width);
    }
  }

  // backward_ch[d] carries messages from worker d + 1 to d.
  auto backward_ch = detail::make_channels(k > 0 ? k - 1 : 0);
  const auto epoch = detail::Clock::now();
  std::vector<detail::SpanLog> logs;
  for (std::size_t d = 0; d < k; ++d) logs.emplace_back(epoch, d);
  std::atomic<std::size_t> messages{0};

  detail::WorkerGroup{}.run(k, backward_ch, [&](std::size_t d) {
    auto& log = logs[d];
    const Segment seg = plan.segments[d];
    for (std::size_t l = n_layers; l-- > 0;) {
      if (hooks.before_layer) hooks.before_layer(d, l);
      const TimeMajorTensor& gout = grad_out(l);
      TimeMajorTensor& gin = grad_act[l];
      if (const auto* a = std::get_if<AffineLayer>(&net.layers[l])) {
        for (std::size_t m = 0; m < micros.size(); ++m) {
          const auto r = micros[m];
          log.timed(l, m, "affine_backward", [&] {
            for (std::size_t t = seg.t_lo; t < seg.t_hi; ++t) {
              detail::affine_input_grad_rows(*a, gout.data().data() + gout.index(t, r.b_lo, 0),
                                             gin.data().data() + gin.index(t, r.b_lo, 0),
                                             r.b_hi - r.b_lo);
            }
          });
        }
        continue;
      }
      const auto& lif = std::get<LifLayer>(net.layers[l]);
      const auto& rec = *tr.lif_records[l];
      const std::size_t w = lif.width;
      for (std::size_t m = 0; m < micros.size(); ++m) {
        const auto r = micros[m];
        VoltageGrad carry =
            d + 1 == k ? VoltageGrad(r.b_hi - r.b_lo, w)
                       : std::get<VoltageGrad>(log.receive(*backward_ch[d], plan.injected_comm_delay,
                                                           l, m, Direction::backward)
                                                   .payload);
        log.timed(l, m, "lif_backward", [&] {
          const std::size_t off = gout.index(seg.t_lo, r.b_lo, 0);
          detail::fused_backward_kernel(gout.data().data() + off, rec.v_hist.data().data() + off,
                                        rec.y_hist.data().data() + off, gin.data().data() + off,
                                        seg.size(), gout.step_size(), (r.b_hi - r.b_lo) * w,
                                        carry.values.data(), lif.params);
        });
        if (d > 0) {
          log.send(*backward_ch[d - 1],
                   BoundaryMessage{l, d, m, Direction::backward, std::move(carry), 0, 0});
          ++messages;
        }
      }
    }
  });

  // Parameter gradients: worker d owns a block of output neurons of every
  // affine layer and reduces it over all rows in order.
  detail::WorkerGroup{}.run(k, {}, [&](std::size_t d) {
    auto& log = logs[d];
    for (std::size_t l = 0; l < n_layers; ++l) {
      const auto* a = std::get_if<AffineLayer>(&net.layers[l]);
      if (a == nullptr || d >= a->out_width) continue;
      const auto blocks = partition_time(a->out_width, std::min(k, a->out_width));
      const auto blk = blocks[d];
      log.timed(l, 0, "param_reduce", [&] {
        detail::affine_param_grad_rows(*a, grad_out(l).data().data(),
                                       tr.activations[l].data().data(), T * B, blk.t_lo, blk.t_hi,
                                       *res.grads.affine[l]);
      });
    }
  });

  res.grads.g_x = std::move(grad_act[0]);
  res.timing = detail::merge_spans(logs);
  res.messages = messages.load();
  return res;
}

}  // namespace snnfuse
