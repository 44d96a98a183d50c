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

// Benchmark runners behind the CLI. Timings cover the engines only: inputs
// and output buffers are prepared before the clock starts and the first
// `warmup` repetitions of every case are discarded.

#include <algorithm>
#include <cmath>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "snnfuse/fusion.hpp"
#include "snnfuse/pipeline.hpp"
#include "snnfuse/rng.hpp"
#include "snnfuse/speedup_model.hpp"

namespace snnfuse {

struct EnvSummary {
  unsigned hardware_lanes = 0;
  std::string clock = "std::chrono::steady_clock";
  bool clock_is_steady = std::chrono::steady_clock::is_steady;
  std::string compiler;
};

inline EnvSummary environment_summary() {
  EnvSummary e;
  e.hardware_lanes = std::max(1u, std::thread::hardware_concurrency());
#if defined(__clang__)
  e.compiler = std::string("clang ") + __clang_version__;
#elif defined(__GNUC__)
  e.compiler = std::string("gcc ") + __VERSION__;
#else
  e.compiler = "unknown";
#endif
  return e;
}

/// FNV-1a over the raw bytes of a float sequence.
inline std::uint64_t checksum(std::span<const float> values, std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = reinterpret_cast<const unsigned char*>(values.data());
  for (std::size_t i = 0; i < values.size_bytes(); ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

struct Stats {
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  /// Sample standard deviation (zero for fewer than two samples).
  double stddev = 0.0;
  std::size_t samples = 0;

  double std_error() const {
    return samples > 0 ? stddev / std::sqrt(static_cast<double>(samples)) : 0.0;
  }
};

inline Stats summarize(std::vector<double> xs) {
  Stats s;
  s.samples = xs.size();
  if (xs.empty()) return s;
  std::sort(xs.begin(), xs.end());
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  const std::size_t mid = xs.size() / 2;
  s.median = xs.size() % 2 ? xs[mid] : 0.5 * (xs[mid - 1] + xs[mid]);
  s.min = xs.front();
  s.max = xs.back();
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

template <typename F>
double time_seconds(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Inputs in [0, 0.6) so a realistic fraction of neurons fires.
inline TimeMajorTensor random_input(std::size_t t_len, std::size_t batch, std::size_t width,
                                    std::uint64_t seed, float lo = 0.0f, float hi = 0.6f) {
  TimeMajorTensor x(t_len, batch, width);
  Rng rng(seed);
  for (auto& v : x.data()) v = rng.uniform(lo, hi);
  return x;
}

// ---------------------------------------------------------------------------
// Serial vs fused

struct FusionBenchConfig {
  std::vector<std::size_t> t_list{8, 16, 32, 64, 128, 256};
  std::size_t width = 100000;
  std::size_t batch = 1;
  std::size_t reps = 100;
  std::size_t warmup = 2;
  std::uint64_t seed = 1;
  LifParams params{};
};

struct FusionBenchRow {
  std::size_t t_len = 0;
  std::size_t width = 0;
  std::size_t batch = 0;
  std::size_t reps = 0;
  Stats serial;
  Stats fused;
  /// serial.mean / fused.mean.
  double speedup = 0.0;
  /// Per-repetition serial / fused ratios of back-to-back runs; their spread
  /// sizes the noise allowance when comparing speedups across T.
  Stats paired_ratio;
  std::uint64_t checksum_serial = 0;
  std::uint64_t checksum_fused = 0;
  bool checksums_match() const { return checksum_serial == checksum_fused; }
};

/// Times forward plus backward of one LIF layer per engine. Serial and fused
/// repetitions alternate, and which goes first alternates too, so slow drift
/// in the machine affects both alike.
inline std::vector<FusionBenchRow> run_fusion_bench(
    const FusionBenchConfig& cfg, const std::function<void(const FusionBenchRow&)>& on_row = {}) {
  if (cfg.reps == 0 || cfg.width == 0 || cfg.batch == 0) {
    throw std::invalid_argument("snnfuse: bench sizes and reps must be >= 1");
  }
  std::vector<FusionBenchRow> rows;
  for (const std::size_t t_len : cfg.t_list) {
    if (t_len == 0) throw std::invalid_argument("snnfuse: time steps must be >= 1");
    const auto x = random_input(t_len, cfg.batch, cfg.width, derive_seed(cfg.seed, {t_len, 1}));
    const auto g_y =
        random_input(t_len, cfg.batch, cfg.width, derive_seed(cfg.seed, {t_len, 2}), -1.0f, 1.0f);
    const auto carry = LifState::initial(cfg.batch, cfg.width, cfg.params);
    const VoltageGrad zero(cfg.batch, cfg.width);

    auto rec_s = detail::make_record(x, carry);
    auto rec_f = detail::make_record(x, carry);
    BackwardResult bwd_s{TimeMajorTensor(t_len, cfg.batch, cfg.width), zero};
    BackwardResult bwd_f{TimeMajorTensor(t_len, cfg.batch, cfg.width), zero};

    auto run_serial = [&] {
      serial_forward_into(x, carry, cfg.params, rec_s);
      serial_backward_into(g_y, rec_s, zero, cfg.params, bwd_s);
    };
    auto run_fused = [&] {
      fused_forward_into(x, carry, cfg.params, rec_f);
      fused_backward_into(g_y, rec_f, zero, cfg.params, bwd_f);
    };

    std::vector<double> ts, tf, ratios;
    for (std::size_t r = 0; r < cfg.warmup + cfg.reps; ++r) {
      double a, b;
      if (r % 2 == 0) {
        a = time_seconds(run_serial);
        b = time_seconds(run_fused);
      } else {
        b = time_seconds(run_fused);
        a = time_seconds(run_serial);
      }
      if (r >= cfg.warmup) {
        ts.push_back(a);
        tf.push_back(b);
        ratios.push_back(a / b);
      }
    }

    auto digest = [](const FusedForwardRecord& rec, const BackwardResult& bwd) {
      auto h = checksum(rec.y_hist.data());
      h = checksum(rec.v_hist.data(), h);
      h = checksum(bwd.g_x.data(), h);
      return checksum(bwd.grad_carry_out.values, h);
    };
    FusionBenchRow row{t_len, cfg.width, cfg.batch, cfg.reps, summarize(ts), summarize(tf), 0.0,
                       summarize(ratios), digest(rec_s, bwd_s), digest(rec_f, bwd_f)};
    row.speedup = row.serial.mean / row.fused.mean;
    rows.push_back(row);
    if (on_row) on_row(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Pipeline scaling

struct PipelineBenchConfig {
  std::vector<std::size_t> k_list{1, 2, 3, 4, 5, 6, 8};
  std::size_t t_len = 64;
  std::size_t width = 100000;
  std::size_t batch = 16;
  /// Micro-batches per layer; needed for overlap on a single-layer network.
  std::size_t micro_batches = 16;
  std::size_t reps = 100;
  std::size_t warmup = 2;
  std::uint64_t seed = 1;
  /// Fixed per-hop delay in microseconds.
  std::optional<double> inject_tc_us;
  /// Alternatively, size the delay as T_s / ratio from the measured k = 1 time.
  std::optional<double> tc_ratio;
  /// Run cases with more workers than hardware lanes instead of skipping them.
  bool oversubscribe = false;
  LifParams params{};
};

struct PipelineBenchRow {
  std::size_t k = 0;
  std::size_t reps = 0;
  Stats time;
  double measured_mu = 0.0;
  /// Model prediction k T_s / (k (k - 1) T_c + T_s); empty without a delay.
  std::optional<double> predicted_mu;
  /// measured / predicted.
  std::optional<double> agreement;
  std::size_t messages = 0;
  bool skipped = false;
  std::string note;
};

struct PipelineBenchReport {
  std::size_t t_len = 0, width = 0, batch = 0, micro_batches = 0;
  double t_s = 0.0;
  double t_c = 0.0;
  std::vector<PipelineBenchRow> rows;
  /// k with the lowest mean time among measured rows.
  std::size_t best_measured_k = 1;
  std::optional<double> optimal_k_model;
};

/// Times pipeline_forward of a single LIF layer for each k. k = 1 is always
/// measured first and defines T_s; measured mu = T_s / time(k).
inline PipelineBenchReport run_pipeline_bench(
    const PipelineBenchConfig& cfg, const std::function<void(const PipelineBenchRow&)>& on_row = {}) {
  if (cfg.reps == 0) throw std::invalid_argument("snnfuse: reps must be >= 1");
  if (cfg.inject_tc_us && cfg.tc_ratio) {
    throw std::invalid_argument("snnfuse: give either a fixed delay or a T_s/T_c ratio");
  }
  for (auto k : cfg.k_list) {
    if (k == 0 || k > cfg.t_len) throw std::invalid_argument("snnfuse: every k must lie in [1, T]");
  }
  const auto lanes = environment_summary().hardware_lanes;
  const auto net = SpikingNet::monolayer(cfg.width, cfg.params);
  const auto x = random_input(cfg.t_len, cfg.batch, cfg.width, derive_seed(cfg.seed, {7}));

  auto measure = [&](std::size_t k, std::chrono::nanoseconds delay, std::size_t& messages) {
    const auto plan = PipelinePlan::even(cfg.t_len, k, delay, cfg.micro_batches);
    auto res = make_pipeline_result(net, cfg.t_len, cfg.batch, k);
    std::vector<double> samples;
    for (std::size_t r = 0; r < cfg.warmup + cfg.reps; ++r) {
      const double s = time_seconds([&] { pipeline_forward_into(net, x, plan, res); });
      messages = res.messages;
      if (r >= cfg.warmup) samples.push_back(s);
    }
    return summarize(std::move(samples));
  };

  PipelineBenchReport rep;
  rep.t_len = cfg.t_len;
  rep.width = cfg.width;
  rep.batch = cfg.batch;
  rep.micro_batches = cfg.micro_batches;
  std::size_t msgs = 0;
  const Stats base = measure(1, std::chrono::nanoseconds{0}, msgs);
  rep.t_s = base.mean;
  if (cfg.inject_tc_us) rep.t_c = *cfg.inject_tc_us * 1e-6;
  if (cfg.tc_ratio) rep.t_c = rep.t_s / *cfg.tc_ratio;
  const bool modelled = rep.t_c > 0.0;
  const auto delay = std::chrono::nanoseconds(static_cast<std::int64_t>(rep.t_c * 1e9));
  const SpeedupModel model{rep.t_s, modelled ? rep.t_c : 1.0};
  if (modelled) rep.optimal_k_model = optimal_k(model);

  double best_time = 0.0;
  for (const std::size_t k : cfg.k_list) {
    PipelineBenchRow row;
    row.k = k;
    row.reps = cfg.reps;
    if (modelled) row.predicted_mu = speedup_mu(model, k);
    if (k > lanes && !cfg.oversubscribe) {
      row.skipped = true;
      row.note = "k=" + std::to_string(k) + " exceeds " + std::to_string(lanes) +
                 " hardware lane(s); skipped";
    } else {
      if (k == 1) {
        row.time = base;
        row.messages = 0;
      } else {
        row.time = measure(k, delay, row.messages);
      }
      row.measured_mu = k == 1 ? 1.0 : rep.t_s / row.time.mean;
      if (row.predicted_mu) row.agreement = row.measured_mu / *row.predicted_mu;
      if (k > lanes) row.note = "oversubscribed: " + std::to_string(lanes) + " hardware lane(s)";
      if (best_time == 0.0 || row.time.mean < best_time) {
        best_time = row.time.mean;
        rep.best_measured_k = k;
      }
    }
    rep.rows.push_back(row);
    if (on_row) on_row(row);
  }
  return rep;
}

}  // namespace snnfuse
