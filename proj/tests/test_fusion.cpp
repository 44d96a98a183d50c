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

#include <gtest/gtest.h>

#include "snnfuse/bench.hpp"
#include "snnfuse/fusion.hpp"
#include "snnfuse/rng.hpp"

namespace snnfuse {
namespace {

TimeMajorTensor random_input(Rng& rng, std::size_t t, std::size_t b, std::size_t n) {
  TimeMajorTensor x(t, b, n);
  for (auto& v : x.data()) v = rng.uniform(-0.2f, 0.8f);
  return x;
}

LifState random_state(Rng& rng, std::size_t b, std::size_t n) {
  LifState s{Block(b, n), Block(b, n)};
  for (std::size_t i = 0; i < s.v.size(); ++i) {
    s.v.values[i] = rng.uniform(-0.5f, 0.5f);
    s.y.values[i] = rng.bernoulli(0.3f) ? 1.0f : 0.0f;
  }
  return s;
}

VoltageGrad random_grad(Rng& rng, std::size_t b, std::size_t n) {
  VoltageGrad g(b, n);
  for (auto& v : g.values) v = rng.uniform(-1.0f, 1.0f);
  return g;
}

TEST(Fusion, SingleStepForwardOracle) {
  TimeMajorTensor x(1, 1, 2);
  x.data()[0] = 0.5f;
  x.data()[1] = 0.1f;
  const LifParams p;
  for (auto e : {LifEngine::serial, LifEngine::fused}) {
    const auto r = lif_forward(e, x, LifState::initial(1, 2, p), p);
    EXPECT_EQ(r.y_hist.data()[0], 1.0f);
    EXPECT_EQ(r.y_hist.data()[1], 0.0f);
    EXPECT_EQ(r.v_hist.data()[0], 0.5f);
    EXPECT_EQ(r.final_state.y.values[0], 1.0f);
  }
}

TEST(Fusion, SingleStepBackwardOracle) {
  TimeMajorTensor x(1, 1, 1);
  x.data()[0] = 0.3f;
  const LifParams p;
  const auto rec = fused_forward(x, LifState::initial(1, 1, p), p);
  TimeMajorTensor g(1, 1, 1);
  g.data()[0] = 1.0f;
  for (auto e : {LifEngine::serial, LifEngine::fused}) {
    const auto r = lif_backward(e, g, rec, VoltageGrad(1, 1), p);
    EXPECT_EQ(r.g_x.data()[0], 1.0f);
    EXPECT_EQ(r.grad_carry_out.values[0], 1.0f);
  }
}

TEST(Fusion, ZeroInputProducesNoSpikes) {
  const LifParams p;
  const TimeMajorTensor x(16, 3, 5);
  for (auto e : {LifEngine::serial, LifEngine::fused}) {
    const auto r = lif_forward(e, x, LifState::initial(3, 5, p), p);
    for (float y : r.y_hist.data()) ASSERT_EQ(y, 0.0f);
    for (float v : r.v_hist.data()) ASSERT_EQ(v, 0.0f);
  }
}

TEST(Fusion, MatchesStepwiseScalarOracle) {
  Rng rng(21);
  const LifParams p;
  const auto x = random_input(rng, 20, 2, 7);
  const auto r = fused_forward(x, LifState::initial(2, 7, p), p);
  for (std::size_t i = 0; i < 14; ++i) {
    float v = p.v_rest, y = 0.0f;
    for (std::size_t t = 0; t < 20; ++t) {
      v = p.k_tau * v * (1.0f - y) + p.v_rest * y + x.data()[t * 14 + i];
      y = v - p.v_th >= 0.0f ? 1.0f : 0.0f;
      ASSERT_EQ(r.v_hist.data()[t * 14 + i], v);
      ASSERT_EQ(r.y_hist.data()[t * 14 + i], y);
    }
  }
}

// Both engines must agree bit for bit, including across tile boundaries.
TEST(Fusion, EnginesBitwiseEqualProperty) {
  Rng rng(22);
  for (int trial = 0; trial < 100; ++trial) {
    LifParams p;
    p.v_rest = rng.uniform(-0.2f, 0.0f);
    p.k_tau = rng.uniform(0.05f, 0.95f);
    const std::size_t T = 1 + rng.below(64), B = 1 + rng.below(4);
    const std::size_t N = trial % 10 == 0 ? detail::kFusedTile + 1 + rng.below(300) : 1 + rng.below(200);
    const auto x = random_input(rng, T, B, N);
    const auto s0 = random_state(rng, B, N);
    const auto a = serial_forward(x, s0, p);
    const auto b = fused_forward(x, s0, p);
    ASSERT_EQ(a.y_hist, b.y_hist) << trial;
    ASSERT_EQ(a.v_hist, b.v_hist) << trial;
    ASSERT_EQ(a.final_state, b.final_state) << trial;

    TimeMajorTensor g(T, B, N);
    for (auto& v : g.data()) v = rng.uniform(-1.0f, 1.0f);
    const auto carry = random_grad(rng, B, N);
    const auto ga = serial_backward(g, a, carry, p);
    const auto gb = fused_backward(g, a, carry, p);
    ASSERT_EQ(ga.g_x, gb.g_x) << trial;
    ASSERT_EQ(ga.grad_carry_out, gb.grad_carry_out) << trial;
  }
}

TEST(Fusion, ForwardSegmentationRoundTrip) {
  Rng rng(23);
  const LifParams p;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t T = 2 + rng.below(40), B = 1 + rng.below(3), N = 1 + rng.below(30);
    const auto x = random_input(rng, T, B, N);
    const auto whole = fused_forward(x, LifState::initial(B, N, p), p);
    const std::size_t cut = 1 + rng.below(T - 1);
    const auto first = fused_forward(time_slice(x, 0, cut), LifState::initial(B, N, p), p);
    const auto second = serial_forward(time_slice(x, cut, T), first.final_state, p);
    const std::vector<TimeMajorTensor> ys{first.y_hist, second.y_hist};
    const std::vector<TimeMajorTensor> vs{first.v_hist, second.v_hist};
    ASSERT_EQ(concat_time(ys), whole.y_hist);
    ASSERT_EQ(concat_time(vs), whole.v_hist);
    ASSERT_EQ(second.final_state, whole.final_state);
  }
}

TEST(Fusion, BackwardSegmentationRoundTrip) {
  Rng rng(24);
  const LifParams p;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t T = 2 + rng.below(40), B = 1 + rng.below(3), N = 1 + rng.below(30);
    const auto x = random_input(rng, T, B, N);
    const auto rec = fused_forward(x, LifState::initial(B, N, p), p);
    TimeMajorTensor g(T, B, N);
    for (auto& v : g.data()) v = rng.uniform(-1.0f, 1.0f);
    const auto whole = fused_backward(g, rec, VoltageGrad(B, N), p);

    const std::size_t cut = 1 + rng.below(T - 1);
    FusedForwardRecord late{time_slice(rec.y_hist, cut, T), time_slice(rec.v_hist, cut, T), {}};
    FusedForwardRecord early{time_slice(rec.y_hist, 0, cut), time_slice(rec.v_hist, 0, cut), {}};
    const auto b2 = fused_backward(time_slice(g, cut, T), late, VoltageGrad(B, N), p);
    const auto b1 = serial_backward(time_slice(g, 0, cut), early, b2.grad_carry_out, p);
    const std::vector<TimeMajorTensor> parts{b1.g_x, b2.g_x};
    ASSERT_EQ(concat_time(parts), whole.g_x);
    ASSERT_EQ(b1.grad_carry_out, whole.grad_carry_out);
  }
}

TEST(Fusion, BackwardOfZeroGradientIsZero) {
  Rng rng(25);
  const LifParams p;
  const auto x = random_input(rng, 10, 2, 9);
  const auto rec = serial_forward(x, LifState::initial(2, 9, p), p);
  const auto r = fused_backward(TimeMajorTensor(10, 2, 9), rec, VoltageGrad(2, 9), p);
  for (float v : r.g_x.data()) ASSERT_EQ(v, 0.0f);
}

TEST(Fusion, IntoVariantsReuseBuffers) {
  Rng rng(26);
  const LifParams p;
  const auto x = random_input(rng, 12, 2, 33);
  auto buf = detail::make_record(x, LifState::initial(2, 33, p));
  fused_forward_into(x, LifState::initial(2, 33, p), p, buf);
  const float* before = buf.v_hist.data().data();
  fused_forward_into(x, LifState::initial(2, 33, p), p, buf);
  EXPECT_EQ(buf.v_hist.data().data(), before);
  const auto ref = serial_forward(x, LifState::initial(2, 33, p), p);
  EXPECT_EQ(buf.v_hist, ref.v_hist);
}

TEST(Fusion, RejectsShapeMismatch) {
  const LifParams p;
  const TimeMajorTensor x(4, 2, 3);
  EXPECT_THROW(fused_forward(x, LifState::initial(2, 4, p), p), std::invalid_argument);
  EXPECT_THROW(serial_forward(x, LifState::initial(1, 3, p), p), std::invalid_argument);
  const auto rec = fused_forward(x, LifState::initial(2, 3, p), p);
  EXPECT_THROW(fused_backward(TimeMajorTensor(5, 2, 3), rec, VoltageGrad(2, 3), p),
               std::invalid_argument);
  EXPECT_THROW(serial_backward(TimeMajorTensor(4, 2, 3), rec, VoltageGrad(2, 2), p),
               std::invalid_argument);
}

TEST(Bench, SummaryStatistics) {
  const auto s = summarize({4.0, 1.0, 3.0, 2.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.median, 2.5);
  EXPECT_DOUBLE_EQ(s.min, 1.0);
  EXPECT_DOUBLE_EQ(s.max, 4.0);
  EXPECT_NEAR(s.stddev, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_NEAR(s.std_error(), std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(summarize({}).samples, 0u);
  EXPECT_EQ(summarize({7.0}).stddev, 0.0);
}

TEST(Bench, ChecksumSeesEveryBit) {
  std::vector<float> a{1.0f, 2.0f}, b{1.0f, 2.0f};
  EXPECT_EQ(checksum(a), checksum(b));
  b[1] = std::nextafter(2.0f, 3.0f);
  EXPECT_NE(checksum(a), checksum(b));
}

TEST(Bench, SmallFusionRunAgreesAcrossEngines) {
  FusionBenchConfig cfg;
  cfg.t_list = {3, 9};
  cfg.width = 5000;
  cfg.reps = 3;
  cfg.warmup = 1;
  const auto rows = run_fusion_bench(cfg);
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.checksums_match());
    EXPECT_EQ(r.serial.samples, 3u);
    EXPECT_EQ(r.paired_ratio.samples, 3u);
    EXPECT_GT(r.speedup, 0.0);
  }
}

TEST(Bench, PipelineRunSkipsOrMeasures) {
  PipelineBenchConfig cfg;
  cfg.k_list = {1, 2};
  cfg.t_len = 8;
  cfg.width = 64;
  cfg.batch = 2;
  cfg.micro_batches = 2;
  cfg.reps = 2;
  cfg.tc_ratio = 4.0;
  cfg.oversubscribe = true;
  const auto rep = run_pipeline_bench(cfg);
  ASSERT_EQ(rep.rows.size(), 2u);
  EXPECT_EQ(rep.rows[0].measured_mu, 1.0);
  EXPECT_EQ(rep.rows[1].messages, 2u);
  EXPECT_TRUE(rep.rows[1].predicted_mu.has_value());
  EXPECT_DOUBLE_EQ(*rep.rows[1].predicted_mu, 2.0 * 4.0 / (2.0 + 4.0));
  cfg.inject_tc_us = 1.0;
  EXPECT_THROW(run_pipeline_bench(cfg), std::invalid_argument);
}

}  // namespace
}  // namespace snnfuse
