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

#include <filesystem>

#include "snnfuse/verify.hpp"

namespace snnfuse {
namespace {

VerifyOptions quick(std::size_t cases) {
  VerifyOptions o;
  o.cases = cases;
  o.max_t = 24;
  o.max_batch = 4;
  o.max_width = 48;
  return o;
}

TEST(Verify, HealthyBuildHasNoMismatches) {
  const auto r = run_verify(quick(30));
  ASSERT_EQ(r.suites.size(), 4u);
  for (const auto& s : r.suites) {
    EXPECT_EQ(s.cases, 30u) << s.name;
    EXPECT_EQ(s.mismatches, 0u) << s.name;
  }
  EXPECT_TRUE(r.ok());
}

TEST(Verify, ZeroCasesRunsNothing) {
  const auto r = run_verify(quick(0));
  EXPECT_TRUE(r.suites.empty());
  EXPECT_TRUE(r.ok());
}

TEST(Verify, RejectsZeroLimits) {
  auto o = quick(1);
  o.max_width = 0;
  EXPECT_THROW(run_verify(o), std::invalid_argument);
}

TEST(Verify, InjectedFaultIsLocalisedAndDumped) {
  const auto dir = std::filesystem::temp_directory_path() / "snnfuse_verify_dump_test";
  std::filesystem::remove_all(dir);
  auto o = quick(20);
  o.fault = Fault::fused_k_tau;
  o.dump_dir = dir.string();
  const auto r = run_verify(o);
  EXPECT_FALSE(r.ok());
  const auto& fused = r.suites.front();
  ASSERT_TRUE(fused.first.has_value());
  const auto& m = *fused.first;
  EXPECT_TRUE(m.t.has_value() && m.b.has_value() && m.n.has_value());
  EXPECT_NE(m.describe().find("(t,b,n)=("), std::string::npos) << m.describe();
  EXPECT_NE(m.expected, m.actual);
  ASSERT_FALSE(m.dumped.empty());
  for (const auto& f : m.dumped) EXPECT_TRUE(std::filesystem::exists(f)) << f;
  std::filesystem::remove_all(dir);
}

TEST(Verify, ScalarInterpretersAgreeWithEngines) {
  Rng rng(51);
  const LifParams p;
  TimeMajorTensor x(9, 2, 5), g(9, 2, 5);
  for (auto& v : x.data()) v = rng.uniform(-0.2f, 0.8f);
  for (auto& v : g.data()) v = rng.uniform(-1.0f, 1.0f);
  const auto s0 = LifState::initial(2, 5, p);
  const auto f = scalar_lif_forward(x, s0, p);
  const auto rec = fused_forward(x, s0, p);
  EXPECT_EQ(f.v, std::vector<float>(rec.v_hist.data().begin(), rec.v_hist.data().end()));
  const auto b = scalar_lif_backward(g, f.v, f.y, std::vector<float>(10, 0.0f), p);
  const auto gb = fused_backward(g, rec, VoltageGrad(2, 5), p);
  EXPECT_EQ(b.g_x, std::vector<float>(gb.g_x.data().begin(), gb.g_x.data().end()));
  EXPECT_EQ(b.carry_out, gb.grad_carry_out.values);
}

}  // namespace
}  // namespace snnfuse
