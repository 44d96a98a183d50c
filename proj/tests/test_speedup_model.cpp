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

#include <vector>

#include "snnfuse/speedup_model.hpp"

namespace snnfuse {
namespace {

TEST(SpeedupModel, SingleLaneIsUnity) {
  for (double r : {0.5, 1.0, 4.0, 16.0, 64.0, 1e6}) {
    EXPECT_DOUBLE_EQ(speedup_mu(SpeedupModel::from_ratio(r), 1), 1.0);
  }
}

TEST(SpeedupModel, KnownValue) {
  // 4 * 16 / (4 * 3 + 16) = 64 / 28.
  EXPECT_DOUBLE_EQ(speedup_mu(SpeedupModel::from_ratio(16.0), 4), 16.0 / 7.0);
  EXPECT_DOUBLE_EQ(predicted_time(SpeedupModel{16.0, 1.0}, 4), 7.0);
}

TEST(SpeedupModel, VanishesForLargeK) {
  const auto m = SpeedupModel::from_ratio(16.0);
  EXPECT_LT(speedup_mu(m, 1000), 0.02);
  EXPECT_LT(speedup_mu(m, 100000), speedup_mu(m, 1000));
}

TEST(SpeedupModel, OptimumOracles) {
  EXPECT_DOUBLE_EQ(optimal_k(SpeedupModel::from_ratio(16.0)), 4.0);
  EXPECT_EQ(best_integer_k(SpeedupModel::from_ratio(16.0)), 4u);
  EXPECT_EQ(best_integer_k(SpeedupModel::from_ratio(1.0)), 1u);
  EXPECT_EQ(best_integer_k(SpeedupModel::from_ratio(0.01)), 1u);
  EXPECT_EQ(best_integer_k(SpeedupModel::from_ratio(64.0)), 8u);
}

TEST(SpeedupModel, BestIntegerKMatchesExhaustiveScan) {
  for (double r = 0.25; r < 400.0; r *= 1.07) {
    const auto m = SpeedupModel::from_ratio(r);
    std::size_t arg = 1;
    for (std::size_t k = 2; k <= 200; ++k) {
      if (speedup_mu(m, k) > speedup_mu(m, arg)) arg = k;
    }
    ASSERT_EQ(best_integer_k(m), arg) << r;
  }
}

TEST(SpeedupModel, UnimodalCurve) {
  for (double r : {2.0, 4.0, 16.0, 64.0, 250.0}) {
    const auto m = SpeedupModel::from_ratio(r);
    const std::size_t peak = best_integer_k(m);
    for (std::size_t k = 1; k < 100; ++k) {
      if (k < peak) {
        ASSERT_LT(speedup_mu(m, k), speedup_mu(m, k + 1)) << r << " " << k;
      } else {
        ASSERT_GE(speedup_mu(m, k), speedup_mu(m, k + 1)) << r << " " << k;
      }
    }
  }
}

TEST(SpeedupModel, ScaleInvariant) {
  const SpeedupModel a{16.0, 1.0}, b{1.6e-3, 1e-4};
  for (std::size_t k = 1; k <= 20; ++k) EXPECT_NEAR(speedup_mu(a, k), speedup_mu(b, k), 1e-12);
}

TEST(SpeedupModel, CurveRows) {
  const std::vector<double> ratios{4.0, 16.0};
  const auto rows = emit_model_curve(ratios, 5);
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[0].k, 1u);
  EXPECT_EQ(rows[9].ratio, 16.0);
  EXPECT_EQ(rows[9].k, 5u);
  EXPECT_DOUBLE_EQ(rows[8].mu, 16.0 / 7.0);
}

TEST(SpeedupModel, RejectsInvalid) {
  EXPECT_THROW(SpeedupModel::from_ratio(0.0), std::invalid_argument);
  EXPECT_THROW(SpeedupModel::from_ratio(-1.0), std::invalid_argument);
  EXPECT_THROW((SpeedupModel{1.0, 0.0}.validated()), std::invalid_argument);
  EXPECT_THROW(speedup_mu(SpeedupModel{}, 0), std::invalid_argument);
}

}  // namespace
}  // namespace snnfuse
