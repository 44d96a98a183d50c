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

// Ideal model of a time-partitioned pipeline on k lanes.
//
// A task taking t_s on one lane splits into k equal sub-tasks of t_s / k,
// and each of the k - 1 boundary hops costs t_c:
//
//   T_m(k) = (k - 1) t_c + t_s / k
//   mu(k)  = t_s / T_m(k) = k t_s / (k (k - 1) t_c + t_s)
//
// Over continuous k, mu peaks at k = sqrt(t_s / t_c).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace snnfuse {

struct SpeedupModel {
  double t_s = 1.0;
  double t_c = 1.0;

  static SpeedupModel from_ratio(double ratio) { return SpeedupModel{ratio, 1.0}.validated(); }

  SpeedupModel validated() const {
    if (!(t_s > 0.0) || !(t_c > 0.0) || !std::isfinite(t_s) || !std::isfinite(t_c)) {
      throw std::invalid_argument("snnfuse: speedup model needs t_s > 0 and t_c > 0");
    }
    return *this;
  }
};

inline double predicted_time(const SpeedupModel& m, std::size_t k) {
  if (k == 0) throw std::invalid_argument("snnfuse: k must be >= 1");
  const double kd = static_cast<double>(k);
  return (kd - 1.0) * m.t_c + m.t_s / kd;
}

inline double speedup_mu(const SpeedupModel& m, std::size_t k) {
  if (k == 0) throw std::invalid_argument("snnfuse: k must be >= 1");
  const double kd = static_cast<double>(k);
  return kd * m.t_s / (kd * (kd - 1.0) * m.t_c + m.t_s);
}

/// Continuous optimum sqrt(t_s / t_c).
inline double optimal_k(const SpeedupModel& m) { return std::sqrt(m.t_s / m.t_c); }

/// Whichever integer neighbour of optimal_k gives the larger mu (the lower
/// one on a tie).
inline std::size_t best_integer_k(const SpeedupModel& m) {
  const double k_star = optimal_k(m);
  const auto lo = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(k_star)));
  const auto hi = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(k_star)));
  return speedup_mu(m, hi) > speedup_mu(m, lo) ? hi : lo;
}

struct CurveRow {
  double ratio;
  std::size_t k;
  double mu;
};

/// Rows (ratio, k, mu) for every ratio = t_s / t_c and k = 1..k_max.
inline std::vector<CurveRow> emit_model_curve(std::span<const double> ratios, std::size_t k_max) {
  std::vector<CurveRow> rows;
  rows.reserve(ratios.size() * k_max);
  for (double r : ratios) {
    const auto m = SpeedupModel::from_ratio(r);
    for (std::size_t k = 1; k <= k_max; ++k) rows.push_back({r, k, speedup_mu(m, k)});
  }
  return rows;
}

}  // namespace snnfuse
