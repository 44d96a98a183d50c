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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "snnfuse/tensor.hpp"

namespace snnfuse {

/// Class scores as the mean spike count over time: logits(b, c) = (1/T) sum_t y(t, b, c).
inline std::vector<double> rate_logits(const TimeMajorTensor& y_out) {
  const std::size_t n = y_out.step_size();
  std::vector<double> logits(n, 0.0);
  for (std::size_t t = 0; t < y_out.t_len(); ++t) {
    auto row = y_out.step(t);
    for (std::size_t i = 0; i < n; ++i) logits[i] += row[i];
  }
  const double inv_t = 1.0 / static_cast<double>(y_out.t_len());
  for (auto& l : logits) l *= inv_t;
  return logits;
}

/// Predicted class per sample (lowest index wins ties).
inline std::vector<std::uint32_t> rate_predictions(const TimeMajorTensor& y_out) {
  const auto logits = rate_logits(y_out);
  const std::size_t classes = y_out.width();
  std::vector<std::uint32_t> pred(y_out.batch());
  for (std::size_t b = 0; b < y_out.batch(); ++b) {
    const auto first = logits.begin() + static_cast<std::ptrdiff_t>(b * classes);
    pred[b] = static_cast<std::uint32_t>(
        std::max_element(first, first + static_cast<std::ptrdiff_t>(classes)) - first);
  }
  return pred;
}

struct LossResult {
  double loss = 0.0;
  /// dLoss/dy_out, same shape as the network output.
  TimeMajorTensor g_y;
};

/// Softmax cross-entropy on rate logits, averaged over the batch.
///
/// g_y(t, b, c) = (softmax(b, c) - [c == label_b]) / (T * B) for every t.
inline LossResult rate_cross_entropy(const TimeMajorTensor& y_out,
                                     std::span<const std::uint32_t> labels) {
  if (y_out.empty() || labels.empty()) throw std::invalid_argument("snnfuse: empty batch");
  if (labels.size() != y_out.batch()) {
    throw std::invalid_argument("snnfuse: label count " + std::to_string(labels.size()) +
                                " != batch " + std::to_string(y_out.batch()));
  }
  const std::size_t batch = y_out.batch();
  const std::size_t classes = y_out.width();
  const auto logits = rate_logits(y_out);

  LossResult out{0.0, TimeMajorTensor(y_out.t_len(), batch, classes)};
  std::vector<double> grad_row(batch * classes);
  const double scale = 1.0 / (static_cast<double>(y_out.t_len()) * static_cast<double>(batch));
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] >= classes) {
      throw std::invalid_argument("snnfuse: label " + std::to_string(labels[b]) +
                                  " out of range for " + std::to_string(classes) + " classes");
    }
    const double* z = logits.data() + b * classes;
    const double zmax = *std::max_element(z, z + classes);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(z[c] - zmax);
    const double log_denom = std::log(denom);
    out.loss += -(z[labels[b]] - zmax - log_denom);
    for (std::size_t c = 0; c < classes; ++c) {
      const double sm = std::exp(z[c] - zmax - log_denom);
      grad_row[b * classes + c] = (sm - (c == labels[b] ? 1.0 : 0.0)) * scale;
    }
  }
  out.loss /= static_cast<double>(batch);
  for (std::size_t t = 0; t < y_out.t_len(); ++t) {
    auto row = out.g_y.step(t);
    for (std::size_t i = 0; i < row.size(); ++i) row[i] = static_cast<float>(grad_row[i]);
  }
  return out;
}

}  // namespace snnfuse
