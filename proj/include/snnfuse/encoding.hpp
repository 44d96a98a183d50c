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

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

#include "snnfuse/rng.hpp"
#include "snnfuse/tensor.hpp"

namespace snnfuse {

namespace detail {

inline void check_intensities(std::span<const float> intensity) {
  for (std::size_t i = 0; i < intensity.size(); ++i) {
    if (!(intensity[i] >= 0.0f && intensity[i] <= 1.0f)) {
      throw std::invalid_argument("snnfuse: intensity " + std::to_string(intensity[i]) +
                                  " at index " + std::to_string(i) + " outside [0, 1]");
    }
  }
}

}  // namespace detail

/// Rate coding: spike(t, b, n) ~ Bernoulli(intensity(b, n)), independent per
/// step, drawn in (b, t, n) order from `rng`.
inline TimeMajorTensor poisson_encode(std::span<const float> intensity, std::size_t batch,
                                      std::size_t width, std::size_t t_len, Rng& rng) {
  if (intensity.size() != batch * width) {
    throw std::invalid_argument("snnfuse: intensity block has wrong size");
  }
  detail::check_intensities(intensity);
  TimeMajorTensor out(t_len, batch, width);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t t = 0; t < t_len; ++t) {
      for (std::size_t n = 0; n < width; ++n) {
        out.at(t, b, n) = rng.bernoulli(intensity[b * width + n]) ? 1.0f : 0.0f;
      }
    }
  }
  return out;
}

/// Encodes a batch whose rows come from dataset samples `sample_ids`. Each
/// sample draws from its own stream seeded with derive_seed(base_seed,
/// {sample_id}), so the spikes of a sample do not depend on which batch or
/// position it lands in.
inline TimeMajorTensor poisson_encode_samples(std::span<const float> intensity, std::size_t width,
                                              std::span<const std::uint64_t> sample_ids,
                                              std::size_t t_len, std::uint64_t base_seed) {
  const std::size_t batch = sample_ids.size();
  if (intensity.size() != batch * width) {
    throw std::invalid_argument("snnfuse: intensity block has wrong size");
  }
  detail::check_intensities(intensity);
  TimeMajorTensor out(t_len, batch, width);
  for (std::size_t b = 0; b < batch; ++b) {
    Rng rng(derive_seed(base_seed, {sample_ids[b]}));
    for (std::size_t t = 0; t < t_len; ++t) {
      for (std::size_t n = 0; n < width; ++n) {
        out.at(t, b, n) = rng.bernoulli(intensity[b * width + n]) ? 1.0f : 0.0f;
      }
    }
  }
  return out;
}

}  // namespace snnfuse
