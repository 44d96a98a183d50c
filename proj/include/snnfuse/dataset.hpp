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
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "snnfuse/rng.hpp"
#include "snnfuse/tensor.hpp"

namespace snnfuse {

/// Static intensity samples in [0, 1] with integer class labels.
struct Dataset {
  std::size_t width = 0;
  std::size_t classes = 0;
  /// count x width, row-major.
  std::vector<float> intensities;
  std::vector<std::uint32_t> labels;

  std::size_t size() const noexcept { return labels.size(); }

  std::span<const float> sample(std::size_t i) const {
    return {intensities.data() + i * width, width};
  }

  void validate() const {
    if (width == 0 || classes == 0) throw std::invalid_argument("snnfuse: dataset needs width and classes >= 1");
    if (intensities.size() != labels.size() * width) {
      throw std::invalid_argument("snnfuse: dataset intensity block has wrong size");
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= classes) {
        throw std::invalid_argument("snnfuse: sample " + std::to_string(i) + " has label " +
                                    std::to_string(labels[i]) + " >= " + std::to_string(classes));
      }
    }
    for (std::size_t i = 0; i < intensities.size(); ++i) {
      if (!(intensities[i] >= 0.0f && intensities[i] <= 1.0f)) {
        throw std::invalid_argument("snnfuse: sample " + std::to_string(i / width) +
                                    " has an intensity outside [0, 1]");
      }
    }
  }

  /// Intensity block of the samples `ids`, in that order.
  std::vector<float> gather(std::span<const std::uint64_t> ids) const {
    std::vector<float> out(ids.size() * width);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      const auto s = sample(static_cast<std::size_t>(ids[r]));
      std::copy(s.begin(), s.end(), out.begin() + static_cast<std::ptrdiff_t>(r * width));
    }
    return out;
  }

  std::vector<std::uint32_t> gather_labels(std::span<const std::uint64_t> ids) const {
    std::vector<std::uint32_t> out(ids.size());
    for (std::size_t r = 0; r < ids.size(); ++r) out[r] = labels[static_cast<std::size_t>(ids[r])];
    return out;
  }
};

struct BlobSpec {
  std::size_t count = 500;
  std::size_t width = 16;
  std::size_t classes = 2;
  /// Standard deviation of the per-feature Gaussian noise around a class centre.
  double spread = 0.15;
};

/// Gaussian blobs clipped to [0, 1]. Class centres are drawn uniformly in
/// [0.1, 0.9]^width from `centre_seed`; samples (balanced, labels cycling
/// 0, 1, ..., classes - 1) from `sample_seed`. Sharing the centre seed between
/// a train and a test split gives the same task with disjoint samples.
inline Dataset make_blobs(const BlobSpec& blob, std::uint64_t centre_seed,
                          std::uint64_t sample_seed) {
  if (blob.count == 0 || blob.width == 0 || blob.classes < 2 || !(blob.spread >= 0.0)) {
    throw std::invalid_argument("snnfuse: invalid blob parameters");
  }
  Rng centre_rng(derive_seed(centre_seed, {0xb10b}));
  std::vector<double> centres(blob.classes * blob.width);
  for (auto& c : centres) c = 0.1 + 0.8 * static_cast<double>(centre_rng.uniform());

  Dataset d;
  d.width = blob.width;
  d.classes = blob.classes;
  d.intensities.resize(blob.count * blob.width);
  d.labels.resize(blob.count);
  Rng rng(derive_seed(sample_seed, {0x5a3e}));
  for (std::size_t i = 0; i < blob.count; ++i) {
    const auto label = static_cast<std::uint32_t>(i % blob.classes);
    d.labels[i] = label;
    for (std::size_t n = 0; n < blob.width; ++n) {
      const double v = centres[label * blob.width + n] + blob.spread * rng.normal();
      d.intensities[i * blob.width + n] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return d;
}

// Binary format: little-endian u64 header (count, width, classes), then per
// record `width` float32 intensities followed by a u32 label.

inline void write_dataset(std::ostream& os, const Dataset& d) {
  d.validate();
  detail::put_u64_le(os, d.size());
  detail::put_u64_le(os, d.width);
  detail::put_u64_le(os, d.classes);
  for (std::size_t i = 0; i < d.size(); ++i) {
    os.write(reinterpret_cast<const char*>(d.intensities.data() + i * d.width),
             static_cast<std::streamsize>(d.width * sizeof(float)));
    os.write(reinterpret_cast<const char*>(&d.labels[i]), sizeof(std::uint32_t));
  }
  if (!os) throw std::runtime_error("snnfuse: failed to write dataset");
}

inline Dataset read_dataset(std::istream& is) {
  Dataset d;
  const std::uint64_t count = detail::get_u64_le(is);
  d.width = static_cast<std::size_t>(detail::get_u64_le(is));
  d.classes = static_cast<std::size_t>(detail::get_u64_le(is));
  if (d.width == 0 || d.classes == 0) throw std::runtime_error("snnfuse: dataset header is invalid");
  const std::size_t n = detail::checked_mul(static_cast<std::size_t>(count), d.width);
  d.intensities.resize(n);
  d.labels.resize(static_cast<std::size_t>(count));
  for (std::size_t i = 0; i < count; ++i) {
    is.read(reinterpret_cast<char*>(d.intensities.data() + i * d.width),
            static_cast<std::streamsize>(d.width * sizeof(float)));
    is.read(reinterpret_cast<char*>(&d.labels[i]), sizeof(std::uint32_t));
    if (!is) throw std::runtime_error("snnfuse: dataset truncated at record " + std::to_string(i));
  }
  d.validate();
  return d;
}

inline void save_dataset(const std::string& path, const Dataset& d) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("snnfuse: cannot open " + path + " for writing");
  write_dataset(os, d);
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("snnfuse: cannot open " + path);
  return read_dataset(is);
}

}  // namespace snnfuse
