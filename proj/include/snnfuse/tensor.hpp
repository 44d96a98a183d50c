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
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace snnfuse {

namespace detail {

inline std::size_t checked_mul(std::size_t a, std::size_t b) {
  if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) {
    throw std::length_error("snnfuse: tensor dimensions overflow the index space");
  }
  return a * b;
}

}  // namespace detail

/// Dense [T x B x N] block of 32-bit floats in time-major order.
///
/// Element (t, b, n) lives at flat index t*B*N + b*N + n, so every time step
/// is one contiguous row of B*N values and a layer's whole time axis is a
/// single linear sweep.
class TimeMajorTensor {
 public:
  TimeMajorTensor() = default;

  TimeMajorTensor(std::size_t t_len, std::size_t batch, std::size_t width)
      : t_len_(t_len), batch_(batch), width_(width) {
    if (t_len == 0 || batch == 0 || width == 0) {
      throw std::invalid_argument("snnfuse: tensor dimensions must be >= 1");
    }
    const std::size_t n = detail::checked_mul(detail::checked_mul(t_len, batch), width);
    // Byte count must fit as well.
    detail::checked_mul(n, sizeof(float));
    data_.assign(n, 0.0f);
  }

  std::size_t t_len() const noexcept { return t_len_; }
  std::size_t batch() const noexcept { return batch_; }
  std::size_t width() const noexcept { return width_; }
  /// Values per time step (B*N).
  std::size_t step_size() const noexcept { return batch_ * width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(std::size_t t, std::size_t b, std::size_t n) const noexcept {
    return (t * batch_ + b) * width_ + n;
  }

  float& at(std::size_t t, std::size_t b, std::size_t n) {
    check(t, b, n);
    return data_[index(t, b, n)];
  }
  float at(std::size_t t, std::size_t b, std::size_t n) const {
    check(t, b, n);
    return data_[index(t, b, n)];
  }

  std::span<float> step(std::size_t t) {
    return {data_.data() + t * step_size(), step_size()};
  }
  std::span<const float> step(std::size_t t) const {
    return {data_.data() + t * step_size(), step_size()};
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  /// Bitwise comparison (distinguishes -0.0 from 0.0 and compares NaN payloads).
  friend bool operator==(const TimeMajorTensor& a, const TimeMajorTensor& b) {
    return a.t_len_ == b.t_len_ && a.batch_ == b.batch_ && a.width_ == b.width_ &&
           (a.data_.empty() ||
            std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0);
  }

 private:
  void check(std::size_t t, std::size_t b, std::size_t n) const {
    if (t >= t_len_ || b >= batch_ || n >= width_) {
      throw std::out_of_range("snnfuse: tensor index out of range");
    }
  }

  std::size_t t_len_ = 0;
  std::size_t batch_ = 0;
  std::size_t width_ = 0;
  std::vector<float> data_;
};

inline TimeMajorTensor zeros(std::size_t t_len, std::size_t batch, std::size_t width) {
  return TimeMajorTensor(t_len, batch, width);
}

/// Copy of time steps [t_lo, t_hi).
inline TimeMajorTensor time_slice(const TimeMajorTensor& x, std::size_t t_lo, std::size_t t_hi) {
  if (!(t_lo < t_hi && t_hi <= x.t_len())) {
    throw std::out_of_range("snnfuse: time_slice bounds [" + std::to_string(t_lo) + ", " +
                            std::to_string(t_hi) + ") outside [0, " +
                            std::to_string(x.t_len()) + ")");
  }
  TimeMajorTensor out(t_hi - t_lo, x.batch(), x.width());
  auto src = x.data().subspan(t_lo * x.step_size(), out.size());
  std::copy(src.begin(), src.end(), out.data().begin());
  return out;
}

inline TimeMajorTensor concat_time(std::span<const TimeMajorTensor> parts) {
  if (parts.empty()) throw std::invalid_argument("snnfuse: concat_time of nothing");
  std::size_t t_total = 0;
  for (const auto& p : parts) {
    if (p.batch() != parts.front().batch() || p.width() != parts.front().width()) {
      throw std::invalid_argument("snnfuse: concat_time parts disagree on batch/width");
    }
    t_total += p.t_len();
  }
  TimeMajorTensor out(t_total, parts.front().batch(), parts.front().width());
  auto dst = out.data().begin();
  for (const auto& p : parts) dst = std::copy(p.data().begin(), p.data().end(), dst);
  return out;
}

// Binary format: three little-endian uint64 (t_len, batch, width), then the
// float32 payload in flat order, also little-endian.
static_assert(std::endian::native == std::endian::little,
              "the tensor payload is written as raw host floats");

namespace detail {

inline void put_u64_le(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t get_u64_le(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) {
    throw std::runtime_error("snnfuse: truncated tensor header");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{buf[i]} << (8 * i);
  return v;
}

}  // namespace detail

inline void write_tensor(std::ostream& os, const TimeMajorTensor& x) {
  detail::put_u64_le(os, x.t_len());
  detail::put_u64_le(os, x.batch());
  detail::put_u64_le(os, x.width());
  os.write(reinterpret_cast<const char*>(x.data().data()),
           static_cast<std::streamsize>(x.size() * sizeof(float)));
  if (!os) throw std::runtime_error("snnfuse: failed writing tensor");
}

inline TimeMajorTensor read_tensor(std::istream& is) {
  const auto t_len = detail::get_u64_le(is);
  const auto batch = detail::get_u64_le(is);
  const auto width = detail::get_u64_le(is);
  TimeMajorTensor x(t_len, batch, width);
  if (!is.read(reinterpret_cast<char*>(x.data().data()),
               static_cast<std::streamsize>(x.size() * sizeof(float)))) {
    throw std::runtime_error("snnfuse: truncated tensor payload");
  }
  return x;
}

inline void save_tensor(const std::string& path, const TimeMajorTensor& x) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("snnfuse: cannot open " + path + " for writing");
  write_tensor(os, x);
}

inline TimeMajorTensor load_tensor(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("snnfuse: cannot open " + path);
  return read_tensor(is);
}

}  // namespace snnfuse
