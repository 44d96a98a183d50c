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

#include <condition_variable>
#include <deque>
#include <mutex>
#include <stdexcept>
#include <utility>

namespace snnfuse {

struct ChannelClosed : std::runtime_error {
  ChannelClosed() : std::runtime_error("snnfuse: channel closed") {}
};

/// Unbounded FIFO between one producer lane and one consumer lane. Closing
/// wakes every waiter; receive() on a closed, drained channel throws.
template <typename T>
class Channel {
 public:
  void send(T value) {
    {
      std::lock_guard lock(mu_);
      if (closed_) throw ChannelClosed();
      queue_.push_back(std::move(value));
    }
    cv_.notify_one();
  }

  T receive() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) throw ChannelClosed();
    T v = std::move(queue_.front());
    queue_.pop_front();
    return v;
  }

  void close() {
    {
      std::lock_guard lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> queue_;
  bool closed_ = false;
};

}  // namespace snnfuse
