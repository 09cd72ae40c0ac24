// Copyright 2026 The netexp Authors.
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

#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace netexp {

// Number of worker threads to use when the caller passes 0.
inline unsigned default_threads() {
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Runs fn(block) for block in [0, num_blocks) on up to `threads` workers.
// Callers partition work into a fixed number of blocks that does not depend on
// the thread count and reduce per-block results in block order, which makes
// every aggregate independent of scheduling.
template <typename Fn>
void parallel_blocks(std::size_t num_blocks, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = default_threads();
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, num_blocks));
  if (threads <= 1) {
    for (std::size_t b = 0; b < num_blocks; ++b) fn(b);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      while (true) {
        std::size_t b = next.fetch_add(1);
        if (b >= num_blocks) return;
        try {
          fn(b);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(num_blocks);
          return;
        }
      }
    });
  }
  workers.clear();
  if (error) std::rethrow_exception(error);
}

// Block layout for `count` items in chunks of `block_size`.
struct BlockRange {
  std::size_t begin;
  std::size_t end;
};

inline std::size_t num_blocks_for(std::size_t count, std::size_t block_size) {
  return (count + block_size - 1) / block_size;
}

inline BlockRange block_range(std::size_t block, std::size_t count, std::size_t block_size) {
  std::size_t begin = block * block_size;
  return {begin, std::min(count, begin + block_size)};
}

}  // namespace netexp
