#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace qcl {

/// Worker count used by parallel_for; 0 selects the hardware concurrency.
void set_worker_count(unsigned workers) noexcept;
unsigned worker_count() noexcept;

/// Runs body(begin, end) over contiguous chunks of [0, n). Chunk boundaries
/// depend on the worker count, so bodies must write results by index and
/// leave reductions to the caller.
void parallel_chunks(std::size_t n,
                     const std::function<void(std::size_t, std::size_t)>& body);

template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  parallel_chunks(n, [&fn](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace qcl
