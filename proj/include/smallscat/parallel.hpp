#pragma once

#include <cstddef>
#include <functional>

namespace smallscat {

// Global worker count for assembly loops. n <= 0 restores the hardware default.
void set_thread_count(int n) noexcept;
int thread_count() noexcept;

// Splits [0, n) into contiguous chunks, one per worker. The body must only
// write to disjoint state per index so results do not depend on the split.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t begin, std::size_t end)>& body);

}  // namespace smallscat
