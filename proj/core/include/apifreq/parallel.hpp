#pragma once

#include <cstddef>
#include <functional>

namespace apifreq {

/// Global cap on worker threads (CLI --threads). 0 restores the default,
/// std::thread::hardware_concurrency().
void set_max_threads(std::size_t n) noexcept;
std::size_t max_threads() noexcept;

/// Resolves a requested worker count: 0 means "use max_threads()".
std::size_t resolve_workers(std::size_t requested) noexcept;

/// Runs body(i) for every i in [0, count) on up to `workers` threads.
/// Work is claimed dynamically, so callers must write results by index.
/// If any invocation throws, all remaining indices still run and the
/// exception from the lowest failing index is rethrown.
void parallel_for(std::size_t count, std::size_t workers,
                  const std::function<void(std::size_t)>& body);

}  // namespace apifreq
