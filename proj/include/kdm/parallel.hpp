#pragma once

#include <kdm/common.hpp>

#include <functional>

namespace kdm {

/// Worker count: the KDM_THREADS environment variable if set and positive,
/// otherwise std::thread::hardware_concurrency().
unsigned thread_count();

/// Runs body(i) for i in [0, count) over contiguous chunks, one per worker.
/// Each index is visited exactly once; callers write results by index, so the
/// outcome does not depend on the worker count.
void parallel_for(Index count, const std::function<void(Index)>& body);

/// splitmix64 finalizer; derives independent stream seeds from (seed ^ index).
std::uint64_t mix_seed(std::uint64_t seed);
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index);

}  // namespace kdm
