#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace listrecon {

/// Resolve a thread-count request: 0 means "auto" (LISTRECON_THREADS env var
/// if set to a positive integer, otherwise hardware concurrency).  The result
/// is always >= 1.
int resolve_threads(int requested);

/// Splits [0, n) into `workers` contiguous slices whose sizes differ by at
/// most one.  Returns the (begin, end) offsets; slices may be empty when
/// workers > n.
std::vector<std::pair<std::size_t, std::size_t>> split_range(std::size_t n,
                                                             int workers);

/// Runs body(worker_index, begin, end) on each contiguous slice of [0, n),
/// one slice per worker.  Worker 0 runs on the calling thread.  The partition
/// depends only on (n, workers), never on scheduling, so any reduction that
/// merges per-worker results in worker order is reproducible bit-for-bit for
/// a fixed worker count.
void parallel_slices(
    std::size_t n, int workers,
    const std::function<void(int, std::size_t, std::size_t)>& body);

}  // namespace listrecon
