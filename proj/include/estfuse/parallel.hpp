#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace estfuse {

// Replication loops run either as an OpenMP parallel-for or as the plain
// serial reference loop. Results are identical for any worker count:
// every replication owns a counter-based generator stream and writes into
// its own slot, and reductions are fixed-order pairwise sums.
enum class ExecutionPolicy { Serial, OpenMP };

struct EngineOptions {
    ExecutionPolicy policy = ExecutionPolicy::OpenMP;
    int workers = 0;            // 0 = runtime default
    std::uint64_t purpose = 0;  // stream_purpose tag for this pass
};

namespace detail {

// Runs body(i) for i in [0, count). Bodies write only to their own slots
// and must not throw. Dispatch never affects results, only wall time.
template <typename Body>
void parallel_for(std::int64_t count, const EngineOptions& opts, Body&& body) {
#ifdef _OPENMP
    if (opts.policy == ExecutionPolicy::OpenMP) {
        const int workers = opts.workers > 0 ? opts.workers : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(workers)
        for (std::int64_t i = 0; i < count; ++i) body(i);
        return;
    }
#endif
    for (std::int64_t i = 0; i < count; ++i) body(i);
}

} // namespace detail
} // namespace estfuse
