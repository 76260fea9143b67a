#pragma once

#include <cstddef>
#include <functional>

#include "fkpf/common.hpp"

namespace fkpf {

// Streaming complex mean / variance (Welford), mergeable (Chan et al.).
struct Accumulator {
    std::size_t n = 0;
    cplx mean = 0.0;
    double m2 = 0.0;  // sum |x - mean|^2
    std::size_t survivors = 0;

    void push(cplx x, bool survived = true);
    void merge(const Accumulator& o);
    double variance() const { return n > 1 ? m2 / static_cast<double>(n - 1) : 0.0; }
    double stderr_of_mean() const;
};

// Worker count: explicit value if > 0, else FKPF_WORKERS, else hardware concurrency.
unsigned resolve_workers(unsigned requested = 0);

// Splits [0, count) into fixed blocks, runs body(begin, end, acc) on a pool and
// merges block results in block order, so the result does not depend on the
// number of workers or on scheduling.
Accumulator accumulate_blocks(std::size_t count, std::size_t block, unsigned workers,
                              const std::function<void(std::size_t, std::size_t, Accumulator&)>& body);

// Runs body(i) for i in [0, count) on a pool (no reduction).
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& body);

}  // namespace fkpf
