#include "fkpf/parallel.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace fkpf {

void Accumulator::push(cplx x, bool survived) {
    ++n;
    if (survived) ++survivors;
    const cplx d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += (std::conj(d) * (x - mean)).real();
}

void Accumulator::merge(const Accumulator& o) {
    if (o.n == 0) return;
    if (n == 0) {
        *this = o;
        return;
    }
    const double na = static_cast<double>(n), nb = static_cast<double>(o.n);
    const cplx d = o.mean - mean;
    const double tot = na + nb;
    mean += d * (nb / tot);
    m2 += o.m2 + std::norm(d) * na * nb / tot;
    n += o.n;
    survivors += o.survivors;
}

double Accumulator::stderr_of_mean() const {
    if (n < 2) return 0.0;
    return std::sqrt(variance() / static_cast<double>(n));
}

unsigned resolve_workers(unsigned requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("FKPF_WORKERS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && *end == '\0' && v > 0 && v <= 4096) return static_cast<unsigned>(v);
        throw InvalidArgument(std::string("FKPF_WORKERS must be a positive integer, got '") + env + "'");
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? hw : 1;
}

namespace {

void run_pool(std::size_t tasks, unsigned workers, const std::function<void(std::size_t)>& task) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(tasks, 1))));
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto loop = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks) return;
            try {
                task(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
                next.store(tasks);
                return;
            }
        }
    };
    if (workers == 1) {
        loop();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(loop);
        for (auto& th : pool) th.join();
    }
    if (err) std::rethrow_exception(err);
}

}  // namespace

Accumulator accumulate_blocks(std::size_t count, std::size_t block, unsigned workers,
                              const std::function<void(std::size_t, std::size_t, Accumulator&)>& body) {
    require(block > 0, "block size must be positive");
    const std::size_t nblocks = (count + block - 1) / block;
    std::vector<Accumulator> parts(nblocks);
    run_pool(nblocks, resolve_workers(workers), [&](std::size_t b) {
        const std::size_t lo = b * block;
        const std::size_t hi = std::min(count, lo + block);
        body(lo, hi, parts[b]);
    });
    Accumulator total;
    for (const auto& p : parts) total.merge(p);
    return total;
}

void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& body) {
    run_pool(count, resolve_workers(workers), body);
}

}  // namespace fkpf
