#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace lsf {

inline unsigned worker_count() {
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 2 : hw;
}

/// Runs fn(begin, end) over [0, n) in contiguous chunks. Callers own all
/// determinism concerns (results must not depend on the chunking).
template <typename Fn>
inline void parallel_for(std::size_t n, Fn&& fn, unsigned threads = 0) {
    if (threads == 0) threads = worker_count();
    if (n == 0) return;
    threads = std::min<std::size_t>(threads, n);
    if (threads <= 1) {
        fn(std::size_t(0), n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        std::size_t b = t * chunk;
        std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& th : pool) th.join();
}

} // namespace lsf
