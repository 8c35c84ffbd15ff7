#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace cart {

inline int resolve_threads(int requested) {
    if (requested > 0) {
        return requested;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs body(i) for i in [0, n). Results must be written to index-addressed
// storage so downstream reductions are ordered and independent of the thread
// count.
inline void parallel_for(int n, int threads, const std::function<void(int)>& body) {
    threads = resolve_threads(threads);
    if (threads <= 1 || n < 2 * threads) {
        for (int i = 0; i < n; ++i) {
            body(i);
        }
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    const int chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
        const int lo = t * chunk;
        const int hi = std::min(n, lo + chunk);
        if (lo >= hi) {
            break;
        }
        pool.emplace_back([lo, hi, &body] {
            for (int i = lo; i < hi; ++i) {
                body(i);
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
}

}  // namespace cart
