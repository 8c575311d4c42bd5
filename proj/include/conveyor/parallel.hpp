#pragma once

#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace conveyor {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Work items must be
/// independent; callers merge results in index order to stay deterministic.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    if (workers <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
    std::vector<std::thread> threads;
    threads.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        threads.emplace_back([&, w] {
            for (std::size_t i = w; i < n; i += count) fn(i);
        });
    }
    for (std::thread& t : threads) t.join();
}

}  // namespace conveyor
