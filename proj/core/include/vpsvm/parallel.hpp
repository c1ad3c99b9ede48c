#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vpsvm {

/// Number of workers to use when the caller passes 0.
[[nodiscard]] inline unsigned default_workers() noexcept {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1U : hw;
}

/**
 * Runs body(i) for every i in [0, count) on at most `workers` threads
 * (0 = all cores). Tasks are handed out dynamically; the first exception
 * thrown by any task is rethrown on the calling thread after all workers join.
 */
template <typename Body>
void parallel_for(std::size_t count, unsigned workers, Body &&body) {
    if (workers == 0) {
        workers = default_workers();
    }
    const std::size_t threads = std::min<std::size_t>(workers, count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }

    std::atomic<std::size_t> next{ 0 };
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run = [&]() {
        for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
            try {
                body(i);
            } catch (...) {
                const std::lock_guard lock{ failure_mutex };
                if (!failure) {
                    failure = std::current_exception();
                }
                next.store(count);
            }
        }
    };

    {
        std::vector<std::jthread> pool;
        pool.reserve(threads - 1);
        for (std::size_t t = 1; t < threads; ++t) {
            pool.emplace_back(run);
        }
        run();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

}  // namespace vpsvm
