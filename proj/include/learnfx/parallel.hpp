#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

// Minimal fork-join helper. Work items write into preallocated slots indexed
// by task id, so the reduction order never depends on the thread count.

namespace learnfx {

/// Worker count: LEARNFX_THREADS if set (clamped to >= 1), else hardware. A
/// run with N threads must produce byte-identical output to a run with 1.
inline unsigned default_thread_count() {
    if (const char* env = std::getenv("LEARNFX_THREADS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
        return 1;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

/// Runs fn(i) for i in [0, count) across up to `threads` workers. Rethrows
/// the first exception observed; remaining items are still drained.
template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn, unsigned threads = default_thread_count()) {
    if (count == 0) return;
    if (threads <= 1 || count == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    if (threads > count) threads = static_cast<unsigned>(count);

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::mutex error_mutex;

    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) return;
            if (failed.load(std::memory_order_relaxed)) continue;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace learnfx
