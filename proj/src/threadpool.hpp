#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace selfsynth {

// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
// processed exactly once; callers keep determinism by writing into
// per-index slots and reducing in index order afterwards. The first
// exception wins and is rethrown on the calling thread.
template <class Fn>
void parallel_for(size_t n, int threads, Fn&& fn) {
    if (n == 0) return;
    const size_t workers = std::min<size_t>(threads < 1 ? 1 : threads, n);
    if (workers == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::atomic_flag error_claimed = ATOMIC_FLAG_INIT;

    auto body = [&] {
        while (!failed.load(std::memory_order_relaxed)) {
            const size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                if (!error_claimed.test_and_set()) error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (size_t w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace selfsynth
