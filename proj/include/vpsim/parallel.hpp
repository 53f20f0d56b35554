#pragma once

#include <atomic>
#include <cstdlib>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace vpsim {

// Worker count: explicit setting > VPSIM_THREADS env > hardware concurrency.
// Block boundaries in parallel_for_blocks are independent of the worker count,
// so any reduction that combines per-block results in block order is bit-stable
// no matter how many threads run.
inline int& thread_count_ref() {
    static int count = [] {
        if (const char* env = std::getenv("VPSIM_THREADS")) {
            int n = std::atoi(env);
            if (n > 0) return n;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? static_cast<int>(hw) : 1;
    }();
    return count;
}

inline int thread_count() { return thread_count_ref(); }
inline void set_thread_count(int n) { thread_count_ref() = n > 0 ? n : 1; }

// Runs fn(block_index, begin, end) over fixed-size blocks of [0, n).
// Workers pull blocks from a shared counter; exceptions are rethrown once.
template <class Fn>
void parallel_for_blocks(std::size_t n, std::size_t block_size, Fn&& fn) {
    if (n == 0) return;
    const std::size_t nblocks = (n + block_size - 1) / block_size;
    const int workers = std::min<std::size_t>(thread_count(), nblocks);
    if (workers <= 1) {
        for (std::size_t b = 0; b < nblocks; ++b)
            fn(b, b * block_size, std::min(n, (b + 1) * block_size));
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto work = [&] {
        for (;;) {
            std::size_t b = next.fetch_add(1);
            if (b >= nblocks || failed.load()) return;
            try {
                fn(b, b * block_size, std::min(n, (b + 1) * block_size));
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (int t = 1; t < workers; ++t) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();
    if (failed.load()) std::rethrow_exception(error);
}

}  // namespace vpsim
