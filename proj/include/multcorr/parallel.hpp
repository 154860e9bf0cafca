#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace multcorr {

// Fixed chunk count used by the deterministic reductions. Results are
// reduced in chunk order, so the thread count never changes the answer.
inline constexpr size_t kReductionChunks = 64;

template <class Fn>
void for_each_chunk(size_t n_chunks, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, unsigned(n_chunks)));
    if (threads == 1) {
        for (size_t c = 0; c < n_chunks; ++c) fn(c);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (size_t c; (c = next.fetch_add(1)) < n_chunks;) {
                try {
                    fn(c);
                } catch (...) {
                    std::lock_guard lk(err_mu);
                    if (!err) err = std::current_exception();
                    next = n_chunks;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace multcorr
