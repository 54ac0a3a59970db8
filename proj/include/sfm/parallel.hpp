#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace sfm {

/// Process-wide worker count used by the parallel loops (>= 1).
std::size_t worker_count() noexcept;
void set_worker_count(std::size_t n) noexcept;

/// Runs body(chunk, begin, end) over [0, n) split into `chunks` fixed,
/// contiguous ranges. The partition depends only on (n, chunks), never on the
/// worker count, so per-chunk results reduced in chunk order are bitwise
/// reproducible regardless of threading.
template <class Body>
void parallel_chunks(std::size_t n, std::size_t chunks, Body&& body) {
    if (n == 0) return;
    chunks = std::clamp<std::size_t>(chunks, 1, n);
    auto range = [n, chunks](std::size_t c) {
        return std::pair{n * c / chunks, n * (c + 1) / chunks};
    };
    std::size_t workers = std::min(worker_count(), chunks);
    if (workers <= 1) {
        for (std::size_t c = 0; c < chunks; ++c) {
            auto [b, e] = range(c);
            body(c, b, e);
        }
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t c = w; c < chunks; c += workers) {
                try {
                    auto [b, e] = range(c);
                    body(c, b, e);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

/// Element-wise parallel loop; fn(i) must only write to slot i of its outputs.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    parallel_chunks(n, std::max<std::size_t>(1, worker_count() * 4), [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) fn(i);
    });
}

}  // namespace sfm
