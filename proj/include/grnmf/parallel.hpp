#pragma once

#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace grnmf {

/// Runs fn(i) for i in [0, n) on up to `jobs` worker threads. Each index is
/// processed exactly once; the first exception is rethrown after all
/// workers finish.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic_flag error_set = ATOMIC_FLAG_INIT;
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                fn(i);
            } catch (...) {
                if (!error_set.test_and_set()) error = std::current_exception();
            }
        }
    };
    std::vector<std::jthread> pool;
    const std::size_t count = std::min<std::size_t>(jobs, n);
    for (std::size_t t = 0; t < count; ++t) pool.emplace_back(worker);
    pool.clear();
    if (error) std::rethrow_exception(error);
}

/// Logical core count, at least one.
inline unsigned default_jobs() noexcept {
    const unsigned n = std::thread::hardware_concurrency();
    return n ? n : 1;
}

} // namespace grnmf
