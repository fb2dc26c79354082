#ifndef VINEDIST_PARALLEL_HPP
#define VINEDIST_PARALLEL_HPP

/** @file
 * Index-parallel loops.  Callers write results by index, so output never
 * depends on the number of threads.
 */

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vinedist {

namespace detail {
inline int& thread_setting()
{
    static int n = [] {
        if (const char* env = std::getenv("VINEDIST_THREADS")) {
            const int v = std::atoi(env);
            if (v > 0) return v;
        }
        return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
    }();
    return n;
}

inline thread_local bool in_parallel_region = false;
}  // namespace detail

/// Worker cap; defaults to VINEDIST_THREADS or the hardware concurrency.
inline int num_threads() { return detail::thread_setting(); }
inline void set_num_threads(int n) { detail::thread_setting() = std::max(1, n); }

/// Runs f(i) for i in [0, n).  Nested calls run serially.  The first
/// exception (lowest index) is rethrown after all workers finish.
template <class F>
void parallel_for(int n, F&& f)
{
    const int workers = std::min(num_threads(), n);
    if (workers <= 1 || detail::in_parallel_region) {
        for (int i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex mu;
    int err_index = n;
    std::exception_ptr err;
    auto body = [&] {
        detail::in_parallel_region = true;
        for (int i; (i = next.fetch_add(1)) < n;) {
            try {
                f(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(mu);
                if (i < err_index) {
                    err_index = i;
                    err = std::current_exception();
                }
            }
        }
        detail::in_parallel_region = false;
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

}  // namespace vinedist

#endif
