#include "hyplab/parallel.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>

namespace hyplab {

namespace {
std::atomic<int> configured_threads{0};
}

void set_thread_count(int n) { configured_threads.store(std::max(0, n)); }

int thread_count() {
    const int n = configured_threads.load();
    if (n > 0) return n;
    if (const char* env = std::getenv("HYPLAB_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return omp_get_max_threads();
}

namespace detail {

void parallel_for_impl(std::size_t n, void (*body)(std::size_t, void*), void* ctx) {
    const auto count = static_cast<long long>(n);
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
#pragma omp parallel for schedule(dynamic, 16) num_threads(thread_count())
    for (long long i = 0; i < count; ++i) {
        if (failed.load(std::memory_order_relaxed)) continue;
        try {
            body(static_cast<std::size_t>(i), ctx);
        } catch (...) {
#pragma omp critical(hyplab_failure)
            if (!failure) failure = std::current_exception();
            failed.store(true);
        }
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace detail
}  // namespace hyplab
