#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

namespace hyplab {

// Every data-parallel kernel takes an execution policy. The serial path is the
// reference implementation; the OpenMP path must produce bitwise-identical
// results because reductions are always performed serially over an indexed
// buffer.
enum class Exec { serial, parallel };

void set_thread_count(int n);
int thread_count();

namespace detail {
void parallel_for_impl(std::size_t n, void (*body)(std::size_t, void*), void* ctx);
}

template <class F>
void for_each_index(std::size_t n, F&& f, Exec exec = Exec::parallel) {
    if (exec == Exec::serial || n < 2) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    using Fn = std::remove_reference_t<F>;
    auto trampoline = [](std::size_t i, void* ctx) { (*static_cast<Fn*>(ctx))(i); };
    detail::parallel_for_impl(n, trampoline, const_cast<void*>(static_cast<const void*>(&f)));
}

template <class F>
std::vector<double> map_indices(std::size_t n, F&& f, Exec exec = Exec::parallel) {
    std::vector<double> out(n);
    for_each_index(n, [&](std::size_t i) { out[i] = f(i); }, exec);
    return out;
}

// Neumaier-compensated sum in index order.
inline double ordered_sum(std::span<const double> v) {
    double s = 0.0, c = 0.0;
    for (double x : v) {
        double t = s + x;
        if (std::abs(s) >= std::abs(x))
            c += (s - t) + x;
        else
            c += (x - t) + s;
        s = t;
    }
    return s + c;
}

struct MeanStat {
    double mean = 0.0;
    double stderr_ = 0.0;  // standard error of the mean
    double variance = 0.0;
};

inline MeanStat mean_stat(std::span<const double> v) {
    MeanStat r;
    if (v.empty()) return r;
    const double n = static_cast<double>(v.size());
    r.mean = ordered_sum(v) / n;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - r.mean) * (v[i] - r.mean);
    r.variance = v.size() > 1 ? ordered_sum(sq) / (n - 1.0) : 0.0;
    r.stderr_ = std::sqrt(r.variance / n);
    return r;
}

}  // namespace hyplab
