#include <benchmark/benchmark.h>

#include "hyplab/fuchsian.hpp"
#include "hyplab/propagator.hpp"
#include "hyplab/qe.hpp"
#include "hyplab/spectral_action.hpp"
#include "hyplab/trace.hpp"

using namespace hyplab;

namespace {

// Argument 0 selects the serial reference, 1 the OpenMP kernel.
Exec mode(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

const fuchsian::Lattice& octagon() {
    static const fuchsian::Lattice lat(fuchsian::load_group_spec(HYPLAB_DATA_DIR "/bolza.json"), 9.0);
    return lat;
}

void BM_sample_domain(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(fuchsian::sample_domain(octagon(), 2.45, 20000, 1, mode(state)).volume);
}

void BM_thin_part(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(fuchsian::thin_part_fraction(octagon(), 1.8, 2000, 1, 2.45, mode(state)).value);
}

void BM_intersection_volume(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(propagator::intersection_volume(4.0, 2.0, 200000, 1, mode(state)).volume);
}

void BM_time_avg_lower_bound(benchmark::State& state) {
    const spectral::SpectralInterval I{1.0, 2.0};
    const auto pb = spectral::verify_period_bound(I, 50, 64);
    const auto cc = spectral::chain_constants(pb, spectral::lipschitz_bound(spectral::chebyshev_grid(I, 33), 1.1, 20.0, 200));
    for (auto _ : state)
        benchmark::DoNotOptimize(spectral::time_avg_lower_bound(I, {50.0, 100.0}, cc, 64, mode(state)));
}

void BM_pretrace(benchmark::State& state) {
    static const auto cover = trace::cyclic_cover(fuchsian::load_group_spec(HYPLAB_DATA_DIR "/cyclic_L2.json"), 2);
    static const auto cyl = trace::synthesize_cylinder(cover);
    for (auto _ : state) benchmark::DoNotOptimize(trace::pretrace_check(cover, cyl, 1.0, 16.0, mode(state)).residual);
}

void BM_qe_variance(benchmark::State& state) {
    static const auto e = qe::random_flat_eigendata(24, {1.25, 4.25}, 1);
    propagator::Observable a;
    a.eval = [](const geom::Point& z) { return std::cos(6.0 * z.x) * z.y; };
    for (auto _ : state)
        benchmark::DoNotOptimize(qe::qe_variance(e, a, {1.25, 4.25}, {}, mode(state)).variance_sum);
}

}  // namespace

BENCHMARK(BM_sample_domain)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_thin_part)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_intersection_volume)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_time_avg_lower_bound)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_pretrace)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_qe_variance)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
