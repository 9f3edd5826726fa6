#pragma once

#include <cstdint>

namespace hyplab {

// Counter-based random stream. Sample i of a Monte Carlo loop owns the stream
// (seed, i), so results do not depend on how the loop is scheduled.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

    std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ULL * ++counter_); }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1].
    double uniform_pos() { return 1.0 - uniform(); }

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Derive an independent seed for a sub-computation (e.g. the second of two
// estimators that must not share samples).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    return CounterRng::mix(seed * 0xd1b54a32d192ed03ULL + CounterRng::mix(tag + 1));
}

}  // namespace hyplab
