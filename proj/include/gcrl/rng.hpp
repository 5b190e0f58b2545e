#pragma once

#include <cstdint>
#include <random>

namespace gcrl {

// splitmix64 step; used to scramble seeds and derive independent streams.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Deterministic random stream. All randomness in the library flows through
/// this class so that a run is reproducible from its seed alone.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        eng_.seed(splitmix64(s));
    }

    std::uint64_t next_u64() { return eng_(); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Lemire multiply-shift; n must be > 0.
    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 eng_;
};

/// Derive an independent stream from a root seed and a path of indices,
/// e.g. derive_rng(seed, {episode, step}). Same inputs give the same stream.
inline Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = seed;
    std::uint64_t mixed = splitmix64(s);
    for (std::uint64_t p : path) {
        s = mixed ^ (p + 0x9e3779b97f4a7c15ULL);
        mixed = splitmix64(s);
    }
    return Rng(mixed);
}

} // namespace gcrl
