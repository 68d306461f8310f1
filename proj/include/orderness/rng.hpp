// Seeded randomness with deterministic substreams.
//
// All random draws in the library go through Rng, which pairs std::mt19937_64
// (whose output sequence is pinned by the standard) with hand-rolled
// distributions, so identical seeds give identical draws on any platform.
// Substreams are derived by hashing a (master seed, tag path) with the
// splitmix64 finalizer; adding new tags never perturbs existing streams.
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace orderness {

inline uint64_t splitmix64_mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

// Hash-combines a master seed with a path of integer tags.
inline uint64_t derive_seed(uint64_t master, std::initializer_list<uint64_t> path) {
    uint64_t h = splitmix64_mix(master + 0x9E3779B97F4A7C15ull);
    for (uint64_t t : path) h = splitmix64_mix(h ^ splitmix64_mix(t + 0x9E3779B97F4A7C15ull));
    return h;
}

// Stream-tag constants; values are arbitrary but frozen.
namespace stream {
inline constexpr uint64_t kScale = 0x5343414C45ull;      // per-scale metric substream
inline constexpr uint64_t kChannel = 0x4348414Eull;      // per-channel metric substream
inline constexpr uint64_t kImage = 0x494D4147ull;        // per-image corruption substream
inline constexpr uint64_t kClass = 0x434C4153ull;        // per-class subset substream
inline constexpr uint64_t kOrder = 0x4F524452ull;        // output-order shuffles
inline constexpr uint64_t kLayer = 0x4C415952ull;        // per-layer weight init
inline constexpr uint64_t kEpoch = 0x45504F43ull;        // per-epoch batch shuffle
inline constexpr uint64_t kProbe = 0x50524F42ull;        // feature-map probe subset
inline constexpr uint64_t kFmSo = 0x464D534Full;         // feature-map orderness draws
inline constexpr uint64_t kKernelSo = 0x4B534Full;       // sampled kernel orderness draws
inline constexpr uint64_t kTrial = 0x5452494Cull;        // per-trial experiment substream
inline constexpr uint64_t kSplit = 0x53504C54ull;        // train/val split substream
inline constexpr uint64_t kSwap = 0x53574150ull;         // block-swap substream
inline constexpr uint64_t kFixture = 0x46495854ull;      // synthetic fixture generation
} // namespace stream

class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Unbiased integer in [0, bound); Lemire's multiply-with-rejection.
    uint64_t below(uint64_t bound) {
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
        auto lo = static_cast<uint64_t>(m);
        if (lo < bound) {
            uint64_t threshold = (-bound) % bound;
            while (lo < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * bound;
                lo = static_cast<uint64_t>(m);
            }
        }
        return static_cast<uint64_t>(m >> 64);
    }

    size_t index(size_t n) { return static_cast<size_t>(below(n)); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Marsaglia polar method; the spare deviate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double scale = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * scale;
        has_spare_ = true;
        return u * scale;
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// 0..n-1 in a seeded random order.
inline std::vector<size_t> random_permutation(size_t n, uint64_t seed) {
    std::vector<size_t> p(n);
    for (size_t i = 0; i < n; ++i) p[i] = i;
    Rng rng(seed);
    rng.shuffle(p);
    return p;
}

} // namespace orderness
