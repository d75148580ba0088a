#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bdqcd {

// splitmix64 step; used both as a stand-alone mixer and to expand seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic combiner for deriving sub-stream seeds, e.g.
// mix_seed(master, trial) -> trial seed, mix_seed(trial_seed, tag) -> stream seed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2));
    std::uint64_t m = splitmix64(s);
    s ^= b + 0x632be59bd9b4e019ULL;
    return m ^ splitmix64(s);
}

// Stream tags so independent random uses never share a sequence.
namespace stream_tag {
inline constexpr std::uint64_t observation = 0x0b5e9a7e;
inline constexpr std::uint64_t tie_break = 0x71eb9ea6;
inline constexpr std::uint64_t fake_observation = 0xfa6e0b53;
}  // namespace stream_tag

// Seeded random stream with samplers that are fully specified here
// (std::normal_distribution etc. are implementation-defined, so we
// do not use them; reruns must be bit-for-bit reproducible).
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0,1) with 53 random bits.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Marsaglia's polar method (one spare cached).
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
        const double r = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * r;
        has_spare_ = true;
        return u * r;
    }

    double normal(double mean, double variance) {
        return mean + std::sqrt(variance) * normal();
    }

    double exponential(double rate) {
        // 1 - uniform() is in (0, 1], so the log is finite.
        return -std::log(1.0 - uniform()) / rate;
    }

    double bernoulli(double p) { return uniform() < p ? 1.0 : 0.0; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace bdqcd
