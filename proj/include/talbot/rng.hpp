#pragma once

#include <cstdint>
#include <random>

namespace talbot::rng {

// Finalizer of the splitmix64 generator. Bijective on 64-bit words.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stream splitting rule: the seed of stream k under master seed m is
// splitmix64(splitmix64(m) ^ splitmix64(k)). Streams are order-independent,
// so Monte Carlo trials can run on any thread and still reproduce.
inline std::uint64_t stream_seed(std::uint64_t master_seed, std::uint64_t stream_id) {
    return splitmix64(splitmix64(master_seed) ^ splitmix64(stream_id));
}

// Deterministic random stream. Uniform doubles are built from raw engine
// words instead of std::uniform_real_distribution so that sequences are
// identical across standard library implementations.
class Stream {
public:
    Stream(std::uint64_t master_seed, std::uint64_t stream_id)
        : engine_(stream_seed(master_seed, stream_id)) {}

    explicit Stream(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        // Rejection sampling over the largest multiple of n below 2^64.
        const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    // Standard normal via Box-Muller on deterministic uniforms.
    double normal() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return r * std::cos(6.283185307179586476925286766559 * u2);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace talbot::rng
