#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace vigil {

// Deterministic PRNG used everywhere a seed appears in the pipeline.
//
// std::mt19937 plus the standard <random> distributions would not give a
// portable bit-exact stream (distribution algorithms are implementation
// defined), and reproducibility down to the last bit is a hard contract
// here: the same seed must produce the same files on any build. So the
// generator (xoshiro256**), the seeding (splitmix64) and the distribution
// transforms are all spelled out in this header.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    // Derives an independent stream from a master seed and a path of ids,
    // e.g. derive(master, {subject, shift, checkup, stream_label2("sim")}).
    // Streams with different paths are uncorrelated for practical purposes.
    static Rng derive(uint64_t master, std::initializer_list<uint64_t> path) {
        uint64_t h = master;
        for (uint64_t id : path) {
            uint64_t x = h ^ (id + 0x9e3779b97f4a7c15ull);
            h = splitmix64(x);
        }
        return Rng(h);
    }

    // Small FNV-1a so call sites can label derivation paths with strings.
    static constexpr uint64_t label(std::string_view s) {
        uint64_t h = 0xcbf29ce484222325ull;
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ull;
        }
        return h;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
    uint64_t uniform_int(uint64_t n) {
        if (n <= 1) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do { v = next_u64(); } while (v >= limit);
        return v % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller, cosine branch only. Two u64 draws per call, no caching,
    // so the draw count per call is fixed and streams stay reproducible.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mu, double sd) { return mu + sd * normal(); }

    double exponential(double rate) {
        double u = uniform();
        if (u <= 0.0) u = 0x1.0p-53;
        return -std::log(u) / rate;
    }

    // Knuth's product method; fine for the small means used here.
    int poisson(double mean) {
        if (mean <= 0.0) return 0;
        const double limit = std::exp(-mean);
        double prod = 1.0;
        int k = -1;
        do {
            ++k;
            prod *= uniform();
        } while (prod > limit);
        return k;
    }

    // Fisher-Yates prefix shuffle: after the call, indices[0..k) is a
    // uniformly chosen k-subset of the input in random order.
    template <typename T>
    void partial_shuffle(T* data, size_t n, size_t k) {
        if (k > n) k = n;
        for (size_t i = 0; i < k; ++i) {
            size_t j = i + static_cast<size_t>(uniform_int(n - i));
            std::swap(data[i], data[j]);
        }
    }

private:
    static constexpr uint64_t rotl(uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    static uint64_t splitmix64(uint64_t& x) {
        uint64_t z = (x += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    uint64_t state_[4];
};

} // namespace vigil
