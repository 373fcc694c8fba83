#pragma once

// Deterministic random streams. Every stochastic component owns its own
// RngStream whose seed is derived from the root seed and a fixed index path,
// so results do not depend on evaluation order or platform.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>

namespace statesim {

// splitmix64 finalizer; good avalanche, used only for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives a stream seed from a root seed and an index path such as
// {run, state, action}. Distinct paths give independent-looking seeds.
inline std::uint64_t derive_stream_seed(std::uint64_t root,
                                        std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = splitmix64(root);
    for (std::uint64_t part : path) {
        h = splitmix64(h ^ (part + 0x9e3779b97f4a7c15ULL));
    }
    return h;
}

class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform_unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_unit(); }

    int uniform_int(int n) {
        if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
        int k = static_cast<int>(uniform_unit() * static_cast<double>(n));
        return k < n ? k : n - 1;
    }

    // Inverse-CDF draw from a categorical distribution. Uses an explicit
    // running sum rather than std::discrete_distribution so that draws are
    // identical across standard library implementations. Always returns an
    // index with positive probability.
    int sample_index(std::span<const double> probs) {
        if (probs.empty()) throw std::invalid_argument("sample_index: empty distribution");
        double u = uniform_unit();
        double acc = 0.0;
        int last_support = -1;
        for (std::size_t k = 0; k < probs.size(); ++k) {
            if (probs[k] > 0.0) {
                last_support = static_cast<int>(k);
                acc += probs[k];
                if (u < acc) return static_cast<int>(k);
            }
        }
        if (last_support < 0) throw std::invalid_argument("sample_index: no support");
        return last_support;  // u landed in the rounding gap past the last entry
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace statesim
