#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <utility>

namespace srbm {

struct RngSeed {
    std::uint64_t value = 0;
};

/// SplitMix64 finalizer, used to derive independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/*!
 * \brief Seeded 64-bit random stream.
 *
 * Wraps std::mt19937_64 and converts draws to doubles with an explicit 53-bit
 * mapping, so a sequence is bit-identical for a given seed regardless of the
 * standard library's distribution implementations.
 */
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(RngSeed seed) : engine_(mix_seed(seed.value)) {}
    explicit Rng(std::uint64_t seed) : Rng(RngSeed{seed}) {}

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }

    result_type operator()() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via Box-Muller on two uniform() draws.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) {
            u1 = uniform();
        }
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    /// Uniform integer in [0, n) by rejection, independent of std distributions.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = max() - max() % n;
        std::uint64_t r = engine_();
        while (r >= limit) {
            r = engine_();
        }
        return r % n;
    }

    /// A new stream whose seed is drawn from this one; used to give each chain its own stream.
    Rng split() { return Rng(RngSeed{engine_()}); }

private:
    std::mt19937_64 engine_;
};

/// Fisher-Yates shuffle driven by Rng::below so the permutation is portable.
template <typename Container>
void shuffle(Container& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        using std::swap;
        swap(items[i - 1], items[j]);
    }
}

} // namespace srbm
