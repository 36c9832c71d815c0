#ifndef PCMPC_RNG_HPP
#define PCMPC_RNG_HPP

#include <cstdint>
#include <random>

#include "pcmpc/measures.hpp"
#include "pcmpc/stats_util.hpp"

namespace pcmpc {

/// Counter-based random streams: every draw is keyed by
/// (seed, path, step, germ index), so ensembles are a pure function of the
/// key material and independent of worker count or evaluation order.
/// Step -1 addresses initial-condition germs.

struct SplitMix64 {
    using result_type = std::uint64_t;
    std::uint64_t state;

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~std::uint64_t{0}; }

    result_type operator()() {
        std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
};

inline std::uint64_t mix_key(std::uint64_t seed, std::uint64_t path, std::int64_t step,
                             std::uint64_t germ_index) {
    SplitMix64 h{seed};
    std::uint64_t k = h();
    h.state = k ^ (path * 0x2545f4914f6cdd1dULL);
    k = h();
    h.state = k ^ (static_cast<std::uint64_t>(step) * 0x9e3779b97f4a7c15ULL);
    k = h();
    h.state = k ^ (germ_index * 0xd6e8feb86659fd93ULL);
    return h();
}

inline double uniform01_from_bits(std::uint64_t bits) {
    // 53-bit mantissa mapped into the open interval (0, 1).
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

/// One draw from a standardized germ distribution. Each key owns a private
/// bit stream, so variable-consumption samplers (gamma rejection) stay
/// deterministic per key.
inline double draw_germ(const MeasureSpec& germ, std::uint64_t seed, std::uint64_t path,
                        std::int64_t step, std::uint64_t germ_index) {
    const std::uint64_t key = mix_key(seed, path, step, germ_index);
    SplitMix64 rng{key};
    switch (germ.family()) {
        case MeasureFamily::Dirac:
            return germ.params()[0];
        case MeasureFamily::Gaussian:
            return germ.params()[0] +
                   germ.params()[1] * normal_quantile(uniform01_from_bits(rng()));
        case MeasureFamily::Uniform:
            return germ.params()[0] +
                   (germ.params()[1] - germ.params()[0]) * uniform01_from_bits(rng());
        case MeasureFamily::Beta: {
            std::gamma_distribution<double> ga(germ.params()[0], 1.0);
            std::gamma_distribution<double> gb(germ.params()[1], 1.0);
            const double x = ga(rng);
            const double y = gb(rng);
            return x / (x + y);
        }
        case MeasureFamily::Gamma: {
            std::gamma_distribution<double> g(germ.params()[0], germ.params()[1]);
            return g(rng);
        }
    }
    return 0.0;
}

}  // namespace pcmpc

#endif  // PCMPC_RNG_HPP
