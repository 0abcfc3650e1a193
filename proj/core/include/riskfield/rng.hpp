#pragma once

#include <cmath>
#include <cstdint>

namespace riskfield {

/// splitmix64 finalizer; used to derive independent substream seeds from
/// (seed, stream-index) pairs so parallel generation is order independent.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// xoshiro256++ with portable normal/binomial samplers. Standard-library
/// distributions are implementation defined, so everything that must be
/// reproducible goes through this class.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& w : state_) {
            s += 0x9e3779b97f4a7c15ULL;
            w = mix64(s);
        }
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0) state_[0] = 1;
    }

    /// Counter-based split: substream(seed, k) is independent of substream(seed, k').
    static Rng substream(std::uint64_t seed, std::uint64_t stream) {
        return Rng(mix64(seed ^ mix64(stream)));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in (0, 1), safe for log().
    double uniform_pos() {
        double u;
        do {
            u = uniform();
        } while (u <= 0.0);
        return u;
    }

    /// Standard normal via Marsaglia polar; second value cached.
    double normal() {
        if (has_cache_) {
            has_cache_ = false;
            return cache_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        cache_ = v * f;
        has_cache_ = true;
        return u * f;
    }

    /// Exact Binomial(n, p) draw. Inversion from zero for small np, inversion
    /// outward from the mode for large np; p > 1/2 handled by symmetry.
    std::int64_t binomial(std::int64_t n, double p) {
        if (n <= 0 || p <= 0.0) return 0;
        if (p >= 1.0) return n;
        if (p > 0.5) return n - binomial(n, 1.0 - p);
        const double np = static_cast<double>(n) * p;
        return np < 30.0 ? binomial_inversion(n, p) : binomial_from_mode(n, p);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::int64_t binomial_inversion(std::int64_t n, double p) {
        const double u = uniform();
        const double r = p / (1.0 - p);
        double pmf = std::pow(1.0 - p, static_cast<double>(n));
        double cdf = pmf;
        std::int64_t k = 0;
        while (u > cdf && k < n) {
            pmf *= r * static_cast<double>(n - k) / static_cast<double>(k + 1);
            cdf += pmf;
            ++k;
        }
        return k;
    }

    std::int64_t binomial_from_mode(std::int64_t n, double p) {
        // Scan outward from the mode so the pmf never underflows and the
        // expected number of steps is O(sqrt(n p (1-p))).
        const auto mode = static_cast<std::int64_t>(
            std::floor(static_cast<double>(n + 1) * p));
        const double logpmf_mode = log_binom_pmf(n, mode, p);
        const double u = uniform();
        const double r = p / (1.0 - p);

        double acc = std::exp(logpmf_mode);
        if (u <= acc) return mode;
        double pmf_lo = std::exp(logpmf_mode);
        double pmf_hi = pmf_lo;
        std::int64_t lo = mode, hi = mode;
        while (lo > 0 || hi < n) {
            if (hi < n) {
                pmf_hi *= r * static_cast<double>(n - hi) / static_cast<double>(hi + 1);
                ++hi;
                acc += pmf_hi;
                if (u <= acc) return hi;
            }
            if (lo > 0) {
                pmf_lo *= static_cast<double>(lo) / (r * static_cast<double>(n - lo + 1));
                --lo;
                acc += pmf_lo;
                if (u <= acc) return lo;
            }
        }
        return mode;
    }

    static double log_binom_pmf(std::int64_t n, std::int64_t k, double p) {
        const double nd = static_cast<double>(n);
        const double kd = static_cast<double>(k);
        return std::lgamma(nd + 1.0) - std::lgamma(kd + 1.0) - std::lgamma(nd - kd + 1.0) +
               kd * std::log(p) + (nd - kd) * std::log1p(-p);
    }

    std::uint64_t state_[4] = {};
    double cache_ = 0.0;
    bool has_cache_ = false;
};

} // namespace riskfield
