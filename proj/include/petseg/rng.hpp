#ifndef PETSEG_RNG_HPP
#define PETSEG_RNG_HPP

#include <cmath>
#include <cstdint>

namespace petseg {

// SplitMix64 generator. All randomized behaviour in the toolkit flows
// through this so that results are reproducible bit-for-bit across
// platforms; the standard <random> distributions are implementation
// defined and would break that.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Uniform integer in [0, n). Modulo bias is negligible for the n used
    // here (n << 2^64) and keeps the draw sequence easy to reason about.
    std::uint64_t next_below(std::uint64_t n) {
        return n == 0 ? 0 : next_u64() % n;
    }

    // Standard normal via Box-Muller; one cached value.
    double next_normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = next_double();
        double u2 = next_double();
        // avoid log(0)
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(theta);
        have_cached_ = true;
        return r * std::cos(theta);
    }

    // Derive an independent stream, e.g. one per case or per epoch.
    Rng fork(std::uint64_t stream) {
        Rng r(state_ ^ (0x632be59bd9b4e019ULL * (stream + 1)));
        r.next_u64();
        return r;
    }

    template <typename Vec>
    void shuffle(Vec& v) {
        const std::size_t n = v.size();
        if (n < 2) return;
        for (std::size_t i = n - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(next_below(i + 1));
            using std::swap;
            swap(v[i], v[j]);
        }
    }

private:
    std::uint64_t state_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

} // namespace petseg

#endif
