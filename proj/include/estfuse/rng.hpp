#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <stdexcept>

namespace estfuse {

// SplitMix64 output mixer (Steele, Lea & Flood 2014). The i-th draw of a
// stream is the pure function mix(key + (i+1)*GOLDEN_GAMMA), which makes
// every stream counter-based: draws can be produced in any order and on
// any thread with identical results.
inline std::uint64_t splitmix_mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Collapses an ordered tuple of identifiers (seed, domain, purpose,
// indices, ...) into a stream key. Order-sensitive by construction.
std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts);

// Inverse standard normal CDF, algorithm AS 241 (Wichura 1988, PPND16).
// Accurate to roughly 1e-15 for p in (0, 1).
inline double normal_inverse_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        if (p == 1.0) return std::numeric_limits<double>::infinity();
        throw std::invalid_argument("normal_inverse_cdf: p outside [0, 1]");
    }

    const double q = p - 0.5;
    if (std::fabs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        const double num =
            (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                  6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
              1.3314166789178437745e2) * r + 3.3871328727963666080e0);
        const double den =
            (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                  3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
              4.2313330701600911252e1) * r + 1.0);
        return q * num / den;
    }

    double r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        const double num =
            (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0);
        const double den =
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
        val = num / den;
    } else {
        r -= 5.0;
        const double num =
            (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0);
        const double den =
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
        val = num / den;
    }
    return (q < 0.0) ? -val : val;
}

// Stateful view over one counter-based stream.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    // i-th raw 64-bit value of the stream, independent of call history.
    std::uint64_t value_at(std::uint64_t i) const {
        return splitmix_mix(key_ + (i + 1) * 0x9E3779B97F4A7C15ULL);
    }

    std::uint64_t next_u64() { return value_at(counter_++); }

    // Uniform draw strictly inside (0, 1): ((x >> 11) + 0.5) * 2^-53.
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Standard normal via the inverse CDF; consumes exactly one uniform.
    double next_normal() { return normal_inverse_cdf(next_uniform()); }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

// Upper-gamma quantile of the chi-square distribution with one degree of
// freedom: the value c with P(X >= c) = gamma. gamma=0 yields +infinity,
// gamma=1 yields 0.
double chi_square1_upper_quantile(double gamma);

} // namespace estfuse
