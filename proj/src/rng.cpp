#include "estfuse/rng.hpp"

namespace estfuse {

std::uint64_t stream_key(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t key = 0x6A0, i = 1;
    for (std::uint64_t p : parts) {
        key = splitmix_mix(key + p + i * 0x9E3779B97F4A7C15ULL);
        ++i;
    }
    return key;
}

double chi_square1_upper_quantile(double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0)) {
        throw std::invalid_argument("chi_square1_upper_quantile: gamma outside [0, 1]");
    }
    if (gamma == 0.0) return std::numeric_limits<double>::infinity();
    if (gamma == 1.0) return 0.0;
    // X = Z^2 for standard normal Z, so the upper quantile is the squared
    // normal quantile at 1 - gamma/2.
    const double z = normal_inverse_cdf(1.0 - gamma / 2.0);
    return z * z;
}

} // namespace estfuse
