#include "estfuse/moments.hpp"

#include <cmath>
#include <stdexcept>

#include "estfuse/errors.hpp"
#include "estfuse/numerics.hpp"

namespace estfuse {

MomentEstimates estimate_moments(const InfluencePanel& panel) {
    const std::size_t n = panel.n();
    if (n < 2) {
        throw std::invalid_argument("estimate_moments requires at least 2 samples");
    }
    for (const InfluenceSample& s : panel.samples) {
        if (!std::isfinite(s.phi_u) || !std::isfinite(s.phi_b)) {
            throw std::invalid_argument("influence values must be finite");
        }
    }

    const InfluenceSample* s = panel.samples.data();
    const double inv_n = 1.0 / static_cast<double>(n);
    MomentEstimates m;
    m.var_u = pairwise_transform_sum(n, [s](std::size_t i) { return s[i].phi_u * s[i].phi_u; }) *
              inv_n * inv_n;
    m.var_b = pairwise_transform_sum(n, [s](std::size_t i) { return s[i].phi_b * s[i].phi_b; }) *
              inv_n * inv_n;
    m.cov_bu = pairwise_transform_sum(n, [s](std::size_t i) { return s[i].phi_u * s[i].phi_b; }) *
               inv_n * inv_n;

    if (m.var_u <= 0.0 || m.diff_variance() <= 1e-30) {
        throw degenerate_input_error("panel yields zero variance for theta_u - theta_b");
    }
    return m;
}

double ipw_influence(double y, bool t, double e_hat, double mu1_hat,
                     double mu0_hat, double theta_hat) {
    if (!(e_hat > 0.0 && e_hat < 1.0)) {
        throw positivity_error("treatment probability must lie strictly in (0, 1)");
    }
    const double weight = t ? 1.0 / e_hat : -1.0 / (1.0 - e_hat);
    const double residual = y - (t ? mu1_hat : mu0_hat);
    return residual * weight + (mu1_hat - mu0_hat) - theta_hat;
}

} // namespace estfuse
