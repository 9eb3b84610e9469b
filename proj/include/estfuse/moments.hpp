#pragma once

#include <vector>

#include "estfuse/combiner.hpp"

namespace estfuse {

// Per-sample influence values, already centered for their estimator.
struct InfluenceSample {
    double phi_u = 0.0;
    double phi_b = 0.0;
};

struct InfluencePanel {
    std::vector<InfluenceSample> samples;

    std::size_t n() const { return samples.size(); }
};

// Plug-in moment estimates from centered influence values:
// var_hat(phi) = n^-1 sum(phi^2), then sigma^2_hat = n^-1 var_hat.
// Divisor is n, not n-1, and the inputs are not re-centered.
MomentEstimates estimate_moments(const InfluencePanel& panel);

// Influence value for an IPW average-treatment-effect estimator with
// empirical arm means: (y - mu(t)) (t/e - (1-t)/(1-e)) + (mu1 - mu0) - theta.
double ipw_influence(double y, bool t, double e_hat, double mu1_hat,
                     double mu0_hat, double theta_hat);

} // namespace estfuse
