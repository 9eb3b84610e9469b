#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "estfuse/combiner.hpp"

namespace estfuse {

struct GaussianScenario;  // simgauss.hpp

struct BaselineConfig {
    bool shrinkage_clip = true;
    double anchored_lambda1 = 0.5;
    double cheng_beta = 0.5;
    double hypothesis_gamma = 0.05;  // fixed-level variant
    std::vector<double> test_gamma_grid;          // defaults to 0:0.05:1
    std::vector<double> test_mu_grid;             // defaults to the scenario mu grid
    std::pair<std::int64_t, std::int64_t> test_pool_weights = {1, 1};

    void validate() const;
    static std::vector<double> default_gamma_grid();
};

// Bias-magnitude -> significance-level lookup built by simulation.
class CutoffTable {
public:
    CutoffTable() = default;
    CutoffTable(std::string scenario_id, std::vector<std::pair<double, double>> entries);

    // Nearest mu key wins; ties and out-of-range values resolve toward the
    // smaller key / clamp to the range.
    double lookup(double bias_magnitude) const;

    bool empty() const { return entries_.empty(); }
    const std::string& scenario_id() const { return scenario_id_; }
    const std::vector<std::pair<double, double>>& entries() const { return entries_; }

private:
    std::string scenario_id_;
    std::vector<std::pair<double, double>> entries_;  // sorted by mu key
};

// lambda = (var_u - cov_bu) / (theta_u - theta_b)^2, optionally clipped
// to [0, 1]. Unclipped with a zero difference is a degenerate input; the
// clipped variant maps the raw +-infinity to 1 (0 for negative numerators).
CombinedEstimate shrinkage(const EstimatorDraw& d, bool clip);

// Chi-square test on T = (theta_u - theta_b)^2 / var(theta_u - theta_b):
// reject -> theta_u; accept -> pooled average weighted by pool sizes.
CombinedEstimate hypothesis_test_combine(const EstimatorDraw& d, double gamma,
                                         std::pair<std::int64_t, std::int64_t> pool_weights = {1, 1});

// Simulates the test at every gamma on the grid for each mu key and keeps
// the MSE-minimizing gamma (ties toward the smaller gamma).
CutoffTable build_cutoff_table(const GaussianScenario& scenario, const BaselineConfig& cfg,
                               std::int64_t reps, std::uint64_t seed);

// Estimates the bias as |theta_u - theta_b| and applies the test at the
// looked-up significance level.
CombinedEstimate adaptive_hypothesis_test(const EstimatorDraw& d, const CutoffTable& table,
                                          std::pair<std::int64_t, std::int64_t> pool_weights = {1, 1});

// Soft-thresholded bias correction followed by inverse-variance weighting;
// the threshold is lambda1 * sqrt(log n) standard deviations of the
// difference.
CombinedEstimate anchored_threshold(const EstimatorDraw& d, double lambda1, std::int64_t n);

// Core weight with the squared difference damped by n^-beta.
CombinedEstimate cheng_variant(const EstimatorDraw& d, double beta);

} // namespace estfuse
