#pragma once

#include <cstdint>
#include <vector>

#include "estfuse/parallel.hpp"

namespace estfuse {

// Trial-calibrated generative model: binary outcome, binary unobserved
// confounder U, potential-outcome probabilities per U stratum. The
// observational arm assigns treatment by P(T=1|U) = logistic(gamma(U-1/2)),
// which keeps the Rosenbaum odds ratio across U strata at exactly exp(gamma).
struct SprintModel {
    double p_u = 0.28;
    double p_y1_u1 = 0.081;
    double p_y1_u0 = 0.040;
    double p_y0_u1 = 0.096;
    double p_y0_u0 = 0.057;
    double e_exp = 0.5;      // 1:1 randomization in the trial
    double gamma = 0.0;      // confounding strength, log-odds units
    std::int64_t n_exp = 9361;
    std::int64_t n_obs = 100000;

    void validate() const;
    // Population average treatment effect implied by the stratum
    // probabilities: p_u (p_y1_u1 - p_y0_u1) + (1 - p_u)(p_y1_u0 - p_y0_u0).
    double true_ate() const;
    double treat_prob_given_u(bool u) const;  // observational assignment
};

// One simulated dataset. The confounder is stored for diagnostics only;
// estimators must not read it.
struct SprintDataset {
    std::vector<unsigned char> t;
    std::vector<unsigned char> y;
    std::vector<unsigned char> u;  // withheld from estimation
};

SprintDataset simulate_trial(const SprintModel& model, std::uint64_t stream_key);
SprintDataset simulate_observational(const SprintModel& model, std::uint64_t stream_key);

enum class EhatMode { Empirical, Fixed };

struct IpwEstimate {
    double theta = 0.0;
    double var = 0.0;
    double e_hat = 0.0;
    double mu1_hat = 0.0;
    double mu0_hat = 0.0;
};

// Binary-outcome IPW ATE with its influence-function variance:
// theta = n^-1 sum Y (T/e - (1-T)/(1-e)), var = n^-2 sum(influence^2).
// Throws positivity_error when an arm is empty.
IpwEstimate ipw_ate(const SprintDataset& data, EhatMode mode = EhatMode::Empirical,
                    double fixed_e = 0.5);

struct GammaSweepResult {
    double gamma = 0.0;
    double big_gamma = 1.0;  // exp(gamma)
    std::int64_t n_obs = 0;
    double rmse_unbiased = 0.0;
    double rmse_combined = 0.0;
    double ci_low_unbiased = 0.0;
    double ci_high_unbiased = 0.0;
    double ci_low_combined = 0.0;
    double ci_high_combined = 0.0;
    double mean_bias_b = 0.0;  // mean(theta_b) - theta_0 across replications
    std::int64_t excluded_reps = 0;
};

struct SprintSweepSettings {
    std::vector<double> gamma_grid;
    std::vector<std::int64_t> n_obs_set;
    std::int64_t reps = 2000;
    std::int64_t bootstrap_resamples = 1000;
    std::uint64_t seed = 0;
    // Treatment-probability mode for the TRIAL estimator. The trial's
    // randomization probability is known, and the reported tables match
    // the known-e estimator; the observational estimator always uses the
    // empirical treated fraction since its assignment mechanism is the
    // unknown being studied.
    EhatMode trial_e_mode = EhatMode::Fixed;
};

// gamma grid helpers: 20 points evenly spaced over [0, 2], and the 0.05-step
// table grid.
std::vector<double> sprint_gamma_spread20();
std::vector<double> sprint_gamma_table_grid();

// Runs the (gamma, n_obs) sweep: per cell, `reps` fresh trial+observational
// pairs, the sigma_bu-free combination weight (disjoint samples), RMSE of
// the unbiased and combined estimators, and percentile bootstrap CIs over
// the replication-level squared errors.
std::vector<GammaSweepResult> run_gamma_sweep(const SprintModel& model_template,
                                              const SprintSweepSettings& settings,
                                              const EngineOptions& opts = {});

// Largest gamma at which the combined estimator still beats the unbiased
// one. The paired per-cell RMSE difference is monotone in gamma up to
// Monte Carlo noise (confounding bias grows with gamma), so the crossing
// is read off its isotonic (nondecreasing least-squares) fit. Returns -1
// when the fit is nonnegative already at the first cell. `cells` must be
// a single-n_obs slice in ascending gamma order.
double sweep_crossover_gamma(const std::vector<GammaSweepResult>& cells);

} // namespace estfuse
