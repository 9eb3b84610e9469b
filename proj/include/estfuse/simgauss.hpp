#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "estfuse/baselines.hpp"
#include "estfuse/combiner.hpp"
#include "estfuse/moments.hpp"
#include "estfuse/parallel.hpp"

namespace estfuse {

// Generator-stream tags keeping independent passes on disjoint streams.
namespace stream_purpose {
inline constexpr std::uint64_t kMainRun = 0;
inline constexpr std::uint64_t kCutoffTable = 1;
inline constexpr std::uint64_t kConsistency = 2;
inline constexpr std::uint64_t kUnboundedBias = 3;
inline constexpr std::uint64_t kBoundCheck = 4;
inline constexpr std::uint64_t kSprintSweep = 5;
inline constexpr std::uint64_t kBootstrap = 6;
}  // namespace stream_purpose

// One Table-style parameter setting: n samples of (psi_u, psi_b) drawn
// from a bivariate normal with mean (theta_0, theta_0 + mu) per bias value.
struct GaussianScenario {
    std::string id;
    std::int64_t n = 1000;
    double var_psi_u = 1.0;
    double var_psi_b = 1.0;
    double corr = 0.0;
    double theta_0 = 1.0;
    std::vector<double> mu_grid;
    std::int64_t reps = 2000;
    std::uint64_t seed = 0;
    // When set, rules see the exact estimator-level moments instead of
    // panel estimates, and the estimator pair is drawn directly from its
    // exact sampling distribution (the sample mean of n Gaussians is
    // Gaussian with variance var_psi / n).
    bool known_moments = false;

    void validate() const;
    std::uint64_t hash() const;
    MomentEstimates population_moments() const;
};

struct CurvePoint {
    double mu = 0.0;
    Rule rule = Rule::Core;
    double mse = 0.0;
    double relative_mse = 0.0;
    double mc_se = 0.0;  // Monte Carlo standard error of the MSE
};

struct RuleSummary {
    Rule rule = Rule::Core;
    double bias_threshold = 0.0;       // first crossing above relative MSE 1
    double bias_threshold_last = 0.0;  // largest mu still below 1
    double best_rel_mse = 0.0;
    double worst_rel_mse = 0.0;
    double argmax_mu = 0.0;
};

struct ScenarioSummary {
    std::string scenario_id;
    std::int64_t n = 0;
    double var_psi_u = 0.0;
    double var_psi_b = 0.0;
    double corr = 0.0;
    std::vector<RuleSummary> rules;
    std::int64_t excluded_reps = 0;

    const RuleSummary* find(Rule rule) const;
};

struct ScenarioResult {
    std::vector<CurvePoint> curve;
    ScenarioSummary summary;
};

// Rules to evaluate on every draw. The unbiased-only rule is always run
// as the relative-MSE denominator even if absent from `rules`.
struct RuleSet {
    std::vector<Rule> rules;
    BaselineConfig baselines;
    const CutoffTable* cutoff = nullptr;  // required for HypothesisAdaptive
};

// Draws the panel for (mu index, replication), returning the estimator
// pair with panel-estimated moments. Degenerate sample moments (a
// probability-zero event) yield nullopt so callers can count exclusions.
std::optional<EstimatorDraw> draw_panel_estimates(const GaussianScenario& scn,
                                                  std::size_t mu_index,
                                                  std::int64_t rep_index,
                                                  std::uint64_t purpose,
                                                  InfluencePanel* panel_out = nullptr);

// Same draw exposed with its influence panel.
std::optional<std::pair<EstimatorDraw, InfluencePanel>> draw_panel(
    const GaussianScenario& scn, std::size_t mu_index, std::int64_t rep_index,
    std::uint64_t purpose = stream_purpose::kMainRun);

CombinedEstimate evaluate_rule(Rule rule, const EstimatorDraw& d, const RuleSet& rules);

ScenarioResult run_scenario(const GaussianScenario& scn, const RuleSet& rules,
                            const EngineOptions& opts = {});

struct GridOutcome {
    std::vector<ScenarioSummary> summaries;
    std::vector<std::pair<std::string, std::string>> skipped;  // id, reason
};

// Runs every valid scenario, building a fresh cutoff table per scenario
// when the adaptive hypothesis test is requested. Invalid scenarios are
// skipped and reported; per-scenario failures do not abort the grid.
GridOutcome run_grid(const std::vector<GaussianScenario>& grid, const RuleSet& rules,
                     std::int64_t cutoff_reps, const EngineOptions& opts = {},
                     const std::function<void(const std::string&)>& progress = {});

struct ConsistencyPoint {
    std::int64_t n = 0;
    double median_abs_lambda = 0.0;
    double mean_theta = 0.0;
    double bias = 0.0;
    double mc_se_mean = 0.0;
    std::int64_t excluded = 0;
};

struct ConsistencyReport {
    double mu = 0.0;
    std::vector<ConsistencyPoint> points;
    bool trend_evaluated = false;  // requires >= 2 sample sizes
    bool median_strictly_decreasing = false;
    bool bias_shrinks = false;           // |bias| last < |bias| first
    bool final_bias_within_3se = false;
};

ConsistencyReport check_consistency(const GaussianScenario& base, double mu_fixed,
                                    const std::vector<std::int64_t>& n_sequence,
                                    const EngineOptions& opts = {});

struct UnboundedBiasPoint {
    double mu = 0.0;
    double rel_mse_core = 0.0;
    double rel_mse_biased = 0.0;
    double mc_se = 0.0;
};

struct UnboundedBiasReport {
    std::vector<UnboundedBiasPoint> points;
    bool tail_within_tolerance = false;  // |rel - 1| < 0.02 at the last mu
};

// Requires an increasing mu sequence whose last element is at least
// 20 * sqrt(var_psi_u / n).
UnboundedBiasReport check_unbounded_bias(const GaussianScenario& scn,
                                         const std::vector<double>& mu_sequence,
                                         const EngineOptions& opts = {});

struct BoundPoint {
    double mu = 0.0;
    double mse = 0.0;
    double mc_se = 0.0;
    bool ok = false;  // mse <= bound + 4 * mc_se
};

struct BoundReport {
    double rho = 0.0;
    double c = 0.0;
    double var_u = 0.0;   // estimator-level variance
    double bound = 0.0;   // known-variance worst-case ceiling
    std::vector<BoundPoint> points;
    double sup_mse = 0.0;
    bool all_ok = false;
};

// Known-moments verification of the worst-case ceiling over the scenario's
// mu grid.
BoundReport check_bound(const GaussianScenario& scn, const EngineOptions& opts = {});

} // namespace estfuse
