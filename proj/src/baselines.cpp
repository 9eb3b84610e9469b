#include "estfuse/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "estfuse/errors.hpp"
#include "estfuse/numerics.hpp"
#include "estfuse/rng.hpp"
#include "estfuse/simgauss.hpp"

namespace estfuse {

std::vector<double> BaselineConfig::default_gamma_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 20; ++i) grid.push_back(static_cast<double>(i) * 0.05);
    return grid;
}

void BaselineConfig::validate() const {
    if (!(anchored_lambda1 > 0.0)) throw config_error("anchored_lambda1 must be > 0");
    if (!(cheng_beta > 0.0)) throw config_error("cheng_beta must be > 0");
    if (!(hypothesis_gamma >= 0.0 && hypothesis_gamma <= 1.0)) {
        throw config_error("hypothesis_gamma must lie in [0, 1]");
    }
    double prev = -1.0;
    for (double g : test_gamma_grid) {
        if (!(g >= 0.0 && g <= 1.0)) throw config_error("gamma grid values must lie in [0, 1]");
        if (g <= prev) throw config_error("gamma grid must be strictly increasing");
        prev = g;
    }
    if (test_pool_weights.first < 1 || test_pool_weights.second < 1) {
        throw config_error("pool weights must be positive sample sizes");
    }
}

CutoffTable::CutoffTable(std::string scenario_id, std::vector<std::pair<double, double>> entries)
    : scenario_id_(std::move(scenario_id)), entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end());
}

double CutoffTable::lookup(double bias_magnitude) const {
    if (entries_.empty()) throw config_error("cutoff table is empty");
    auto it = std::lower_bound(entries_.begin(), entries_.end(),
                               std::make_pair(bias_magnitude, -1.0));
    if (it == entries_.begin()) return it->second;
    if (it == entries_.end()) return entries_.back().second;
    const double above = it->first - bias_magnitude;
    const double below = bias_magnitude - std::prev(it)->first;
    // Ties resolve toward the smaller key; the slack absorbs binary
    // representation error of decimal grid values, so a query halfway
    // between decimal keys still counts as a tie.
    const double slack = 1e-12 * std::max(1.0, std::fabs(it->first));
    return (below <= above + slack) ? std::prev(it)->second : it->second;
}

CombinedEstimate shrinkage(const EstimatorDraw& d, bool clip) {
    d.validate();
    const double num = d.moments.var_u - d.moments.cov_bu;
    const double diff = d.theta_u - d.theta_b;
    const double denom = diff * diff;
    double lambda;
    if (denom == 0.0) {
        if (!clip) {
            throw degenerate_input_error("unclipped shrinkage with theta_u == theta_b");
        }
        lambda = (num > 0.0) ? 1.0 : 0.0;
    } else {
        lambda = num / denom;
        if (clip) lambda = std::clamp(lambda, 0.0, 1.0);
    }
    return combine(d, lambda, clip ? Rule::ShrinkageClipped : Rule::ShrinkageUnclipped);
}

CombinedEstimate hypothesis_test_combine(const EstimatorDraw& d, double gamma,
                                         std::pair<std::int64_t, std::int64_t> pool_weights) {
    d.validate();
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
    const double var_diff = d.moments.diff_variance();
    if (var_diff <= 1e-30) {
        throw degenerate_input_error("test statistic denominator is degenerate");
    }
    const double diff = d.theta_u - d.theta_b;
    const double t_stat = diff * diff / var_diff;
    const double cutoff = chi_square1_upper_quantile(gamma);
    double lambda;
    if (t_stat >= cutoff) {
        lambda = 0.0;  // reject: keep the unbiased estimator
    } else {
        // Pool, weighting by sample size; equal sizes give the plain average.
        lambda = static_cast<double>(pool_weights.second) /
                 static_cast<double>(pool_weights.first + pool_weights.second);
    }
    return combine(d, lambda, Rule::HypothesisFixed);
}

CutoffTable build_cutoff_table(const GaussianScenario& scenario, const BaselineConfig& cfg,
                               std::int64_t reps, std::uint64_t seed) {
    scenario.validate();
    cfg.validate();
    if (reps < 1000) throw std::invalid_argument("cutoff table requires reps >= 1000");

    const std::vector<double> gammas =
        cfg.test_gamma_grid.empty() ? BaselineConfig::default_gamma_grid() : cfg.test_gamma_grid;
    const std::vector<double>& mu_keys =
        cfg.test_mu_grid.empty() ? scenario.mu_grid : cfg.test_mu_grid;
    if (mu_keys.empty()) throw config_error("cutoff table needs a mu grid");

    GaussianScenario scn = scenario;
    scn.seed = seed;
    scn.mu_grid = mu_keys;
    scn.reps = reps;

    std::vector<double> cutoffs(gammas.size());
    for (std::size_t g = 0; g < gammas.size(); ++g) {
        cutoffs[g] = chi_square1_upper_quantile(gammas[g]);
    }
    const double pool_lambda = static_cast<double>(cfg.test_pool_weights.second) /
                               static_cast<double>(cfg.test_pool_weights.first +
                                                   cfg.test_pool_weights.second);

    EngineOptions opts;
    opts.purpose = stream_purpose::kCutoffTable;

    std::vector<std::pair<double, double>> entries;
    entries.reserve(mu_keys.size());
    std::vector<std::vector<double>> sq_err(gammas.size(),
                                            std::vector<double>(static_cast<std::size_t>(reps)));
    std::vector<char> excluded(static_cast<std::size_t>(reps));
    for (std::size_t mu_idx = 0; mu_idx < mu_keys.size(); ++mu_idx) {
        detail::parallel_for(reps, opts, [&](std::int64_t rep) {
            const auto r = static_cast<std::size_t>(rep);
            auto draw = draw_panel_estimates(scn, mu_idx, rep, stream_purpose::kCutoffTable);
            if (!draw) {
                excluded[r] = 1;
                for (std::size_t g = 0; g < gammas.size(); ++g) sq_err[g][r] = 0.0;
                return;
            }
            excluded[r] = 0;
            const double diff = draw->theta_u - draw->theta_b;
            const double t_stat = diff * diff / draw->moments.diff_variance();
            for (std::size_t g = 0; g < gammas.size(); ++g) {
                const double lambda = (t_stat >= cutoffs[g]) ? 0.0 : pool_lambda;
                const double theta = draw->theta_u + lambda * (draw->theta_b - draw->theta_u);
                const double err = theta - scn.theta_0;
                sq_err[g][r] = err * err;
            }
        });
        std::int64_t included = reps;
        for (char e : excluded) included -= e;
        if (included == 0) throw degenerate_input_error("all cutoff-table replications degenerate");

        double best_gamma = gammas.front();
        double best_mse = std::numeric_limits<double>::infinity();
        for (std::size_t g = 0; g < gammas.size(); ++g) {
            const double mse = pairwise_sum(sq_err[g]) / static_cast<double>(included);
            if (mse < best_mse) {  // strict: ties keep the smaller gamma
                best_mse = mse;
                best_gamma = gammas[g];
            }
        }
        entries.emplace_back(mu_keys[mu_idx], best_gamma);
    }
    return CutoffTable(scenario.id, std::move(entries));
}

CombinedEstimate adaptive_hypothesis_test(const EstimatorDraw& d, const CutoffTable& table,
                                          std::pair<std::int64_t, std::int64_t> pool_weights) {
    if (table.empty()) throw config_error("adaptive hypothesis test requires a nonempty cutoff table");
    const double bias_estimate = std::fabs(d.theta_u - d.theta_b);
    const double gamma = table.lookup(bias_estimate);
    CombinedEstimate est = hypothesis_test_combine(d, gamma, pool_weights);
    est.rule = Rule::HypothesisAdaptive;
    return est;
}

CombinedEstimate anchored_threshold(const EstimatorDraw& d, double lambda1, std::int64_t n) {
    d.validate();
    if (!(lambda1 > 0.0)) throw std::invalid_argument("lambda1 must be > 0");
    if (n < 2) throw std::invalid_argument("anchored threshold requires n >= 2");
    const double var_diff = d.moments.diff_variance();
    if (var_diff <= 1e-30) throw degenerate_input_error("var(theta_b - theta_u) is degenerate");

    const double sd = std::sqrt(var_diff);
    const double threshold = lambda1 * std::sqrt(std::log(static_cast<double>(n))) * sd;
    const double w = (d.moments.var_u - d.moments.cov_bu) / var_diff;
    const double diff = d.theta_b - d.theta_u;

    CombinedEstimate out;
    out.rule = Rule::Anchored;
    if (std::fabs(diff) >= threshold) {
        // Saturated: the corrected biased estimate sits exactly at
        // theta_u +- threshold, so the combination no longer moves with diff.
        const double sign = (diff >= 0.0) ? 1.0 : -1.0;
        out.theta = d.theta_u + w * sign * threshold;
        out.lambda = w * sign * threshold / diff;
    } else {
        // Estimated bias is zero: plain inverse-variance weighting.
        out.theta = d.theta_u + w * diff;
        out.lambda = w;
    }
    return out;
}

CombinedEstimate cheng_variant(const EstimatorDraw& d, double beta) {
    d.validate();
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be > 0");
    const double diff = d.theta_u - d.theta_b;
    const double damp = std::pow(static_cast<double>(d.n), -beta);
    const double denom = damp * diff * diff + d.moments.diff_variance();
    if (denom <= 1e-30) throw degenerate_input_error("cheng weight denominator is degenerate");
    const double lambda = (d.moments.var_u - d.moments.cov_bu) / denom;
    return combine(d, lambda, Rule::Cheng);
}

} // namespace estfuse
