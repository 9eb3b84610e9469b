#include "estfuse/simgauss.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "estfuse/errors.hpp"
#include "estfuse/numerics.hpp"
#include "estfuse/rng.hpp"

namespace estfuse {

namespace {

std::uint64_t double_bits(double x) { return std::bit_cast<std::uint64_t>(x); }

// Per-(mu, rule) accumulator slots; one entry per replication so that the
// fill order never matters.
struct Slots {
    std::vector<std::vector<double>> sq_err;  // [rule][rep]
    std::vector<char> excluded;               // [rep]

    Slots(std::size_t n_rules, std::size_t reps)
        : sq_err(n_rules, std::vector<double>(reps)), excluded(reps) {}

    void reset() {
        for (auto& v : sq_err) std::fill(v.begin(), v.end(), 0.0);
        std::fill(excluded.begin(), excluded.end(), 0);
    }
};

std::vector<Rule> with_unbiased_first(const std::vector<Rule>& rules) {
    std::vector<Rule> out;
    out.push_back(Rule::UnbiasedOnly);
    for (Rule r : rules) {
        if (std::find(out.begin(), out.end(), r) == out.end()) out.push_back(r);
    }
    return out;
}

struct MseEstimate {
    double mse = 0.0;
    double mc_se = 0.0;
};

MseEstimate reduce_mse(std::span<const double> sq_err, std::int64_t included) {
    MseEstimate out;
    if (included <= 0) return out;
    const double k = static_cast<double>(included);
    out.mse = pairwise_sum(sq_err) / k;
    const double* p = sq_err.data();
    const double m4 =
        pairwise_transform_sum(sq_err.size(), [p](std::size_t i) { return p[i] * p[i]; }) / k;
    const double var = std::max(0.0, m4 - out.mse * out.mse);
    out.mc_se = std::sqrt(var / k);
    return out;
}

RuleSummary summarize_rule(Rule rule, const std::vector<double>& mu_grid,
                           const std::vector<double>& rel) {
    RuleSummary s;
    s.rule = rule;
    s.best_rel_mse = std::numeric_limits<double>::infinity();
    s.worst_rel_mse = -std::numeric_limits<double>::infinity();
    s.argmax_mu = mu_grid.front();
    s.bias_threshold = 0.0;
    s.bias_threshold_last = 0.0;
    bool crossed = false;
    for (std::size_t i = 0; i < mu_grid.size(); ++i) {
        const double r = rel[i];
        if (r < s.best_rel_mse) s.best_rel_mse = r;
        if (r > s.worst_rel_mse) {
            s.worst_rel_mse = r;
            s.argmax_mu = mu_grid[i];
        }
        if (r < 1.0) {
            s.bias_threshold_last = mu_grid[i];
            if (!crossed) s.bias_threshold = mu_grid[i];
        } else {
            crossed = true;
        }
    }
    return s;
}

} // namespace

void GaussianScenario::validate() const {
    if (n < 2) throw std::invalid_argument("scenario requires n >= 2");
    if (reps < 1) throw std::invalid_argument("scenario requires reps >= 1");
    if (!(var_psi_u >= 0.0) || !(var_psi_b >= 0.0)) {
        throw std::invalid_argument("variances must be nonnegative");
    }
    if (var_psi_u == 0.0 && var_psi_b == 0.0) {
        throw std::invalid_argument("both variances are zero");
    }
    if (!(corr >= -1.0 && corr <= 1.0)) throw std::invalid_argument("corr must lie in [-1, 1]");
    if (corr != 0.0 && (var_psi_u == 0.0 || var_psi_b == 0.0)) {
        throw std::invalid_argument("nonzero corr requires both variances positive");
    }
    const double var_diff =
        var_psi_u + var_psi_b - 2.0 * corr * std::sqrt(var_psi_u * var_psi_b);
    if (var_diff <= 1e-30) {
        throw degenerate_input_error("population var(psi_u - psi_b) is not strictly positive");
    }
    if (mu_grid.empty()) throw std::invalid_argument("mu grid is empty");
}

std::uint64_t GaussianScenario::hash() const {
    return stream_key({static_cast<std::uint64_t>(n), double_bits(var_psi_u),
                       double_bits(var_psi_b), double_bits(corr), double_bits(theta_0),
                       known_moments ? 1ULL : 0ULL});
}

MomentEstimates GaussianScenario::population_moments() const {
    const double inv_n = 1.0 / static_cast<double>(n);
    MomentEstimates m;
    m.var_u = var_psi_u * inv_n;
    m.var_b = var_psi_b * inv_n;
    m.cov_bu = corr * std::sqrt(var_psi_u * var_psi_b) * inv_n;
    return m;
}

std::optional<EstimatorDraw> draw_panel_estimates(const GaussianScenario& scn,
                                                  std::size_t mu_index,
                                                  std::int64_t rep_index,
                                                  std::uint64_t purpose,
                                                  InfluencePanel* panel_out) {
    const double mu = scn.mu_grid.at(mu_index);
    CounterRng rng(stream_key({scn.seed, scn.hash(), purpose,
                               static_cast<std::uint64_t>(mu_index),
                               static_cast<std::uint64_t>(rep_index)}));

    const auto n = static_cast<std::size_t>(scn.n);
    const double sigma_u = std::sqrt(scn.var_psi_u);
    const double sigma_b = std::sqrt(scn.var_psi_b);
    const double mean_b = scn.theta_0 + mu;
    const double cross = scn.corr;
    const double resid = std::sqrt(1.0 - scn.corr * scn.corr);

    if (scn.known_moments) {
        // With known moments the panel is not needed: the sample mean of n
        // iid Gaussians is itself Gaussian with variance var_psi / n, so the
        // estimator pair is drawn from its exact sampling distribution.
        const double z1 = rng.next_normal();
        const double z2 = rng.next_normal();
        const double root_n = std::sqrt(static_cast<double>(scn.n));
        EstimatorDraw d;
        d.theta_u = scn.theta_0 + sigma_u / root_n * z1;
        d.theta_b = mean_b + sigma_b / root_n * (cross * z1 + resid * z2);
        d.moments = scn.population_moments();
        d.n = scn.n;
        return d;
    }

    // Two variates per sample, always consumed, so the stream layout does
    // not depend on the marginal variances. Scratch buffers are reused per
    // thread; replications never share state.
    thread_local std::vector<double> psi_u, psi_b;
    thread_local InfluencePanel panel;
    psi_u.resize(n);
    psi_b.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double z1 = rng.next_normal();
        const double z2 = rng.next_normal();
        psi_u[i] = scn.theta_0 + sigma_u * z1;
        psi_b[i] = mean_b + sigma_b * (cross * z1 + resid * z2);
    }
    const double theta_u_hat = pairwise_mean(psi_u);
    const double theta_b_hat = pairwise_mean(psi_b);

    panel.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        panel.samples[i] = {psi_u[i] - theta_u_hat, psi_b[i] - theta_b_hat};
    }

    EstimatorDraw d;
    d.theta_u = theta_u_hat;
    d.theta_b = theta_b_hat;
    d.n = scn.n;
    try {
        d.moments = estimate_moments(panel);
        d.moments.validate();
    } catch (const degenerate_input_error&) {
        return std::nullopt;
    }
    if (panel_out) *panel_out = panel;
    return d;
}

std::optional<std::pair<EstimatorDraw, InfluencePanel>> draw_panel(
    const GaussianScenario& scn, std::size_t mu_index, std::int64_t rep_index,
    std::uint64_t purpose) {
    InfluencePanel panel;
    auto draw = draw_panel_estimates(scn, mu_index, rep_index, purpose, &panel);
    if (!draw) return std::nullopt;
    return std::make_pair(*draw, std::move(panel));
}

CombinedEstimate evaluate_rule(Rule rule, const EstimatorDraw& d, const RuleSet& rules) {
    switch (rule) {
        case Rule::UnbiasedOnly: return combine(d, 0.0, Rule::UnbiasedOnly);
        case Rule::BiasedOnly: return combine(d, 1.0, Rule::BiasedOnly);
        case Rule::Core: return combine(d, lambda_hat(d), Rule::Core);
        case Rule::ShrinkageClipped: return shrinkage(d, true);
        case Rule::ShrinkageUnclipped: return shrinkage(d, false);
        case Rule::HypothesisFixed:
            return hypothesis_test_combine(d, rules.baselines.hypothesis_gamma,
                                           rules.baselines.test_pool_weights);
        case Rule::HypothesisAdaptive:
            if (rules.cutoff == nullptr) {
                throw config_error("adaptive hypothesis test requires a cutoff table");
            }
            return adaptive_hypothesis_test(d, *rules.cutoff, rules.baselines.test_pool_weights);
        case Rule::Anchored:
            return anchored_threshold(d, rules.baselines.anchored_lambda1, d.n);
        case Rule::Cheng: return cheng_variant(d, rules.baselines.cheng_beta);
    }
    throw std::invalid_argument("unknown rule");
}

const RuleSummary* ScenarioSummary::find(Rule rule) const {
    for (const RuleSummary& r : rules) {
        if (r.rule == rule) return &r;
    }
    return nullptr;
}

ScenarioResult run_scenario(const GaussianScenario& scn, const RuleSet& rules,
                            const EngineOptions& opts) {
    scn.validate();
    rules.baselines.validate();
    if (rules.rules.empty()) throw std::invalid_argument("rule set is empty");
    const std::vector<Rule> all_rules = with_unbiased_first(rules.rules);
    if (std::find(all_rules.begin(), all_rules.end(), Rule::HypothesisAdaptive) !=
            all_rules.end() &&
        (rules.cutoff == nullptr || rules.cutoff->empty())) {
        throw config_error("adaptive hypothesis test requires a nonempty cutoff table");
    }

    const auto reps = static_cast<std::size_t>(scn.reps);
    Slots slots(all_rules.size(), reps);

    ScenarioResult result;
    result.summary.scenario_id = scn.id;
    result.summary.n = scn.n;
    result.summary.var_psi_u = scn.var_psi_u;
    result.summary.var_psi_b = scn.var_psi_b;
    result.summary.corr = scn.corr;

    std::vector<std::vector<double>> rel_by_rule(all_rules.size());

    for (std::size_t mu_idx = 0; mu_idx < scn.mu_grid.size(); ++mu_idx) {
        slots.reset();
        detail::parallel_for(scn.reps, opts, [&](std::int64_t rep) {
            const auto r = static_cast<std::size_t>(rep);
            auto draw = draw_panel_estimates(scn, mu_idx, rep, opts.purpose);
            if (!draw) {
                slots.excluded[r] = 1;
                return;
            }
            for (std::size_t k = 0; k < all_rules.size(); ++k) {
                CombinedEstimate est;
                try {
                    est = evaluate_rule(all_rules[k], *draw, rules);
                } catch (const degenerate_input_error&) {
                    // Probability-zero event for continuous draws; drop the
                    // whole replication so every rule averages the same set.
                    slots.excluded[r] = 1;
                    for (std::size_t j = 0; j <= k; ++j) slots.sq_err[j][r] = 0.0;
                    return;
                }
                const double err = est.theta - scn.theta_0;
                slots.sq_err[k][r] = err * err;
            }
        });

        std::int64_t included = scn.reps;
        for (char e : slots.excluded) included -= e;
        result.summary.excluded_reps += scn.reps - included;

        const MseEstimate unbiased = reduce_mse(slots.sq_err[0], included);
        for (std::size_t k = 0; k < all_rules.size(); ++k) {
            const MseEstimate est = reduce_mse(slots.sq_err[k], included);
            CurvePoint point;
            point.mu = scn.mu_grid[mu_idx];
            point.rule = all_rules[k];
            point.mse = est.mse;
            point.relative_mse = (unbiased.mse > 0.0) ? est.mse / unbiased.mse
                                                      : std::numeric_limits<double>::quiet_NaN();
            point.mc_se = est.mc_se;
            result.curve.push_back(point);
            rel_by_rule[k].push_back(point.relative_mse);
        }
    }

    for (std::size_t k = 0; k < all_rules.size(); ++k) {
        result.summary.rules.push_back(summarize_rule(all_rules[k], scn.mu_grid, rel_by_rule[k]));
    }
    return result;
}

GridOutcome run_grid(const std::vector<GaussianScenario>& grid, const RuleSet& rules,
                     std::int64_t cutoff_reps, const EngineOptions& opts,
                     const std::function<void(const std::string&)>& progress) {
    GridOutcome outcome;
    const bool needs_table =
        std::find(rules.rules.begin(), rules.rules.end(), Rule::HypothesisAdaptive) !=
        rules.rules.end();
    for (const GaussianScenario& scn : grid) {
        try {
            scn.validate();
        } catch (const std::exception& e) {
            outcome.skipped.emplace_back(scn.id, e.what());
            continue;
        }
        try {
            RuleSet scenario_rules = rules;
            CutoffTable table;
            if (needs_table) {
                table = build_cutoff_table(scn, rules.baselines, cutoff_reps,
                                           stream_key({scn.seed, scn.hash(),
                                                       stream_purpose::kCutoffTable}));
                scenario_rules.cutoff = &table;
            }
            ScenarioResult result = run_scenario(scn, scenario_rules, opts);
            outcome.summaries.push_back(std::move(result.summary));
            if (progress) progress(scn.id);
        } catch (const std::exception& e) {
            outcome.skipped.emplace_back(scn.id, e.what());
        }
    }
    return outcome;
}

ConsistencyReport check_consistency(const GaussianScenario& base, double mu_fixed,
                                    const std::vector<std::int64_t>& n_sequence,
                                    const EngineOptions& opts) {
    if (n_sequence.empty()) throw std::invalid_argument("n sequence is empty");
    EngineOptions pass = opts;
    pass.purpose = stream_purpose::kConsistency;

    ConsistencyReport report;
    report.mu = mu_fixed;
    for (std::int64_t n : n_sequence) {
        GaussianScenario scn = base;
        scn.n = n;
        scn.mu_grid = {mu_fixed};
        scn.validate();

        const auto reps = static_cast<std::size_t>(scn.reps);
        std::vector<double> lambdas(reps, 0.0), thetas(reps, 0.0);
        std::vector<char> excluded(reps, 0);
        detail::parallel_for(scn.reps, pass, [&](std::int64_t rep) {
            const auto r = static_cast<std::size_t>(rep);
            auto draw = draw_panel_estimates(scn, 0, rep, pass.purpose);
            if (!draw) {
                excluded[r] = 1;
                return;
            }
            const double lambda = lambda_hat(*draw);
            lambdas[r] = std::fabs(lambda);
            thetas[r] = combine(*draw, lambda).theta;
        });

        std::int64_t included = scn.reps;
        for (char e : excluded) included -= e;

        ConsistencyPoint point;
        point.n = n;
        point.excluded = scn.reps - included;
        point.median_abs_lambda = median_of(lambdas);
        point.mean_theta = pairwise_sum(thetas) / static_cast<double>(included);
        point.bias = point.mean_theta - scn.theta_0;
        std::vector<double> sq(reps);
        for (std::size_t i = 0; i < reps; ++i) {
            const double d = excluded[i] ? 0.0 : thetas[i] - point.mean_theta;
            sq[i] = d * d;
        }
        const double var = pairwise_sum(sq) / static_cast<double>(included);
        point.mc_se_mean = std::sqrt(var / static_cast<double>(included));
        report.points.push_back(point);
    }

    if (report.points.size() >= 2) {
        report.trend_evaluated = true;
        report.median_strictly_decreasing = true;
        for (std::size_t i = 1; i < report.points.size(); ++i) {
            if (!(report.points[i].median_abs_lambda <
                  report.points[i - 1].median_abs_lambda)) {
                report.median_strictly_decreasing = false;
            }
        }
        const ConsistencyPoint& first = report.points.front();
        const ConsistencyPoint& last = report.points.back();
        report.bias_shrinks = std::fabs(last.bias) < std::fabs(first.bias);
        report.final_bias_within_3se = std::fabs(last.bias) < 3.0 * last.mc_se_mean;
    }
    return report;
}

UnboundedBiasReport check_unbounded_bias(const GaussianScenario& scn,
                                         const std::vector<double>& mu_sequence,
                                         const EngineOptions& opts) {
    if (mu_sequence.empty()) throw std::invalid_argument("mu sequence is empty");
    for (std::size_t i = 1; i < mu_sequence.size(); ++i) {
        if (!(mu_sequence[i] > mu_sequence[i - 1])) {
            throw std::invalid_argument("mu sequence must be increasing");
        }
    }
    const double floor = 20.0 * std::sqrt(scn.var_psi_u / static_cast<double>(scn.n));
    if (!(mu_sequence.back() >= floor)) {
        throw std::invalid_argument("last mu must reach 20 * sqrt(var_psi_u / n)");
    }

    GaussianScenario run = scn;
    run.mu_grid = mu_sequence;
    EngineOptions pass = opts;
    pass.purpose = stream_purpose::kUnboundedBias;
    RuleSet rules;
    rules.rules = {Rule::Core, Rule::BiasedOnly};
    const ScenarioResult result = run_scenario(run, rules, pass);

    UnboundedBiasReport report;
    for (std::size_t i = 0; i < mu_sequence.size(); ++i) {
        UnboundedBiasPoint point;
        point.mu = mu_sequence[i];
        for (const CurvePoint& cp : result.curve) {
            if (cp.mu == mu_sequence[i] && cp.rule == Rule::Core) {
                point.rel_mse_core = cp.relative_mse;
                point.mc_se = cp.mc_se;
            }
            if (cp.mu == mu_sequence[i] && cp.rule == Rule::BiasedOnly) {
                point.rel_mse_biased = cp.relative_mse;
            }
        }
        report.points.push_back(point);
    }
    report.tail_within_tolerance = std::fabs(report.points.back().rel_mse_core - 1.0) < 0.02;
    return report;
}

BoundReport check_bound(const GaussianScenario& scn, const EngineOptions& opts) {
    if (!scn.known_moments) {
        throw std::invalid_argument("check_bound requires known-moments mode");
    }
    GaussianScenario run = scn;
    EngineOptions pass = opts;
    pass.purpose = stream_purpose::kBoundCheck;
    RuleSet rules;
    rules.rules = {Rule::Core};
    const ScenarioResult result = run_scenario(run, rules, pass);

    const MomentEstimates pop = scn.population_moments();
    const ShapeParams shape = ShapeParams::from_moments(pop);

    BoundReport report;
    report.rho = shape.rho;
    report.c = shape.c;
    report.var_u = pop.var_u;
    report.bound = worst_case_bound(shape, pop.var_u);
    report.sup_mse = 0.0;
    report.all_ok = true;
    for (const CurvePoint& cp : result.curve) {
        if (cp.rule != Rule::Core) continue;
        BoundPoint point;
        point.mu = cp.mu;
        point.mse = cp.mse;
        point.mc_se = cp.mc_se;
        point.ok = cp.mse <= report.bound + 4.0 * cp.mc_se;
        report.sup_mse = std::max(report.sup_mse, cp.mse);
        report.all_ok = report.all_ok && point.ok;
        report.points.push_back(point);
    }
    return report;
}

} // namespace estfuse
