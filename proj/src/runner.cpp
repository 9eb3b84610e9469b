#include "estfuse/runner.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include "estfuse/csv.hpp"
#include "estfuse/errors.hpp"
#include "estfuse/rng.hpp"
#include "estfuse/simgauss.hpp"
#include "estfuse/simsprint.hpp"
#include "estfuse/svg.hpp"

namespace estfuse {

namespace fs = std::filesystem;

namespace {

struct RunContext {
    const RunConfig& cfg;
    fs::path out;
    EngineOptions opts;
    std::map<std::string, std::int64_t> row_counts;
    std::vector<std::array<std::string, 3>> errors;  // scenario, stage, message
};

std::string scenario_label(std::int64_t n, double vu, double vb, double corr) {
    std::ostringstream id;
    id << "n" << n << "_vu" << vu << "_vb" << vb << "_c" << corr;
    return id.str();
}

} // namespace

GaussianScenario make_curve_scenario(const RunConfig& cfg) {
    GaussianScenario scn;
    scn.n = cfg.gaussian.n;
    scn.var_psi_u = cfg.gaussian.var_psi_u;
    scn.var_psi_b = cfg.gaussian.var_psi_b;
    scn.corr = cfg.gaussian.corr;
    scn.theta_0 = cfg.gaussian.theta_0;
    scn.mu_grid = make_grid(cfg.gaussian.mu_min, cfg.gaussian.mu_max, cfg.gaussian.mu_step);
    scn.reps = cfg.reps;
    scn.seed = cfg.seed;
    scn.known_moments = cfg.gaussian.known_moments;
    scn.id = scenario_label(scn.n, scn.var_psi_u, scn.var_psi_b, scn.corr);
    return scn;
}

std::vector<GaussianScenario> make_grid_scenarios(const RunConfig& cfg) {
    std::vector<GaussianScenario> grid;
    int index = 0;
    for (std::int64_t n : cfg.grid.n) {
        for (double vu : cfg.grid.var_psi_u) {
            for (double vb : cfg.grid.var_psi_b) {
                for (double corr : cfg.grid.corr) {
                    GaussianScenario scn;
                    scn.n = n;
                    scn.var_psi_u = vu;
                    scn.var_psi_b = vb;
                    scn.corr = corr;
                    scn.theta_0 = 1.0;
                    scn.mu_grid =
                        make_grid(0.0, cfg.gaussian.mu_max, cfg.gaussian.mu_step);
                    scn.reps = cfg.reps;
                    scn.seed = cfg.seed;
                    std::ostringstream id;
                    id << "g" << index++ << "_" << scenario_label(n, vu, vb, corr);
                    scn.id = id.str();
                    grid.push_back(std::move(scn));
                }
            }
        }
    }
    return grid;
}

namespace {

void write_curve_csv(RunContext& ctx, const std::string& scenario_id,
                     const std::vector<CurvePoint>& curve) {
    CsvWriter csv(ctx.out / "curve.csv",
                  {"scenario_id", "mu", "rule", "mse", "relative_mse", "mc_se"});
    for (const CurvePoint& p : curve) {
        csv.write_row({scenario_id, p.mu, std::string(rule_name(p.rule)), p.mse,
                       p.relative_mse, p.mc_se});
    }
    ctx.row_counts["curve.csv"] = csv.rows_written();
    csv.close();
}

void write_summary_csv(RunContext& ctx, const std::vector<ScenarioSummary>& summaries) {
    CsvWriter csv(ctx.out / "summary.csv",
                  {"scenario_id", "n", "var_psi_u", "var_psi_b", "corr", "rule",
                   "bias_threshold", "bias_threshold_last", "best_rel_mse", "worst_rel_mse",
                   "argmax_mu", "excluded_reps"});
    for (const ScenarioSummary& s : summaries) {
        for (const RuleSummary& r : s.rules) {
            csv.write_row({s.scenario_id, s.n, s.var_psi_u, s.var_psi_b, s.corr,
                           std::string(rule_name(r.rule)), r.bias_threshold,
                           r.bias_threshold_last, r.best_rel_mse, r.worst_rel_mse, r.argmax_mu,
                           s.excluded_reps});
        }
    }
    ctx.row_counts["summary.csv"] = csv.rows_written();
    csv.close();
}

void write_thresholds_csv(RunContext& ctx, const std::vector<ScenarioSummary>& summaries) {
    CsvWriter csv(ctx.out / "thresholds.csv",
                  {"scenario_id", "rule", "threshold_diff", "best_diff", "worst_diff"});
    for (const ScenarioSummary& s : summaries) {
        const RuleSummary* core = s.find(Rule::Core);
        if (!core) continue;
        for (const RuleSummary& r : s.rules) {
            if (r.rule == Rule::Core || r.rule == Rule::UnbiasedOnly) continue;
            csv.write_row({s.scenario_id, std::string(rule_name(r.rule)),
                           r.bias_threshold - core->bias_threshold,
                           r.best_rel_mse - core->best_rel_mse,
                           r.worst_rel_mse - core->worst_rel_mse});
        }
    }
    ctx.row_counts["thresholds.csv"] = csv.rows_written();
    csv.close();
}

void write_errors_csv(RunContext& ctx) {
    CsvWriter csv(ctx.out / "errors.csv", {"scenario_id", "stage", "message"});
    for (const auto& row : ctx.errors) {
        csv.write_row({row[0], row[1], row[2]});
    }
    ctx.row_counts["errors.csv"] = csv.rows_written();
    csv.close();
}

void write_meta_csv(RunContext& ctx) {
    // Timestamp lives only here; the data files stay byte-deterministic.
    CsvWriter csv(ctx.out / "run_meta.csv", {"key", "value"});
    csv.write_row({std::string("tool_version"), std::string(kToolVersion)});
    csv.write_row({std::string("experiment"), std::string(experiment_name(ctx.cfg.kind))});
    csv.write_row({std::string("seed"), static_cast<std::uint64_t>(ctx.cfg.seed)});
    char hash_buf[32];
    std::snprintf(hash_buf, sizeof(hash_buf), "%016llx",
                  static_cast<unsigned long long>(ctx.cfg.config_hash));
    csv.write_row({std::string("config_hash"), std::string(hash_buf)});
    csv.write_row({std::string("schema_version"), std::string("v1")});
    const auto now = std::chrono::system_clock::now();
    const auto secs =
        std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count();
    csv.write_row({std::string("created_unix"), static_cast<std::int64_t>(secs)});
    for (const auto& [file, rows] : ctx.row_counts) {
        csv.write_row({"rows_" + file, rows});
    }
    csv.close();
}

void plot_curve(RunContext& ctx, const GaussianScenario& scn,
                const std::vector<CurvePoint>& curve) {
    LinePlot plot;
    plot.title = "Relative MSE vs bias (" + scn.id + ")";
    plot.x_label = "bias mu";
    plot.y_label = "relative MSE";
    plot.reference_lines_y = {1.0};
    std::map<Rule, PlotSeries> by_rule;
    for (const CurvePoint& p : curve) {
        if (p.rule == Rule::UnbiasedOnly) continue;
        auto& series = by_rule[p.rule];
        series.name = rule_name(p.rule);
        series.points.emplace_back(p.mu, p.relative_mse);
    }
    for (auto& [rule, series] : by_rule) plot.series.push_back(std::move(series));
    write_line_plot(plot, (ctx.out / "curve.svg").string());
}

int run_gaussian_curve(RunContext& ctx) {
    GaussianScenario scn = make_curve_scenario(ctx.cfg);

    RuleSet rules;
    rules.rules = ctx.cfg.gaussian.rules;
    rules.baselines = ctx.cfg.baselines;
    CutoffTable table;
    const bool needs_table = std::find(rules.rules.begin(), rules.rules.end(),
                                       Rule::HypothesisAdaptive) != rules.rules.end();
    if (needs_table) {
        table = build_cutoff_table(scn, rules.baselines, ctx.cfg.cutoff_reps,
                                   stream_key({scn.seed, scn.hash(),
                                               stream_purpose::kCutoffTable}));
        rules.cutoff = &table;
    }
    ScenarioResult result = run_scenario(scn, rules, ctx.opts);
    write_curve_csv(ctx, scn.id, result.curve);
    write_summary_csv(ctx, {result.summary});
    plot_curve(ctx, scn, result.curve);
    return 0;
}

int run_gaussian_grid(RunContext& ctx) {
    std::vector<GaussianScenario> grid = make_grid_scenarios(ctx.cfg);

    RuleSet rules;
    rules.rules = ctx.cfg.grid.rules;
    rules.baselines = ctx.cfg.baselines;

    GridOutcome outcome = run_grid(grid, rules, ctx.cfg.cutoff_reps, ctx.opts,
                                   [](const std::string& id) {
                                       std::cerr << "scenario done: " << id << "\n";
                                   });
    for (const auto& [id, reason] : outcome.skipped) {
        ctx.errors.push_back({id, "scenario", reason});
    }
    write_summary_csv(ctx, outcome.summaries);
    write_thresholds_csv(ctx, outcome.summaries);
    if (outcome.summaries.empty()) {
        write_errors_csv(ctx);
        write_meta_csv(ctx);
        std::cerr << "{\"error\":\"all scenarios failed\"}\n";
        return 3;
    }
    return 0;
}

int run_sprint(RunContext& ctx) {
    SprintModel model;
    model.n_exp = ctx.cfg.sprint.n_exp;

    SprintSweepSettings settings;
    settings.gamma_grid = ctx.cfg.sprint.gamma_mode == "spread20" ? sprint_gamma_spread20()
                                                                  : sprint_gamma_table_grid();
    settings.n_obs_set = ctx.cfg.sprint.n_obs;
    settings.reps = ctx.cfg.reps;
    settings.bootstrap_resamples = ctx.cfg.sprint.bootstrap_resamples;
    settings.seed = ctx.cfg.seed;
    settings.trial_e_mode = ctx.cfg.sprint.trial_e_mode;

    const std::vector<GammaSweepResult> results = run_gamma_sweep(model, settings, ctx.opts);

    CsvWriter csv(ctx.out / "sweep.csv",
                  {"gamma", "big_gamma", "n_obs", "rmse_unbiased_x1000", "rmse_combined_x1000",
                   "ci_low_unbiased_x1000", "ci_high_unbiased_x1000", "ci_low_combined_x1000",
                   "ci_high_combined_x1000", "mean_bias_b", "excluded_reps"});
    for (const GammaSweepResult& r : results) {
        csv.write_row({r.gamma, r.big_gamma, r.n_obs, r.rmse_unbiased * 1000.0,
                       r.rmse_combined * 1000.0, r.ci_low_unbiased * 1000.0,
                       r.ci_high_unbiased * 1000.0, r.ci_low_combined * 1000.0,
                       r.ci_high_combined * 1000.0, r.mean_bias_b, r.excluded_reps});
    }
    ctx.row_counts["sweep.csv"] = csv.rows_written();
    csv.close();

    LinePlot plot;
    plot.title = "RMSE x1000 vs confounding strength";
    plot.x_label = "gamma";
    plot.y_label = "RMSE x1000";
    std::map<std::int64_t, PlotSeries> combined, unbiased;
    for (const GammaSweepResult& r : results) {
        auto& cs = combined[r.n_obs];
        cs.name = "combined n_obs=" + std::to_string(r.n_obs);
        cs.points.emplace_back(r.gamma, r.rmse_combined * 1000.0);
        auto& us = unbiased[r.n_obs];
        us.name = "unbiased n_obs=" + std::to_string(r.n_obs);
        us.points.emplace_back(r.gamma, r.rmse_unbiased * 1000.0);
    }
    for (auto& [n, s] : combined) plot.series.push_back(std::move(s));
    for (auto& [n, s] : unbiased) plot.series.push_back(std::move(s));
    write_line_plot(plot, (ctx.out / "sweep.svg").string());
    return 0;
}

int run_bound_check(RunContext& ctx) {
    CsvWriter csv(ctx.out / "bounds.csv",
                  {"rho", "c", "n", "mu", "mse", "mc_se", "bound", "ok"});
    LinePlot plot;
    plot.title = "Known-moments MSE against the worst-case ceiling";
    plot.x_label = "bias mu";
    plot.y_label = "MSE / bound";
    plot.reference_lines_y = {1.0};
    bool all_ok = true;
    for (double rho : ctx.cfg.bound.rho) {
        for (double c : ctx.cfg.bound.c) {
            GaussianScenario scn;
            scn.n = ctx.cfg.bound.n;
            scn.var_psi_u = ctx.cfg.bound.var_psi_u;
            scn.var_psi_b = c * c * ctx.cfg.bound.var_psi_u;
            scn.corr = rho;
            scn.theta_0 = 1.0;
            scn.mu_grid = make_grid(0.0, ctx.cfg.bound.mu_max, ctx.cfg.bound.mu_step);
            scn.reps = ctx.cfg.bound.reps;
            scn.seed = ctx.cfg.seed;
            scn.known_moments = true;
            std::ostringstream id;
            id << "bound_rho" << rho << "_c" << c;
            scn.id = id.str();
            try {
                scn.validate();
            } catch (const std::exception& e) {
                ctx.errors.push_back({scn.id, "scenario", e.what()});
                continue;
            }
            const BoundReport report = check_bound(scn, ctx.opts);
            PlotSeries series;
            series.name = id.str();
            for (const BoundPoint& p : report.points) {
                csv.write_row({rho, c, scn.n, p.mu, p.mse, p.mc_se, report.bound,
                               static_cast<std::int64_t>(p.ok ? 1 : 0)});
                series.points.emplace_back(p.mu, p.mse / report.bound);
                all_ok = all_ok && p.ok;
            }
            plot.series.push_back(std::move(series));
        }
    }
    ctx.row_counts["bounds.csv"] = csv.rows_written();
    csv.close();
    if (!plot.series.empty()) {
        write_line_plot(plot, (ctx.out / "bounds.svg").string());
    }
    std::cerr << (all_ok ? "bound check: all points within ceiling\n"
                         : "bound check: ceiling violated\n");
    return 0;
}

int run_consistency(RunContext& ctx) {
    GaussianScenario base = make_curve_scenario(ctx.cfg);

    const ConsistencyReport consistency =
        check_consistency(base, ctx.cfg.consistency.mu, ctx.cfg.consistency.n_sequence, ctx.opts);
    {
        CsvWriter csv(ctx.out / "consistency.csv",
                      {"mu", "n", "median_abs_lambda", "mean_theta", "bias", "mc_se_mean",
                       "excluded_reps"});
        for (const ConsistencyPoint& p : consistency.points) {
            csv.write_row({consistency.mu, p.n, p.median_abs_lambda, p.mean_theta, p.bias,
                           p.mc_se_mean, p.excluded});
        }
        ctx.row_counts["consistency.csv"] = csv.rows_written();
        csv.close();
    }

    GaussianScenario tail = base;
    tail.reps = ctx.cfg.consistency.unbounded_reps;
    const UnboundedBiasReport unbounded =
        check_unbounded_bias(tail, ctx.cfg.consistency.unbounded_mu, ctx.opts);
    {
        CsvWriter csv(ctx.out / "unbounded.csv",
                      {"mu", "rel_mse_core", "rel_mse_biased", "mc_se"});
        for (const UnboundedBiasPoint& p : unbounded.points) {
            csv.write_row({p.mu, p.rel_mse_core, p.rel_mse_biased, p.mc_se});
        }
        ctx.row_counts["unbounded.csv"] = csv.rows_written();
        csv.close();
    }
    return 0;
}

int run_cutoff_table(RunContext& ctx) {
    GaussianScenario scn = make_curve_scenario(ctx.cfg);
    const CutoffTable table =
        build_cutoff_table(scn, ctx.cfg.baselines, ctx.cfg.cutoff_reps,
                           stream_key({scn.seed, scn.hash(), stream_purpose::kCutoffTable}));
    CsvWriter csv(ctx.out / "cutoffs.csv", {"scenario_id", "mu", "gamma"});
    for (const auto& [mu, gamma] : table.entries()) {
        csv.write_row({table.scenario_id(), mu, gamma});
    }
    ctx.row_counts["cutoffs.csv"] = csv.rows_written();
    csv.close();
    return 0;
}

} // namespace

int run(const RunConfig& config) {
    RunContext ctx{config, fs::path(config.out_dir), EngineOptions{}, {}, {}};
    ctx.opts.policy = ExecutionPolicy::OpenMP;
    ctx.opts.workers = config.workers;

    try {
        fs::create_directories(ctx.out);
    } catch (const std::exception& e) {
        std::cerr << "{\"error\":\"cannot create output directory\",\"detail\":\"" << e.what()
                  << "\"}\n";
        return 3;
    }

    try {
        int rc = 0;
        switch (config.kind) {
            case ExperimentKind::GaussianCurve: rc = run_gaussian_curve(ctx); break;
            case ExperimentKind::GaussianGrid: rc = run_gaussian_grid(ctx); break;
            case ExperimentKind::Sprint: rc = run_sprint(ctx); break;
            case ExperimentKind::BoundCheck: rc = run_bound_check(ctx); break;
            case ExperimentKind::Consistency: rc = run_consistency(ctx); break;
            case ExperimentKind::CutoffTable: rc = run_cutoff_table(ctx); break;
        }
        if (rc != 0) return rc;
        write_errors_csv(ctx);
        write_meta_csv(ctx);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "{\"error\":\"runtime failure\",\"detail\":\"" << e.what() << "\"}\n";
        return 3;
    }
}

} // namespace estfuse
