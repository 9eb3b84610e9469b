#include "estfuse/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "estfuse/errors.hpp"
#include "estfuse/rng.hpp"

namespace estfuse {

using json = nlohmann::json;

namespace {

std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
    int line = 1, column = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            column = 1;
        } else {
            ++column;
        }
    }
    return {line, column};
}

// Parse with a callback that rejects duplicate keys per object, which the
// default DOM parser would silently collapse.
json parse_strict(const std::string& text) {
    std::vector<std::set<std::string>> object_stack;
    auto callback = [&](int, json::parse_event_t event, json& parsed) {
        switch (event) {
            case json::parse_event_t::object_start:
                object_stack.emplace_back();
                break;
            case json::parse_event_t::object_end:
                object_stack.pop_back();
                break;
            case json::parse_event_t::key: {
                const auto key = parsed.get<std::string>();
                if (!object_stack.back().insert(key).second) {
                    throw config_error("duplicate key: " + key);
                }
                break;
            }
            default:
                break;
        }
        return true;
    };
    try {
        return json::parse(text, callback);
    } catch (const json::parse_error& e) {
        const auto [line, column] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        std::ostringstream msg;
        msg << "parse error at line " << line << ", column " << column << ": " << e.what();
        throw config_error(msg.str());
    }
}

void require_known_keys(const json& object, const std::string& prefix,
                        const std::set<std::string>& allowed) {
    for (const auto& [key, value] : object.items()) {
        if (!allowed.count(key)) {
            throw config_error("unknown key: " + prefix + key);
        }
        (void)value;
    }
}

template <typename T>
T get_or(const json& object, const std::string& key, const std::string& prefix, T fallback) {
    if (!object.contains(key)) return fallback;
    try {
        return object.at(key).get<T>();
    } catch (const json::exception&) {
        throw config_error("invalid value for key: " + prefix + key);
    }
}

std::vector<Rule> parse_rules(const json& object, const std::string& key,
                              const std::string& prefix, std::vector<Rule> fallback) {
    if (!object.contains(key)) return fallback;
    std::vector<Rule> rules;
    if (!object.at(key).is_array()) {
        throw config_error("invalid value for key: " + prefix + key);
    }
    for (const auto& entry : object.at(key)) {
        if (!entry.is_string()) throw config_error("invalid value for key: " + prefix + key);
        try {
            rules.push_back(rule_from_name(entry.get<std::string>()));
        } catch (const std::invalid_argument& e) {
            throw config_error(std::string(e.what()) + " (key " + prefix + key + ")");
        }
    }
    if (rules.empty()) throw config_error("empty rule list: " + prefix + key);
    return rules;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

json dump_rules(const std::vector<Rule>& rules) {
    json out = json::array();
    for (Rule r : rules) out.push_back(rule_name(r));
    return out;
}

} // namespace

const char* experiment_name(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::GaussianCurve: return "gaussian-curve";
        case ExperimentKind::GaussianGrid: return "gaussian-grid";
        case ExperimentKind::Sprint: return "sprint";
        case ExperimentKind::BoundCheck: return "bound-check";
        case ExperimentKind::Consistency: return "consistency";
        case ExperimentKind::CutoffTable: return "cutoff-table";
    }
    return "unknown";
}

ExperimentKind experiment_from_name(const std::string& name) {
    for (ExperimentKind k : {ExperimentKind::GaussianCurve, ExperimentKind::GaussianGrid,
                             ExperimentKind::Sprint, ExperimentKind::BoundCheck,
                             ExperimentKind::Consistency, ExperimentKind::CutoffTable}) {
        if (name == experiment_name(k)) return k;
    }
    throw config_error("unknown experiment: " + name);
}

std::vector<double> make_grid(double min, double max, double step) {
    if (!(step > 0.0)) throw config_error("grid step must be > 0");
    if (!(max >= min)) throw config_error("grid max must be >= min");
    const auto count = static_cast<std::size_t>(std::floor((max - min) / step + 0.5)) + 1;
    std::vector<double> grid(count);
    for (std::size_t i = 0; i < count; ++i) {
        grid[i] = min + static_cast<double>(i) * step;
    }
    return grid;
}

RunConfig load_config(const std::string& path, const ConfigOverrides& overrides) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw config_error("cannot open config file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return load_config_text(buffer.str(), overrides);
}

RunConfig load_config_text(const std::string& text, const ConfigOverrides& overrides) {
    json doc = json::object();
    std::string trimmed = text;
    trimmed.erase(0, trimmed.find_first_not_of(" \t\r\n"));
    if (!trimmed.empty()) {
        doc = parse_strict(text);
        if (!doc.is_object()) throw config_error("config root must be a JSON object");
    }

    require_known_keys(doc, "", {"experiment", "seed", "reps", "workers", "out", "fidelity",
                                 "gaussian", "grid", "sprint", "bound", "consistency",
                                 "cutoff", "baselines"});

    RunConfig cfg;

    // experiment kind: flag wins, else file, else error
    if (overrides.experiment) {
        cfg.kind = experiment_from_name(*overrides.experiment);
    } else if (doc.contains("experiment")) {
        if (!doc.at("experiment").is_string()) {
            throw config_error("invalid value for key: experiment");
        }
        cfg.kind = experiment_from_name(doc.at("experiment").get<std::string>());
    } else {
        throw config_error("missing required key: experiment");
    }

    const std::string fidelity_name =
        overrides.fidelity.value_or(get_or<std::string>(doc, "fidelity", "", "desk"));
    if (fidelity_name == "desk") {
        cfg.fidelity = Fidelity::Desk;
    } else if (fidelity_name == "full") {
        cfg.fidelity = Fidelity::Full;
    } else {
        throw config_error("fidelity must be \"desk\" or \"full\"");
    }
    const bool full = cfg.fidelity == Fidelity::Full;

    cfg.seed = overrides.seed.value_or(get_or<std::uint64_t>(doc, "seed", "", 42));
    cfg.reps = overrides.reps.value_or(
        get_or<std::int64_t>(doc, "reps", "", full ? 10000 : 2000));
    cfg.workers = overrides.workers.value_or(get_or<int>(doc, "workers", "", 0));
    cfg.out_dir = overrides.out_dir.value_or(get_or<std::string>(doc, "out", "", "results"));

    if (cfg.reps < 100) throw config_error("reps must be >= 100");
    if (cfg.workers < 0) throw config_error("workers must be >= 0");

    const double default_mu_step = full ? 0.002 : 0.01;

    if (doc.contains("gaussian") && !doc.at("gaussian").is_object()) {
        throw config_error("invalid value for key: gaussian");
    }
    const json gauss = doc.contains("gaussian") ? doc.at("gaussian") : json::object();
    require_known_keys(gauss, "gaussian.",
                       {"n", "var_psi_u", "var_psi_b", "corr", "theta_0", "mu_min", "mu_max",
                        "mu_step", "rules", "known_moments"});
    cfg.gaussian.n = get_or<std::int64_t>(gauss, "n", "gaussian.", 1000);
    cfg.gaussian.var_psi_u = get_or<double>(gauss, "var_psi_u", "gaussian.", 1.0);
    cfg.gaussian.var_psi_b = get_or<double>(gauss, "var_psi_b", "gaussian.", 1.0);
    cfg.gaussian.corr = get_or<double>(gauss, "corr", "gaussian.", 0.0);
    cfg.gaussian.theta_0 = get_or<double>(gauss, "theta_0", "gaussian.", 1.0);
    cfg.gaussian.mu_min = get_or<double>(gauss, "mu_min", "gaussian.", 0.0);
    cfg.gaussian.mu_max = get_or<double>(gauss, "mu_max", "gaussian.", 1.5);
    cfg.gaussian.mu_step = get_or<double>(gauss, "mu_step", "gaussian.", default_mu_step);
    cfg.gaussian.known_moments = get_or<bool>(gauss, "known_moments", "gaussian.", false);
    cfg.gaussian.rules = parse_rules(gauss, "rules", "gaussian.",
                                     {Rule::Core, Rule::ShrinkageClipped,
                                      Rule::HypothesisAdaptive, Rule::Anchored});
    if (!(cfg.gaussian.mu_step > 0.0)) throw config_error("gaussian.mu_step must be > 0");
    if (cfg.gaussian.n < 2) throw config_error("gaussian.n must be >= 2");

    if (doc.contains("grid") && !doc.at("grid").is_object()) {
        throw config_error("invalid value for key: grid");
    }
    const json grid = doc.contains("grid") ? doc.at("grid") : json::object();
    require_known_keys(grid, "grid.", {"n", "var_psi_u", "var_psi_b", "corr", "rules"});
    if (full) {
        cfg.grid.n = get_or<std::vector<std::int64_t>>(grid, "n", "grid.",
                                                       {500, 1000, 2000, 4000});
        cfg.grid.var_psi_u =
            get_or<std::vector<double>>(grid, "var_psi_u", "grid.", {1, 2, 4, 8, 16});
        cfg.grid.var_psi_b =
            get_or<std::vector<double>>(grid, "var_psi_b", "grid.", {0, 1, 2, 4, 8, 16});
        cfg.grid.corr =
            get_or<std::vector<double>>(grid, "corr", "grid.", {-0.5, -0.25, 0, 0.25, 0.5});
    } else {
        // Stratified 60-scenario desk subsample: every factor keeps its
        // range, the cartesian product stays tractable.
        cfg.grid.n = get_or<std::vector<std::int64_t>>(grid, "n", "grid.", {500, 2000});
        cfg.grid.var_psi_u = get_or<std::vector<double>>(grid, "var_psi_u", "grid.", {1, 4, 16});
        cfg.grid.var_psi_b =
            get_or<std::vector<double>>(grid, "var_psi_b", "grid.", {0, 1, 4, 16});
        cfg.grid.corr = get_or<std::vector<double>>(grid, "corr", "grid.", {-0.5, 0, 0.5});
    }
    cfg.grid.rules = parse_rules(grid, "rules", "grid.",
                                 {Rule::Core, Rule::ShrinkageClipped, Rule::HypothesisAdaptive,
                                  Rule::Anchored, Rule::Cheng});

    if (doc.contains("sprint") && !doc.at("sprint").is_object()) {
        throw config_error("invalid value for key: sprint");
    }
    const json sprint = doc.contains("sprint") ? doc.at("sprint") : json::object();
    require_known_keys(sprint, "sprint.",
                       {"n_exp", "n_obs", "gamma_mode", "bootstrap_resamples", "trial_e_mode"});
    cfg.sprint.n_exp = get_or<std::int64_t>(sprint, "n_exp", "sprint.", 9361);
    cfg.sprint.n_obs = get_or<std::vector<std::int64_t>>(
        sprint, "n_obs", "sprint.",
        full ? std::vector<std::int64_t>{10000, 20000, 50000, 100000}
             : std::vector<std::int64_t>{10000, 100000});
    cfg.sprint.gamma_mode = get_or<std::string>(sprint, "gamma_mode", "sprint.", "table");
    if (cfg.sprint.gamma_mode != "table" && cfg.sprint.gamma_mode != "spread20") {
        throw config_error("sprint.gamma_mode must be \"table\" or \"spread20\"");
    }
    cfg.sprint.bootstrap_resamples =
        get_or<std::int64_t>(sprint, "bootstrap_resamples", "sprint.", 1000);
    const std::string e_mode = get_or<std::string>(sprint, "trial_e_mode", "sprint.", "fixed");
    if (e_mode == "empirical") {
        cfg.sprint.trial_e_mode = EhatMode::Empirical;
    } else if (e_mode == "fixed") {
        cfg.sprint.trial_e_mode = EhatMode::Fixed;
    } else {
        throw config_error("sprint.trial_e_mode must be \"empirical\" or \"fixed\"");
    }

    if (doc.contains("bound") && !doc.at("bound").is_object()) {
        throw config_error("invalid value for key: bound");
    }
    const json bound = doc.contains("bound") ? doc.at("bound") : json::object();
    require_known_keys(bound, "bound.",
                       {"rho", "c", "n", "var_psi_u", "mu_max", "mu_step", "reps"});
    cfg.bound.rho = get_or<std::vector<double>>(bound, "rho", "bound.", {-0.5, 0, 0.25, 0.5});
    cfg.bound.c = get_or<std::vector<double>>(bound, "c", "bound.", {0.5, 1, 2});
    cfg.bound.n = get_or<std::int64_t>(bound, "n", "bound.", 1000);
    cfg.bound.var_psi_u = get_or<double>(bound, "var_psi_u", "bound.", 1.0);
    cfg.bound.mu_max = get_or<double>(bound, "mu_max", "bound.", 0.4);
    cfg.bound.mu_step = get_or<double>(bound, "mu_step", "bound.", 0.02);
    cfg.bound.reps = get_or<std::int64_t>(bound, "reps", "bound.", 5000);
    if (!(cfg.bound.mu_step > 0.0)) throw config_error("bound.mu_step must be > 0");

    if (doc.contains("consistency") && !doc.at("consistency").is_object()) {
        throw config_error("invalid value for key: consistency");
    }
    const json consistency = doc.contains("consistency") ? doc.at("consistency") : json::object();
    require_known_keys(consistency, "consistency.",
                       {"mu", "n_sequence", "unbounded_mu", "unbounded_reps"});
    cfg.consistency.mu = get_or<double>(consistency, "mu", "consistency.", 0.5);
    cfg.consistency.n_sequence = get_or<std::vector<std::int64_t>>(
        consistency, "n_sequence", "consistency.", {500, 2000, 8000});
    cfg.consistency.unbounded_mu = get_or<std::vector<double>>(
        consistency, "unbounded_mu", "consistency.", {0.0, 0.3, 0.7, 1.0, 1.5});
    cfg.consistency.unbounded_reps =
        get_or<std::int64_t>(consistency, "unbounded_reps", "consistency.", 10000);

    if (doc.contains("cutoff") && !doc.at("cutoff").is_object()) {
        throw config_error("invalid value for key: cutoff");
    }
    const json cutoff = doc.contains("cutoff") ? doc.at("cutoff") : json::object();
    require_known_keys(cutoff, "cutoff.", {"reps"});
    cfg.cutoff_reps = get_or<std::int64_t>(cutoff, "reps", "cutoff.", full ? 2000 : 1000);
    if (cfg.cutoff_reps < 1000) throw config_error("cutoff.reps must be >= 1000");

    if (doc.contains("baselines") && !doc.at("baselines").is_object()) {
        throw config_error("invalid value for key: baselines");
    }
    const json baselines = doc.contains("baselines") ? doc.at("baselines") : json::object();
    require_known_keys(baselines, "baselines.",
                       {"anchored_lambda1", "cheng_beta", "hypothesis_gamma"});
    cfg.baselines.anchored_lambda1 =
        get_or<double>(baselines, "anchored_lambda1", "baselines.", 0.5);
    cfg.baselines.cheng_beta = get_or<double>(baselines, "cheng_beta", "baselines.", 0.5);
    cfg.baselines.hypothesis_gamma =
        get_or<double>(baselines, "hypothesis_gamma", "baselines.", 0.05);
    cfg.baselines.validate();

    // canonical resolved form, used for the reproducibility hash
    json canonical;
    canonical["experiment"] = experiment_name(cfg.kind);
    canonical["seed"] = cfg.seed;
    canonical["reps"] = cfg.reps;
    canonical["fidelity"] = full ? "full" : "desk";
    canonical["gaussian"] = {{"n", cfg.gaussian.n},
                             {"var_psi_u", cfg.gaussian.var_psi_u},
                             {"var_psi_b", cfg.gaussian.var_psi_b},
                             {"corr", cfg.gaussian.corr},
                             {"theta_0", cfg.gaussian.theta_0},
                             {"mu_min", cfg.gaussian.mu_min},
                             {"mu_max", cfg.gaussian.mu_max},
                             {"mu_step", cfg.gaussian.mu_step},
                             {"known_moments", cfg.gaussian.known_moments},
                             {"rules", dump_rules(cfg.gaussian.rules)}};
    canonical["grid"] = {{"n", cfg.grid.n},
                         {"var_psi_u", cfg.grid.var_psi_u},
                         {"var_psi_b", cfg.grid.var_psi_b},
                         {"corr", cfg.grid.corr},
                         {"rules", dump_rules(cfg.grid.rules)}};
    canonical["sprint"] = {{"n_exp", cfg.sprint.n_exp},
                           {"n_obs", cfg.sprint.n_obs},
                           {"gamma_mode", cfg.sprint.gamma_mode},
                           {"bootstrap_resamples", cfg.sprint.bootstrap_resamples},
                           {"trial_e_mode", cfg.sprint.trial_e_mode == EhatMode::Empirical ? "empirical"
                                                                               : "fixed"}};
    canonical["bound"] = {{"rho", cfg.bound.rho},     {"c", cfg.bound.c},
                          {"n", cfg.bound.n},         {"var_psi_u", cfg.bound.var_psi_u},
                          {"mu_max", cfg.bound.mu_max}, {"mu_step", cfg.bound.mu_step},
                          {"reps", cfg.bound.reps}};
    canonical["consistency"] = {{"mu", cfg.consistency.mu},
                                {"n_sequence", cfg.consistency.n_sequence},
                                {"unbounded_mu", cfg.consistency.unbounded_mu},
                                {"unbounded_reps", cfg.consistency.unbounded_reps}};
    canonical["cutoff"] = {{"reps", cfg.cutoff_reps}};
    canonical["baselines"] = {{"anchored_lambda1", cfg.baselines.anchored_lambda1},
                              {"cheng_beta", cfg.baselines.cheng_beta},
                              {"hypothesis_gamma", cfg.baselines.hypothesis_gamma}};
    cfg.canonical = canonical.dump();
    cfg.config_hash = fnv1a(cfg.canonical);
    return cfg;
}

} // namespace estfuse
