#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "estfuse/baselines.hpp"
#include "estfuse/combiner.hpp"
#include "estfuse/simsprint.hpp"

namespace estfuse {

enum class ExperimentKind {
    GaussianCurve,
    GaussianGrid,
    Sprint,
    BoundCheck,
    Consistency,
    CutoffTable,
};

const char* experiment_name(ExperimentKind kind);
ExperimentKind experiment_from_name(const std::string& name);

enum class Fidelity { Desk, Full };

struct GaussianCurveConfig {
    std::int64_t n = 1000;
    double var_psi_u = 1.0;
    double var_psi_b = 1.0;
    double corr = 0.0;
    double theta_0 = 1.0;
    double mu_min = 0.0;
    double mu_max = 1.5;
    double mu_step = 0.01;
    std::vector<Rule> rules;
    bool known_moments = false;
};

struct GridConfig {
    std::vector<std::int64_t> n;
    std::vector<double> var_psi_u;
    std::vector<double> var_psi_b;
    std::vector<double> corr;
    std::vector<Rule> rules;
};

struct SprintConfig {
    std::int64_t n_exp = 9361;
    std::vector<std::int64_t> n_obs;
    std::string gamma_mode = "table";  // "table" (0:0.05:2) or "spread20"
    std::int64_t bootstrap_resamples = 1000;
    EhatMode trial_e_mode = EhatMode::Fixed;
};

struct BoundConfig {
    std::vector<double> rho;
    std::vector<double> c;
    std::int64_t n = 1000;
    double var_psi_u = 1.0;
    double mu_max = 0.4;
    double mu_step = 0.02;
    std::int64_t reps = 5000;
};

struct ConsistencyConfig {
    double mu = 0.5;
    std::vector<std::int64_t> n_sequence;
    std::vector<double> unbounded_mu;
    std::int64_t unbounded_reps = 10000;
};

// Fully resolved run description. Flag overrides happen before
// resolution, so identical (config, overrides) pairs hash identically.
struct RunConfig {
    ExperimentKind kind = ExperimentKind::GaussianCurve;
    std::uint64_t seed = 42;
    std::int64_t reps = 2000;
    std::int64_t cutoff_reps = 1000;
    int workers = 0;
    std::string out_dir = "results";
    Fidelity fidelity = Fidelity::Desk;
    GaussianCurveConfig gaussian;
    GridConfig grid;
    SprintConfig sprint;
    BoundConfig bound;
    ConsistencyConfig consistency;
    BaselineConfig baselines;
    std::string canonical;        // canonical serialized resolved config
    std::uint64_t config_hash = 0;
};

// Command-line values layered on top of the file.
struct ConfigOverrides {
    std::optional<std::string> experiment;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> reps;
    std::optional<int> workers;
    std::optional<std::string> out_dir;
    std::optional<std::string> fidelity;
};

// Parses, merges, resolves defaults, validates. Rejects unknown keys,
// duplicate keys, and type mismatches with messages naming the offending
// key. Throws config_error.
RunConfig load_config(const std::string& path, const ConfigOverrides& overrides = {});

// Same pipeline for an in-memory document ("" means an absent file).
RunConfig load_config_text(const std::string& text, const ConfigOverrides& overrides = {});

std::vector<double> make_grid(double min, double max, double step);

} // namespace estfuse
