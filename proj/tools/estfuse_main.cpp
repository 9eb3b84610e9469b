#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "estfuse/config.hpp"
#include "estfuse/errors.hpp"
#include "estfuse/runner.hpp"

namespace {

struct CliArgs {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> reps;
    std::optional<int> workers;
    std::optional<std::string> out_dir;
    std::optional<std::string> fidelity;
};

void add_common_options(CLI::App* cmd, CliArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON config file");
    cmd->add_option("--seed", args.seed, "global random seed (U64)");
    cmd->add_option("--reps", args.reps, "Monte Carlo replications");
    cmd->add_option("--workers", args.workers, "worker threads (0 = auto)");
    cmd->add_option("--out", args.out_dir, "output directory");
    cmd->add_option("--fidelity", args.fidelity, "desk or full")
        ->check(CLI::IsMember({"desk", "full"}));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Combination-estimator simulations and reports"};
    app.require_subcommand(0, 1);

    CliArgs args;
    std::string chosen_experiment;
    for (const char* name : {"gaussian-curve", "gaussian-grid", "sprint", "bound-check",
                             "consistency", "cutoff-table"}) {
        CLI::App* cmd = app.add_subcommand(name);
        add_common_options(cmd, args);
        cmd->callback([name, &chosen_experiment] { chosen_experiment = name; });
    }
    add_common_options(&app, args);

    CLI11_PARSE(app, argc, argv);

    estfuse::ConfigOverrides overrides;
    if (!chosen_experiment.empty()) overrides.experiment = chosen_experiment;
    overrides.seed = args.seed;
    overrides.reps = args.reps;
    overrides.out_dir = args.out_dir;
    overrides.fidelity = args.fidelity;

    // --workers beats the config value; ESTFUSE_WORKERS is the fallback
    // when neither is given.
    overrides.workers = args.workers;
    std::optional<int> env_workers;
    if (const char* env = std::getenv("ESTFUSE_WORKERS")) {
        char* end = nullptr;
        const long parsed = std::strtol(env, &end, 10);
        if (end && *end == '\0' && parsed >= 0) {
            env_workers = static_cast<int>(parsed);
        } else {
            std::cerr << "{\"error\":\"invalid ESTFUSE_WORKERS value\"}\n";
            return 2;
        }
    }

    estfuse::RunConfig config;
    try {
        config = args.config_path.empty()
                     ? estfuse::load_config_text("", overrides)
                     : estfuse::load_config(args.config_path, overrides);
        if (!args.workers && env_workers) config.workers = *env_workers;
    } catch (const estfuse::config_error& e) {
        std::cerr << "{\"error\":\"config error\",\"detail\":\"" << e.what() << "\"}\n";
        return 2;
    }

    return estfuse::run(config);
}
