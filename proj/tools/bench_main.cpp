// Compares the serial reference loop against the OpenMP kernels on a
// mid-size scenario and verifies the outputs are identical.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "estfuse/simgauss.hpp"

using namespace estfuse;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

} // namespace

int main(int argc, char** argv) {
    std::int64_t reps = 2000;
    std::int64_t n = 1000;
    int mu_points = 31;
    if (argc > 1) reps = std::atoll(argv[1]);
    if (argc > 2) n = std::atoll(argv[2]);
    if (argc > 3) mu_points = std::atoi(argv[3]);

    GaussianScenario scn;
    scn.id = "bench";
    scn.n = n;
    scn.reps = reps;
    scn.seed = 42;
    for (int i = 0; i < mu_points; ++i) scn.mu_grid.push_back(0.01 * i);

    RuleSet rules;
    rules.rules = {Rule::Core, Rule::ShrinkageClipped, Rule::Anchored, Rule::Cheng};

    std::printf("scenario: reps=%lld n=%lld mu_points=%d\n",
                static_cast<long long>(reps), static_cast<long long>(n), mu_points);

    EngineOptions serial;
    serial.policy = ExecutionPolicy::Serial;
    auto t0 = std::chrono::steady_clock::now();
    const ScenarioResult ref = run_scenario(scn, rules, serial);
    const double serial_s = seconds_since(t0);
    std::printf("serial reference: %.3f s\n", serial_s);

    EngineOptions parallel;
    parallel.policy = ExecutionPolicy::OpenMP;
    t0 = std::chrono::steady_clock::now();
    const ScenarioResult par = run_scenario(scn, rules, parallel);
    const double parallel_s = seconds_since(t0);
    std::printf("openmp kernels:   %.3f s (speedup %.2fx)\n", parallel_s,
                serial_s / parallel_s);

    if (ref.curve.size() != par.curve.size()) {
        std::printf("MISMATCH: curve sizes differ\n");
        return 1;
    }
    for (std::size_t i = 0; i < ref.curve.size(); ++i) {
        if (ref.curve[i].mse != par.curve[i].mse ||
            ref.curve[i].relative_mse != par.curve[i].relative_mse) {
            std::printf("MISMATCH at point %zu\n", i);
            return 1;
        }
    }
    std::printf("outputs identical across policies\n");
    return 0;
}
