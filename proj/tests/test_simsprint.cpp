#include <doctest.h>

#include <cmath>

#include "estfuse/errors.hpp"
#include "estfuse/rng.hpp"
#include "estfuse/simsprint.hpp"

using namespace estfuse;

TEST_CASE("model self-consistency: implied effect") {
    SprintModel model;
    CHECK(model.true_ate() == doctest::Approx(-0.01644).epsilon(1e-10));
    CHECK(std::fabs(model.true_ate() - (-0.01644)) < 1e-5);
}

TEST_CASE("observational assignment probabilities and odds ratio") {
    SprintModel model;
    model.gamma = 0.0;
    CHECK(model.treat_prob_given_u(true) == doctest::Approx(0.5));
    CHECK(model.treat_prob_given_u(false) == doctest::Approx(0.5));

    model.gamma = 2.0;
    const double p1 = model.treat_prob_given_u(true);
    const double p0 = model.treat_prob_given_u(false);
    CHECK(p1 == doctest::Approx(0.7310585786300049).epsilon(1e-12));
    CHECK(p0 == doctest::Approx(0.2689414213699951).epsilon(1e-12));
    const double odds_ratio = (p1 / (1 - p1)) / (p0 / (1 - p0));
    CHECK(odds_ratio == doctest::Approx(std::exp(2.0)).epsilon(1e-10));
}

TEST_CASE("trial simulation: arms balanced, gamma irrelevant") {
    SprintModel model;
    model.gamma = 1.7;  // must not leak into the trial arm
    const SprintDataset a = simulate_trial(model, stream_key({5, 0}));
    SprintModel no_conf = model;
    no_conf.gamma = 0.0;
    const SprintDataset b = simulate_trial(no_conf, stream_key({5, 0}));
    REQUIRE(a.t.size() == static_cast<std::size_t>(model.n_exp));
    for (std::size_t i = 0; i < a.t.size(); ++i) {
        REQUIRE(a.t[i] == b.t[i]);
        REQUIRE(a.y[i] == b.y[i]);
    }

    std::int64_t treated = 0;
    for (unsigned char t : a.t) treated += t;
    const double frac = static_cast<double>(treated) / static_cast<double>(model.n_exp);
    CHECK(std::fabs(frac - 0.5) < 3.0 / std::sqrt(static_cast<double>(model.n_exp)));
}

TEST_CASE("empirical stratum odds ratio stays within the Rosenbaum interval") {
    SprintModel model;
    model.gamma = 1.2;
    model.n_obs = 200000;
    const SprintDataset data = simulate_observational(model, stream_key({5, 1}));
    double count[2][2] = {{0, 0}, {0, 0}};  // [u][t]
    for (std::size_t i = 0; i < data.t.size(); ++i) {
        count[data.u[i]][data.t[i]] += 1.0;
    }
    const double or_hat = (count[1][1] / count[1][0]) / (count[0][1] / count[0][0]);
    const double big_gamma = std::exp(model.gamma);
    CHECK(or_hat <= big_gamma * 1.1);
    CHECK(or_hat >= 1.0 / big_gamma);
    // and it concentrates near exp(gamma) itself
    CHECK(or_hat == doctest::Approx(big_gamma).epsilon(0.1));
}

TEST_CASE("ipw examples") {
    SprintDataset all_zero;
    all_zero.t = {1, 0, 1, 0};
    all_zero.y = {0, 0, 0, 0};
    all_zero.u = {0, 0, 0, 0};
    const IpwEstimate zero = ipw_ate(all_zero);
    CHECK(zero.theta == 0.0);
    CHECK(zero.var == 0.0);

    SprintDataset two;
    two.t = {1, 0};
    two.y = {1, 0};
    two.u = {0, 0};
    const IpwEstimate pair = ipw_ate(two);
    CHECK(pair.e_hat == doctest::Approx(0.5));
    CHECK(pair.theta == doctest::Approx(1.0));
    CHECK(pair.var == doctest::Approx(0.0));

    SprintDataset onearm;
    onearm.t = {1, 1};
    onearm.y = {1, 0};
    onearm.u = {0, 0};
    CHECK_THROWS_AS(ipw_ate(onearm), positivity_error);
}

TEST_CASE("ipw with empirical e equals the arm-mean difference") {
    SprintModel model;
    model.n_obs = 5000;
    model.gamma = 0.8;
    const SprintDataset data = simulate_observational(model, stream_key({5, 2}));
    const IpwEstimate est = ipw_ate(data);
    CHECK(est.theta == doctest::Approx(est.mu1_hat - est.mu0_hat).epsilon(1e-12));
}

TEST_CASE("unconfounded observational IPW is unbiased") {
    SprintModel model;
    model.gamma = 0.0;
    model.n_obs = 20000;
    const int reps = 400;
    double sum = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
        const SprintDataset data =
            simulate_observational(model, stream_key({6, static_cast<std::uint64_t>(rep)}));
        sum += ipw_ate(data).theta;
    }
    const double mean = sum / reps;
    // SE of the mean ~ sd(theta_b)/sqrt(reps) ~ (3.3e-3)/20 ~ 1.7e-4
    CHECK(std::fabs(mean - model.true_ate()) < 3.0 * 1.7e-4);
}

TEST_CASE("plug-in variance tracks the Monte Carlo variance of theta_u") {
    SprintModel model;
    const int reps = 3000;
    double sum = 0.0, sum_sq = 0.0, var_sum = 0.0;
    for (int rep = 0; rep < reps; ++rep) {
        const SprintDataset data =
            simulate_trial(model, stream_key({7, static_cast<std::uint64_t>(rep)}));
        const IpwEstimate est = ipw_ate(data);
        sum += est.theta;
        sum_sq += est.theta * est.theta;
        var_sum += est.var;
    }
    const double mean = sum / reps;
    const double mc_var = sum_sq / reps - mean * mean;
    const double plug_in = var_sum / reps;
    CHECK(plug_in == doctest::Approx(mc_var).epsilon(0.05));
}

TEST_CASE("gamma sweep cell structure and invariants") {
    SprintModel model;
    model.n_exp = 2000;  // smaller trial keeps the unit test quick

    SprintSweepSettings settings;
    settings.gamma_grid = {0.0, 1.0, 2.0};
    settings.n_obs_set = {4000};
    settings.reps = 400;
    settings.bootstrap_resamples = 200;
    settings.seed = 31;

    const auto results = run_gamma_sweep(model, settings);
    REQUIRE(results.size() == 3);
    double prev_bias = -1.0;
    for (const GammaSweepResult& r : results) {
        CHECK(r.big_gamma == doctest::Approx(std::exp(r.gamma)));
        CHECK(r.ci_low_unbiased <= r.rmse_unbiased);
        CHECK(r.rmse_unbiased <= r.ci_high_unbiased);
        CHECK(r.ci_low_combined <= r.rmse_combined);
        CHECK(r.rmse_combined <= r.ci_high_combined);
        CHECK(r.excluded_reps == 0);
        // absolute bias of the biased estimator is nondecreasing in gamma
        const double bias = std::fabs(r.mean_bias_b);
        CHECK(bias >= prev_bias - 3.0 * 2e-4);
        prev_bias = bias;
    }

    // unbiased RMSE does not depend on gamma beyond Monte Carlo noise
    const double se = results[0].rmse_unbiased / std::sqrt(2.0 * settings.reps);
    CHECK(std::fabs(results[0].rmse_unbiased - results[2].rmse_unbiased) < 3.0 * se * 1.5);
}

TEST_CASE("crossover from the isotonic fit of paired differences") {
    auto cell = [](double gamma, double rmse_u, double rmse_c) {
        GammaSweepResult r;
        r.gamma = gamma;
        r.n_obs = 10000;
        r.rmse_unbiased = rmse_u;
        r.rmse_combined = rmse_c;
        return r;
    };
    // clean monotone curve crossing between 0.9 and 1.0
    std::vector<GammaSweepResult> cells;
    for (int i = 0; i <= 20; ++i) {
        const double gamma = 0.1 * i;
        cells.push_back(cell(gamma, 5.0, 5.0 + 0.5 * (gamma - 0.95)));
    }
    CHECK(sweep_crossover_gamma(cells) == doctest::Approx(0.9));

    // a single noisy dip below the line beyond the crossing must not move it
    std::vector<GammaSweepResult> noisy = cells;
    noisy[15].rmse_combined = 4.99;  // gamma = 1.5 spuriously below
    CHECK(sweep_crossover_gamma(noisy) == doctest::Approx(0.9));

    // combined never beats unbiased
    std::vector<GammaSweepResult> never;
    for (int i = 0; i <= 5; ++i) never.push_back(cell(0.1 * i, 5.0, 5.1 + 0.01 * i));
    CHECK(sweep_crossover_gamma(never) == -1.0);

    // mixed n_obs slices are rejected
    std::vector<GammaSweepResult> mixed = cells;
    mixed[3].n_obs = 20000;
    CHECK_THROWS_AS(sweep_crossover_gamma(mixed), std::invalid_argument);
}

TEST_CASE("gamma grid helpers") {
    const auto spread = sprint_gamma_spread20();
    REQUIRE(spread.size() == 20);
    CHECK(spread.front() == 0.0);
    CHECK(spread.back() == doctest::Approx(2.0));

    const auto table = sprint_gamma_table_grid();
    REQUIRE(table.size() == 41);
    CHECK(table[1] == doctest::Approx(0.05));
    CHECK(table.back() == doctest::Approx(2.0));
}
