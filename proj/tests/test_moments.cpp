#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "estfuse/errors.hpp"
#include "estfuse/moments.hpp"
#include "estfuse/rng.hpp"

using namespace estfuse;

TEST_CASE("two-point symmetric panel") {
    InfluencePanel panel;
    panel.samples = {{1.0, -1.0}, {-1.0, 1.0}};
    const MomentEstimates m = estimate_moments(panel);
    CHECK(m.var_u == doctest::Approx(0.5));
    CHECK(m.var_b == doctest::Approx(0.5));
    CHECK(m.cov_bu == doctest::Approx(-0.5));
}

TEST_CASE("constant difference panel is fine, equal panel is degenerate") {
    InfluencePanel panel;
    panel.samples.assign(10, InfluenceSample{2.0, 0.0});
    const MomentEstimates m = estimate_moments(panel);
    CHECK(m.var_b == 0.0);
    CHECK(m.cov_bu == 0.0);
    CHECK(m.var_u == doctest::Approx(4.0 / 10.0));

    InfluencePanel equal;
    equal.samples.assign(10, InfluenceSample{2.0, 2.0});
    CHECK_THROWS_AS(estimate_moments(equal), degenerate_input_error);

    InfluencePanel tiny;
    tiny.samples = {{1.0, 0.0}};
    CHECK_THROWS_AS(estimate_moments(tiny), std::invalid_argument);
}

TEST_CASE("law of large numbers at n = 10^4") {
    CounterRng rng(stream_key({99, 0}));
    InfluencePanel panel;
    panel.samples.resize(10000);
    for (auto& s : panel.samples) {
        s.phi_u = rng.next_normal();
        s.phi_b = rng.next_normal();
    }
    const MomentEstimates m = estimate_moments(panel);
    CHECK(std::fabs(m.var_u - 1e-4) < 5e-6);
    CHECK(std::fabs(m.var_b - 1e-4) < 5e-6);
    CHECK(std::fabs(m.cov_bu) < 5e-6);
}

TEST_CASE("scaling and permutation invariance") {
    CounterRng rng(stream_key({99, 1}));
    InfluencePanel panel;
    panel.samples.resize(257);
    for (auto& s : panel.samples) {
        s.phi_u = rng.next_normal();
        s.phi_b = 0.5 * s.phi_u + rng.next_normal();
    }
    const MomentEstimates base = estimate_moments(panel);

    InfluencePanel scaled = panel;
    const double k = 3.25;
    for (auto& s : scaled.samples) {
        s.phi_u *= k;
        s.phi_b *= k;
    }
    const MomentEstimates ms = estimate_moments(scaled);
    CHECK(ms.var_u == doctest::Approx(k * k * base.var_u).epsilon(1e-12));
    CHECK(ms.var_b == doctest::Approx(k * k * base.var_b).epsilon(1e-12));
    CHECK(ms.cov_bu == doctest::Approx(k * k * base.cov_bu).epsilon(1e-12));

    InfluencePanel shuffled = panel;
    // deterministic permutation: Fisher-Yates with our generator
    CounterRng perm(stream_key({99, 2}));
    for (std::size_t i = shuffled.samples.size(); i > 1; --i) {
        std::swap(shuffled.samples[i - 1],
                  shuffled.samples[perm.next_u64() % i]);
    }
    const MomentEstimates mp = estimate_moments(shuffled);
    CHECK(mp.var_u == doctest::Approx(base.var_u).epsilon(1e-12));
    CHECK(mp.var_b == doctest::Approx(base.var_b).epsilon(1e-12));
    CHECK(mp.cov_bu == doctest::Approx(base.cov_bu).epsilon(1e-12));
}

TEST_CASE("n * var_u concentrates as n grows") {
    // Empirical SD of n * var_hat across replications should shrink like
    // n^-1/2, within a factor of two.
    auto sd_of_scaled = [](std::int64_t n, std::uint64_t salt) {
        const int reps = 400;
        std::vector<double> values;
        for (int r = 0; r < reps; ++r) {
            CounterRng rng(stream_key({4242, salt, static_cast<std::uint64_t>(r)}));
            InfluencePanel panel;
            panel.samples.resize(static_cast<std::size_t>(n));
            for (auto& s : panel.samples) {
                s.phi_u = rng.next_normal();
                s.phi_b = rng.next_normal();
            }
            values.push_back(static_cast<double>(n) * estimate_moments(panel).var_u);
        }
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= reps;
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        return std::sqrt(ss / reps);
    };
    const double sd_small = sd_of_scaled(500, 1);
    const double sd_large = sd_of_scaled(8000, 2);
    const double expected_ratio = std::sqrt(8000.0 / 500.0);
    const double ratio = sd_small / sd_large;
    CHECK(ratio > expected_ratio / 2.0);
    CHECK(ratio < expected_ratio * 2.0);
}

TEST_CASE("ipw_influence examples") {
    // residual and centering both vanish
    CHECK(ipw_influence(0.3, true, 0.4, 0.3, 0.1, 0.2) == doctest::Approx(0.0));
    CHECK(ipw_influence(1.0, true, 0.5, 0.5, 0.5, 0.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(ipw_influence(1.0, true, 0.0, 0.5, 0.5, 0.0), positivity_error);
    CHECK_THROWS_AS(ipw_influence(1.0, true, 1.0, 0.5, 0.5, 0.0), positivity_error);
}
