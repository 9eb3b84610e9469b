#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "estfuse/combiner.hpp"
#include "estfuse/errors.hpp"
#include "estfuse/rng.hpp"

using namespace estfuse;

namespace {

MomentEstimates moments(double var_u, double var_b, double cov_bu) {
    return MomentEstimates{var_u, var_b, cov_bu};
}

// Random valid moment triple with unit-scale variances.
MomentEstimates random_moments(CounterRng& rng) {
    while (true) {
        MomentEstimates m;
        m.var_u = 0.1 + 1.9 * rng.next_uniform();
        m.var_b = 2.0 * rng.next_uniform();
        const double rho = 2.0 * rng.next_uniform() - 1.0;
        m.cov_bu = rho * std::sqrt(m.var_u * m.var_b);
        if (m.diff_variance() > 1e-3) return m;
    }
}

// Excess-MSE objective from the supremum argument:
// f(m) = 2 lambda(m) Delta (theta_u - theta_0) + lambda(m)^2 Delta^2.
double sup_objective(double m, double theta_u, double theta_0, double theta_b_centered,
                     const MomentEstimates& mom) {
    const double delta = m + theta_b_centered - theta_u;
    const double lam = (mom.var_u - mom.cov_bu) / (delta * delta + mom.diff_variance());
    return 2.0 * lam * delta * (theta_u - theta_0) + lam * lam * delta * delta;
}

} // namespace

TEST_CASE("optimal_lambda closed-form examples") {
    CHECK(optimal_lambda(0.0, moments(1, 1, 0)) == doctest::Approx(0.5));
    CHECK(optimal_lambda(3.7, moments(1, 2, 1)) == 0.0);  // cov_bu == var_u
    CHECK(optimal_lambda(1.0, moments(1, 1, 0)) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("mse_closed_form examples") {
    CHECK(mse_closed_form(0.0, 0.3, moments(2.0, 1.0, 0.2)) == doctest::Approx(2.0));
    CHECK(mse_closed_form(1.0, 0.5, moments(2.0, 1.0, 0.2)) == doctest::Approx(0.25 + 1.0));
    // hand evaluation: (1/9)(1 + 1) + (4/9)(1) + 0 = 2/3
    CHECK(mse_closed_form(1.0 / 3.0, 1.0, moments(1, 1, 0)) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("optimal_lambda minimizes the closed-form MSE on a lambda grid") {
    CounterRng rng(stream_key({2024, 1}));
    for (int trial = 0; trial < 1000; ++trial) {
        const MomentEstimates m = random_moments(rng);
        const double mu = 3.0 * rng.next_uniform();
        const double best_lambda = optimal_lambda(mu, m);
        const double best = mse_closed_form(best_lambda, mu, m);
        double grid_min = 1e300;
        for (int i = 0; i <= 5000; ++i) {
            const double lambda = -2.0 + 0.001 * i;
            grid_min = std::min(grid_min, mse_closed_form(lambda, mu, m));
        }
        REQUIRE(best <= grid_min + 1e-12);
    }
}

TEST_CASE("lambda_hat examples and degenerate input") {
    EstimatorDraw d{1.0, 1.0, moments(1, 1, 0), 10};
    CHECK(lambda_hat(d) == doctest::Approx(0.5));

    d = EstimatorDraw{1.0, 1.5, moments(0.25, 0.25, 0), 10};
    CHECK(lambda_hat(d) == doctest::Approx(1.0 / 3.0));

    d = EstimatorDraw{0.3, -0.8, moments(1.0, 2.0, 1.0), 10};
    CHECK(lambda_hat(d) == 0.0);  // cov_bu == var_u

    EstimatorDraw degenerate{1.0, 1.0, moments(1.0, 1.0, 1.0), 10};
    CHECK_THROWS_AS(lambda_hat(degenerate), degenerate_input_error);
}

TEST_CASE("lambda_hat sign and magnitude bounds") {
    CounterRng rng(stream_key({2024, 2}));
    for (int trial = 0; trial < 1000; ++trial) {
        const MomentEstimates m = random_moments(rng);
        EstimatorDraw d;
        d.theta_u = 2.0 * rng.next_uniform() - 1.0;
        d.theta_b = 2.0 * rng.next_uniform() - 1.0;
        d.moments = m;
        d.n = 100;
        const double lam = lambda_hat(d);
        REQUIRE(std::isfinite(lam));
        if (m.cov_bu <= m.var_u) REQUIRE(lam >= 0.0);
        REQUIRE(std::fabs(lam) <=
                std::fabs(m.var_u - m.cov_bu) / m.diff_variance() + 1e-15);
    }
}

TEST_CASE("combine is the affine blend") {
    EstimatorDraw d{1.0, 1.5, moments(1, 1, 0), 10};
    CHECK(combine(d, 0.0).theta == 1.0);
    CHECK(combine(d, 1.0).theta == 1.5);
    CHECK(combine(d, 1.0 / 3.0).theta == doctest::Approx(7.0 / 6.0));

    // decomposition agrees with lambda*theta_b + (1-lambda)*theta_u up to
    // one rounding step
    CounterRng rng(stream_key({2024, 3}));
    for (int trial = 0; trial < 200; ++trial) {
        const double lambda = 4.0 * rng.next_uniform() - 2.0;
        d.theta_u = 10.0 * rng.next_uniform() - 5.0;
        d.theta_b = 10.0 * rng.next_uniform() - 5.0;
        const double got = combine(d, lambda).theta;
        const double other_form = lambda * d.theta_b + (1.0 - lambda) * d.theta_u;
        REQUIRE(got == doctest::Approx(other_form).epsilon(1e-14));
    }
}

TEST_CASE("worst_case_bound closed form") {
    CHECK(worst_case_bound(ShapeParams{1.0, 0.0}, 1.0) ==
          doctest::Approx(1.8321067811865476).epsilon(1e-12));
    // rho*c == 1 away from the degenerate corner: ceiling collapses to var_u
    CHECK(worst_case_bound(ShapeParams{2.0, 0.5}, 3.0) == 3.0);
    CHECK(worst_case_bound(ShapeParams{0.0, 0.0}, 4.0) == doctest::Approx(9.0));

    CHECK_THROWS_AS(worst_case_bound(ShapeParams{0.5, 0.0}, -1.0), std::invalid_argument);
    // rho = 1, c = 1 violates the non-zero-variance assumption outright
    CHECK_THROWS_AS(worst_case_bound(ShapeParams{1.0, 1.0}, 1.0), degenerate_input_error);
}

TEST_CASE("bound chain: ceiling never drops below var_u, equality iff rho c = 1") {
    CounterRng rng(stream_key({2024, 4}));
    for (int trial = 0; trial < 1000; ++trial) {
        ShapeParams s;
        s.c = 3.0 * rng.next_uniform();
        s.rho = 2.0 * rng.next_uniform() - 1.0;
        if (1.0 - 2.0 * s.rho * s.c + s.c * s.c <= 1e-6) continue;
        const double var_u = 0.2 + rng.next_uniform();
        const double bound = worst_case_bound(s, var_u);
        REQUIRE(bound >= var_u - 1e-15);
        if (std::fabs(s.rho * s.c - 1.0) > 1e-9) {
            REQUIRE(bound > var_u);
        }
    }
}

TEST_CASE("worst_case_bound_unknown_var") {
    CHECK(worst_case_bound_unknown_var(1.7, 0.0) == doctest::Approx(1.7));
    CHECK(worst_case_bound_unknown_var(1.0, 1.0) == doctest::Approx(2.25));
    CHECK_THROWS_AS(worst_case_bound_unknown_var(1.0, -0.1), std::invalid_argument);

    // Deterministic moment estimates equal to the truth collapse the
    // unknown-variance bound onto the known-variance one.
    CounterRng rng(stream_key({2024, 5}));
    for (int trial = 0; trial < 500; ++trial) {
        const MomentEstimates m = random_moments(rng);
        const ShapeParams shape = ShapeParams::from_moments(m);
        const double su = m.var_u - m.cov_bu;
        const double s_second = su * su / m.diff_variance();
        CHECK(worst_case_bound_unknown_var(m.var_u, s_second) ==
              doctest::Approx(worst_case_bound(shape, m.var_u)).epsilon(1e-12));
    }
}

TEST_CASE("supremizing bias: closed-form examples") {
    // first term vanishes at theta_u == theta_0
    const MomentEstimates m = moments(1.5, 1.0, 0.25);
    const SupremizingBias at_zero = supremizing_bias(0.7, 0.7, 0.0, m);
    CHECK(at_zero.sup_value ==
          doctest::Approx((1.5 - 0.25) * (1.5 - 0.25) / (4.0 * m.diff_variance())));

    const SupremizingBias hand = supremizing_bias(0.5, 0.0, 0.0, moments(1, 1, 0));
    CHECK(hand.m_star == doctest::Approx(0.5 + std::sqrt(2.0)).epsilon(1e-12));
    CHECK(hand.sup_value == doctest::Approx(0.5 / std::sqrt(2.0) + 0.125).epsilon(1e-12));

    // cov_bu == var_u: weight is identically zero
    const SupremizingBias flat = supremizing_bias(0.9, 0.1, 0.3, moments(1.0, 2.0, 1.0));
    CHECK(flat.sup_value == 0.0);
    for (double probe = -20.0; probe <= 20.0; probe += 0.25) {
        REQUIRE(sup_objective(probe, 0.9, 0.1, 0.3, moments(1.0, 2.0, 1.0)) <= 0.0);
    }
}

TEST_CASE("supremizing bias dominates a dense grid search") {
    // hand example first: dense scan with step 1e-4 must agree to 1e-6
    {
        const MomentEstimates m = moments(1, 1, 0);
        double best = -1e300;
        for (int i = 0; i <= 400000; ++i) {
            const double probe = -20.0 + 1e-4 * i;
            best = std::max(best, sup_objective(probe, 0.5, 0.0, 0.0, m));
        }
        const SupremizingBias sup = supremizing_bias(0.5, 0.0, 0.0, m);
        CHECK(sup.sup_value == doctest::Approx(best).epsilon(1e-6));
        CHECK(sup.sup_value >= best - 1e-12);
    }

    CounterRng rng(stream_key({2024, 6}));
    for (int trial = 0; trial < 1000; ++trial) {
        const MomentEstimates m = random_moments(rng);
        const double theta_u = 2.0 * rng.next_uniform() - 1.0;
        const double theta_0 = 2.0 * rng.next_uniform() - 1.0;
        const double theta_bc = 2.0 * rng.next_uniform() - 1.0;
        const SupremizingBias sup = supremizing_bias(theta_u, theta_0, theta_bc, m);
        double best = -1e300;
        for (int i = 0; i < 100000; ++i) {
            const double probe = -20.0 + 4e-4 * i;
            best = std::max(best, sup_objective(probe, theta_u, theta_0, theta_bc, m));
        }
        REQUIRE(sup.sup_value >= best - 1e-6);
        // the claimed optimizer attains the claimed value
        REQUIRE(sup_objective(sup.m_star, theta_u, theta_0, theta_bc, m) ==
                doctest::Approx(sup.sup_value).epsilon(1e-9));
    }
}

TEST_CASE("moment validation rejects assumption violations") {
    CHECK_THROWS_AS(moments(0.0, 1.0, 0.0).validate(), degenerate_input_error);
    CHECK_THROWS_AS(moments(1.0, 1.0, 1.0).validate(), degenerate_input_error);
    CHECK_THROWS_AS(moments(1.0, 1.0, 1.5).validate(), std::invalid_argument);
    CHECK_NOTHROW(moments(1.0, 0.0, 0.0).validate());
}
