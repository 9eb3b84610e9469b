#pragma once

#include <cstdint>
#include <string>

namespace estfuse {

// Identifier of the combination rule that produced an estimate.
enum class Rule {
    UnbiasedOnly,
    BiasedOnly,
    Core,
    ShrinkageClipped,
    ShrinkageUnclipped,
    HypothesisFixed,
    HypothesisAdaptive,
    Anchored,
    Cheng,
};

const char* rule_name(Rule rule);
Rule rule_from_name(const std::string& name);

// Variance/covariance of the estimator pair (estimates or population
// values). Every weight and bound in this module is a function of these
// three numbers.
struct MomentEstimates {
    double var_u = 0.0;   // Var(theta_u)
    double var_b = 0.0;   // Var(theta_b)
    double cov_bu = 0.0;  // Cov(theta_b, theta_u)

    // Var(theta_u - theta_b); must stay strictly positive.
    double diff_variance() const { return var_u + var_b - 2.0 * cov_bu; }

    // Throws degenerate_input_error on a non-zero-variance violation and
    // std::invalid_argument if the covariance breaks Cauchy-Schwarz.
    void validate() const;
};

// One Monte Carlo realization of the estimator pair.
struct EstimatorDraw {
    double theta_u = 0.0;
    double theta_b = 0.0;
    MomentEstimates moments;
    std::int64_t n = 0;  // total sample size behind the pair

    void validate() const;
};

struct CombinedEstimate {
    double lambda = 0.0;
    double theta = 0.0;
    Rule rule = Rule::Core;
};

// Dimensionless reparameterization (c, rho) of the moment triple:
// c = sigma_b / sigma_u, rho = correlation (0 when var_b is 0).
struct ShapeParams {
    double c = 0.0;
    double rho = 0.0;

    void validate() const;
    static ShapeParams from_moments(const MomentEstimates& m);
};

// Weight minimizing the closed-form MSE at bias mu:
// (var_u - cov_bu) / (mu^2 + var_u + var_b - 2 cov_bu).
double optimal_lambda(double mu, const MomentEstimates& m);

// lambda^2 (mu^2 + var_b) + (1-lambda)^2 var_u + 2 lambda (1-lambda) cov_bu.
double mse_closed_form(double lambda, double mu, const MomentEstimates& m);

// Plug-in weight with (theta_u - theta_b)^2 standing in for mu^2.
double lambda_hat(const EstimatorDraw& d);

// theta_u + lambda * (theta_b - theta_u).
CombinedEstimate combine(const EstimatorDraw& d, double lambda, Rule rule = Rule::Core);

// Known-variance worst-case MSE ceiling over all biases:
// var_u * (1 + (1/2) |1 - rho c| / sqrt(1 - 2 rho c + c^2))^2.
double worst_case_bound(const ShapeParams& shape, double var_u);

// Estimated-variance ceiling (sigma_u + (1/2) sqrt(E[S^2]))^2 where
// S^2 = (var_u_hat - cov_hat)^2 / (var_u_hat + var_b_hat - 2 cov_hat).
double worst_case_bound_unknown_var(double var_u, double s_second_moment);

struct SupremizingBias {
    double m_star = 0.0;     // bias achieving the supremum
    double sup_value = 0.0;  // supremum of the excess-MSE objective
};

// Bias m maximizing 2 lambda(m) Delta (theta_u - theta_0) + lambda(m)^2 Delta^2
// with Delta = m + theta_b_centered - theta_u, and the attained value.
SupremizingBias supremizing_bias(double theta_u, double theta_0,
                                 double theta_b_centered, const MomentEstimates& m);

} // namespace estfuse
