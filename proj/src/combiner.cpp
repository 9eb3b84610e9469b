#include "estfuse/combiner.hpp"

#include <cmath>
#include <stdexcept>

#include "estfuse/errors.hpp"

namespace estfuse {

namespace {
// Denominators at or below this are treated as assumption violations.
constexpr double kDegenerateFloor = 1e-30;
}

const char* rule_name(Rule rule) {
    switch (rule) {
        case Rule::UnbiasedOnly: return "unbiased_only";
        case Rule::BiasedOnly: return "biased_only";
        case Rule::Core: return "core";
        case Rule::ShrinkageClipped: return "shrinkage_clipped";
        case Rule::ShrinkageUnclipped: return "shrinkage_unclipped";
        case Rule::HypothesisFixed: return "hypothesis_fixed";
        case Rule::HypothesisAdaptive: return "hypothesis_adaptive";
        case Rule::Anchored: return "anchored";
        case Rule::Cheng: return "cheng";
    }
    return "unknown";
}

Rule rule_from_name(const std::string& name) {
    for (Rule r : {Rule::UnbiasedOnly, Rule::BiasedOnly, Rule::Core,
                   Rule::ShrinkageClipped, Rule::ShrinkageUnclipped,
                   Rule::HypothesisFixed, Rule::HypothesisAdaptive,
                   Rule::Anchored, Rule::Cheng}) {
        if (name == rule_name(r)) return r;
    }
    throw std::invalid_argument("unknown combination rule: " + name);
}

void MomentEstimates::validate() const {
    if (!std::isfinite(var_u) || !std::isfinite(var_b) || !std::isfinite(cov_bu)) {
        throw degenerate_input_error("moment estimates must be finite");
    }
    if (var_u <= 0.0) {
        throw degenerate_input_error("var_u must be strictly positive");
    }
    if (var_b < 0.0) {
        throw degenerate_input_error("var_b must be nonnegative");
    }
    if (diff_variance() <= kDegenerateFloor) {
        throw degenerate_input_error("var(theta_u - theta_b) is not strictly positive");
    }
    if (var_b > 0.0) {
        // Cauchy-Schwarz, with slack for rounding in summed estimates.
        const double bound = var_u * var_b;
        if (cov_bu * cov_bu > bound * (1.0 + 1e-9)) {
            throw std::invalid_argument("cov_bu exceeds sqrt(var_u * var_b)");
        }
    }
}

void EstimatorDraw::validate() const {
    if (n < 1) throw std::invalid_argument("sample size must be >= 1");
    if (!std::isfinite(theta_u) || !std::isfinite(theta_b)) {
        throw std::invalid_argument("estimates must be finite");
    }
    moments.validate();
}

void ShapeParams::validate() const {
    if (!(c >= 0.0)) throw std::invalid_argument("c must be >= 0");
    if (!(rho >= -1.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in [-1, 1]");
    if (1.0 - 2.0 * rho * c + c * c <= kDegenerateFloor) {
        throw degenerate_input_error("1 - 2 rho c + c^2 is not strictly positive");
    }
}

ShapeParams ShapeParams::from_moments(const MomentEstimates& m) {
    m.validate();
    ShapeParams s;
    s.c = std::sqrt(m.var_b / m.var_u);
    s.rho = (m.var_b > 0.0) ? m.cov_bu / std::sqrt(m.var_u * m.var_b) : 0.0;
    return s;
}

double optimal_lambda(double mu, const MomentEstimates& m) {
    m.validate();
    return (m.var_u - m.cov_bu) / (mu * mu + m.diff_variance());
}

double mse_closed_form(double lambda, double mu, const MomentEstimates& m) {
    m.validate();
    return lambda * lambda * (mu * mu + m.var_b) +
           (1.0 - lambda) * (1.0 - lambda) * m.var_u +
           2.0 * lambda * (1.0 - lambda) * m.cov_bu;
}

double lambda_hat(const EstimatorDraw& d) {
    d.validate();
    const double diff = d.theta_u - d.theta_b;
    const double denom = diff * diff + d.moments.diff_variance();
    if (denom <= kDegenerateFloor) {
        throw degenerate_input_error("lambda_hat denominator is degenerate");
    }
    return (d.moments.var_u - d.moments.cov_bu) / denom;
}

CombinedEstimate combine(const EstimatorDraw& d, double lambda, Rule rule) {
    if (!std::isfinite(lambda)) throw std::invalid_argument("lambda must be finite");
    CombinedEstimate out;
    out.lambda = lambda;
    out.theta = d.theta_u + lambda * (d.theta_b - d.theta_u);
    out.rule = rule;
    return out;
}

double worst_case_bound(const ShapeParams& shape, double var_u) {
    shape.validate();
    if (!(var_u > 0.0)) throw std::invalid_argument("var_u must be strictly positive");
    const double rc = shape.rho * shape.c;
    const double ratio = std::fabs(1.0 - rc) / std::sqrt(1.0 - 2.0 * rc + shape.c * shape.c);
    const double factor = 1.0 + 0.5 * ratio;
    return var_u * factor * factor;
}

double worst_case_bound_unknown_var(double var_u, double s_second_moment) {
    if (!(var_u > 0.0)) throw std::invalid_argument("var_u must be strictly positive");
    if (s_second_moment < 0.0) throw std::invalid_argument("E[S^2] must be nonnegative");
    const double root = std::sqrt(var_u) + 0.5 * std::sqrt(s_second_moment);
    return root * root;
}

SupremizingBias supremizing_bias(double theta_u, double theta_0,
                                 double theta_b_centered, const MomentEstimates& m) {
    m.validate();
    const double su = m.var_u - m.cov_bu;
    const double d = m.diff_variance();
    const double root = std::sqrt(d);

    SupremizingBias out;
    const double sign = (su * (theta_u - theta_0) >= 0.0) ? 1.0 : -1.0;
    out.m_star = (theta_u - theta_b_centered) + sign * root;
    // Optimal value with the squared numerator in the second term; the
    // unsquared variant does not satisfy the (a + b)^2 factorization the
    // bound rests on.
    out.sup_value = std::fabs(su) * std::fabs(theta_u - theta_0) / root +
                    su * su / (4.0 * d);
    return out;
}

} // namespace estfuse
