#include "estfuse/simsprint.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "estfuse/errors.hpp"
#include "estfuse/moments.hpp"
#include "estfuse/numerics.hpp"
#include "estfuse/rng.hpp"
#include "estfuse/simgauss.hpp"

namespace estfuse {

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_prob(double p, const char* name) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument(std::string(name) + " must lie strictly in (0, 1)");
    }
}

// Draws one dataset of size n; assign(u, rng) supplies the treatment draw.
template <typename Assign>
SprintDataset simulate(const SprintModel& model, std::int64_t n, std::uint64_t key,
                       Assign&& assign) {
    CounterRng rng(key);
    SprintDataset data;
    const auto size = static_cast<std::size_t>(n);
    data.t.resize(size);
    data.y.resize(size);
    data.u.resize(size);
    for (std::size_t i = 0; i < size; ++i) {
        const bool u = rng.next_uniform() < model.p_u;
        const bool t = assign(u, rng);
        // A single uniform drives both potential outcomes, keeping the
        // (Y_0, Y_1) coupling identical across assignment mechanisms.
        const double draw = rng.next_uniform();
        const double p1 = u ? model.p_y1_u1 : model.p_y1_u0;
        const double p0 = u ? model.p_y0_u1 : model.p_y0_u0;
        const bool y = draw < (t ? p1 : p0);
        data.u[i] = u;
        data.t[i] = t;
        data.y[i] = y;
    }
    return data;
}

struct CellStats {
    double rmse = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
};

// Percentile bootstrap over replication-level squared errors; the RMSE of
// each resample is the square root of its mean squared error.
CellStats bootstrap_rmse(std::span<const double> sq_errors, std::int64_t resamples,
                         std::uint64_t key) {
    CellStats out;
    const std::size_t n = sq_errors.size();
    out.rmse = std::sqrt(pairwise_sum(sq_errors) / static_cast<double>(n));
    if (resamples <= 0) {
        out.ci_low = out.ci_high = out.rmse;
        return out;
    }
    CounterRng rng(key);
    std::vector<double> stats(static_cast<std::size_t>(resamples));
    std::vector<double> draw(n);
    for (auto& stat : stats) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto j = static_cast<std::size_t>(rng.next_u64() % n);
            draw[i] = sq_errors[j];
        }
        stat = std::sqrt(pairwise_sum(draw) / static_cast<double>(n));
    }
    std::sort(stats.begin(), stats.end());
    const auto lo = static_cast<std::size_t>(0.025 * static_cast<double>(resamples - 1) + 0.5);
    const auto hi = static_cast<std::size_t>(0.975 * static_cast<double>(resamples - 1) + 0.5);
    out.ci_low = stats[lo];
    out.ci_high = stats[hi];
    return out;
}

} // namespace

void SprintModel::validate() const {
    check_prob(p_u, "p_u");
    check_prob(p_y1_u1, "p_y1_u1");
    check_prob(p_y1_u0, "p_y1_u0");
    check_prob(p_y0_u1, "p_y0_u1");
    check_prob(p_y0_u0, "p_y0_u0");
    check_prob(e_exp, "e_exp");
    if (!std::isfinite(gamma)) throw std::invalid_argument("gamma must be finite");
    if (n_exp < 2 || n_obs < 2) throw std::invalid_argument("sample sizes must be >= 2");
}

double SprintModel::true_ate() const {
    return p_u * (p_y1_u1 - p_y0_u1) + (1.0 - p_u) * (p_y1_u0 - p_y0_u0);
}

double SprintModel::treat_prob_given_u(bool u) const {
    return logistic(gamma * ((u ? 1.0 : 0.0) - 0.5));
}

SprintDataset simulate_trial(const SprintModel& model, std::uint64_t key) {
    model.validate();
    return simulate(model, model.n_exp, key, [&](bool, CounterRng& rng) {
        return rng.next_uniform() < model.e_exp;
    });
}

SprintDataset simulate_observational(const SprintModel& model, std::uint64_t key) {
    model.validate();
    return simulate(model, model.n_obs, key, [&](bool u, CounterRng& rng) {
        return rng.next_uniform() < model.treat_prob_given_u(u);
    });
}

IpwEstimate ipw_ate(const SprintDataset& data, EhatMode mode, double fixed_e) {
    const std::size_t n = data.t.size();
    if (n == 0 || data.y.size() != n) throw std::invalid_argument("empty or ragged dataset");

    std::int64_t n_treated = 0, sum_y1 = 0, sum_y0 = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (data.t[i]) {
            ++n_treated;
            sum_y1 += data.y[i];
        } else {
            sum_y0 += data.y[i];
        }
    }
    const std::int64_t n_control = static_cast<std::int64_t>(n) - n_treated;
    if (n_treated == 0 || n_control == 0) {
        throw positivity_error("an arm of the dataset is empty");
    }

    IpwEstimate est;
    est.e_hat = (mode == EhatMode::Empirical)
                    ? static_cast<double>(n_treated) / static_cast<double>(n)
                    : fixed_e;
    if (!(est.e_hat > 0.0 && est.e_hat < 1.0)) {
        throw positivity_error("treatment probability must lie strictly in (0, 1)");
    }
    est.mu1_hat = static_cast<double>(sum_y1) / static_cast<double>(n_treated);
    est.mu0_hat = static_cast<double>(sum_y0) / static_cast<double>(n_control);

    const double inv_n = 1.0 / static_cast<double>(n);
    const unsigned char* t = data.t.data();
    const unsigned char* y = data.y.data();
    const double w1 = 1.0 / est.e_hat;
    const double w0 = -1.0 / (1.0 - est.e_hat);
    est.theta = pairwise_transform_sum(n, [&](std::size_t i) {
                    return static_cast<double>(y[i]) * (t[i] ? w1 : w0);
                }) * inv_n;

    est.var = pairwise_transform_sum(n, [&](std::size_t i) {
                  const double phi = ipw_influence(static_cast<double>(y[i]), t[i] != 0,
                                                   est.e_hat, est.mu1_hat, est.mu0_hat,
                                                   est.theta);
                  return phi * phi;
              }) * inv_n * inv_n;
    return est;
}

double sweep_crossover_gamma(const std::vector<GammaSweepResult>& cells) {
    if (cells.empty()) throw std::invalid_argument("no sweep cells");
    for (std::size_t i = 1; i < cells.size(); ++i) {
        if (!(cells[i].gamma > cells[i - 1].gamma) || cells[i].n_obs != cells[0].n_obs) {
            throw std::invalid_argument("cells must be one n_obs slice, ascending in gamma");
        }
    }
    // pool-adjacent-violators over the paired differences
    std::vector<double> level;
    std::vector<std::size_t> count;
    for (const GammaSweepResult& cell : cells) {
        level.push_back(cell.rmse_combined - cell.rmse_unbiased);
        count.push_back(1);
        while (level.size() > 1 && level[level.size() - 2] > level.back()) {
            const std::size_t k = level.size();
            const double merged =
                (level[k - 2] * static_cast<double>(count[k - 2]) +
                 level[k - 1] * static_cast<double>(count[k - 1])) /
                static_cast<double>(count[k - 2] + count[k - 1]);
            count[k - 2] += count[k - 1];
            level[k - 2] = merged;
            level.pop_back();
            count.pop_back();
        }
    }
    double crossover = -1.0;
    std::size_t cell_index = 0;
    for (std::size_t block = 0; block < level.size(); ++block) {
        for (std::size_t j = 0; j < count[block]; ++j, ++cell_index) {
            if (level[block] < 0.0) crossover = cells[cell_index].gamma;
        }
    }
    return crossover;
}

std::vector<double> sprint_gamma_spread20() {
    std::vector<double> grid(20);
    for (int i = 0; i < 20; ++i) grid[static_cast<std::size_t>(i)] = 2.0 * i / 19.0;
    return grid;
}

std::vector<double> sprint_gamma_table_grid() {
    std::vector<double> grid(41);
    for (int i = 0; i <= 40; ++i) grid[static_cast<std::size_t>(i)] = 0.05 * i;
    return grid;
}

std::vector<GammaSweepResult> run_gamma_sweep(const SprintModel& model_template,
                                              const SprintSweepSettings& settings,
                                              const EngineOptions& opts) {
    if (settings.gamma_grid.empty() || settings.n_obs_set.empty()) {
        throw std::invalid_argument("gamma grid and n_obs set must be nonempty");
    }
    if (settings.reps < 1) throw std::invalid_argument("reps must be >= 1");
    model_template.validate();
    const double theta_0 = model_template.true_ate();

    std::vector<GammaSweepResult> results;
    const auto reps = static_cast<std::size_t>(settings.reps);
    std::vector<double> sq_u(reps), sq_c(reps), theta_b_slot(reps);
    std::vector<char> excluded(reps);

    for (std::size_t gi = 0; gi < settings.gamma_grid.size(); ++gi) {
        for (std::size_t oi = 0; oi < settings.n_obs_set.size(); ++oi) {
            SprintModel model = model_template;
            model.gamma = settings.gamma_grid[gi];
            model.n_obs = settings.n_obs_set[oi];

            std::fill(sq_u.begin(), sq_u.end(), 0.0);
            std::fill(sq_c.begin(), sq_c.end(), 0.0);
            std::fill(theta_b_slot.begin(), theta_b_slot.end(), 0.0);
            std::fill(excluded.begin(), excluded.end(), 0);

            detail::parallel_for(settings.reps, opts, [&](std::int64_t rep) {
                const auto r = static_cast<std::size_t>(rep);
                const std::uint64_t trial_key =
                    stream_key({settings.seed, stream_purpose::kSprintSweep, gi, oi,
                                static_cast<std::uint64_t>(rep), 0});
                const std::uint64_t obs_key =
                    stream_key({settings.seed, stream_purpose::kSprintSweep, gi, oi,
                                static_cast<std::uint64_t>(rep), 1});
                try {
                    const SprintDataset trial = simulate_trial(model, trial_key);
                    const SprintDataset obs = simulate_observational(model, obs_key);
                    const IpwEstimate u = ipw_ate(trial, settings.trial_e_mode, model.e_exp);
                    const IpwEstimate b = ipw_ate(obs, EhatMode::Empirical);

                    // Disjoint samples: the covariance term is exactly zero,
                    // so lambda = var_u / (diff^2 + var_u + var_b).
                    const double diff = u.theta - b.theta;
                    const double lambda = u.var / (diff * diff + u.var + b.var);
                    const double combined = u.theta + lambda * (b.theta - u.theta);

                    const double eu = u.theta - theta_0;
                    const double ec = combined - theta_0;
                    sq_u[r] = eu * eu;
                    sq_c[r] = ec * ec;
                    theta_b_slot[r] = b.theta;
                } catch (const positivity_error&) {
                    excluded[r] = 1;
                }
            });

            std::int64_t included = settings.reps;
            for (char e : excluded) included -= e;
            if (included == 0) {
                throw std::runtime_error("all replications excluded in sprint sweep cell");
            }

            // Exclusions are essentially impossible at trial scale; compact
            // the slots if any occurred so bootstrap sees only real draws.
            std::vector<double> eu_included, ec_included;
            std::span<const double> eu_span(sq_u), ec_span(sq_c);
            if (included != settings.reps) {
                eu_included.reserve(static_cast<std::size_t>(included));
                ec_included.reserve(static_cast<std::size_t>(included));
                for (std::size_t i = 0; i < reps; ++i) {
                    if (!excluded[i]) {
                        eu_included.push_back(sq_u[i]);
                        ec_included.push_back(sq_c[i]);
                    }
                }
                eu_span = eu_included;
                ec_span = ec_included;
            }

            GammaSweepResult cell;
            cell.gamma = model.gamma;
            cell.big_gamma = std::exp(model.gamma);
            cell.n_obs = model.n_obs;
            cell.excluded_reps = settings.reps - included;
            const CellStats stats_u = bootstrap_rmse(
                eu_span, settings.bootstrap_resamples,
                stream_key({settings.seed, stream_purpose::kBootstrap, gi, oi, 0}));
            const CellStats stats_c = bootstrap_rmse(
                ec_span, settings.bootstrap_resamples,
                stream_key({settings.seed, stream_purpose::kBootstrap, gi, oi, 1}));
            cell.rmse_unbiased = stats_u.rmse;
            cell.ci_low_unbiased = stats_u.ci_low;
            cell.ci_high_unbiased = stats_u.ci_high;
            cell.rmse_combined = stats_c.rmse;
            cell.ci_low_combined = stats_c.ci_low;
            cell.ci_high_combined = stats_c.ci_high;
            cell.mean_bias_b = pairwise_sum(theta_b_slot) / static_cast<double>(included) - theta_0;
            results.push_back(cell);
        }
    }
    return results;
}

} // namespace estfuse
