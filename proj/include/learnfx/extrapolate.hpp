#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "learnfx/config.hpp"
#include "learnfx/estimators.hpp"
#include "learnfx/inference.hpp"
#include "learnfx/panel.hpp"
#include "learnfx/parallel.hpp"
#include "learnfx/stats.hpp"

// Exponential learning-curve fit delta(t) = A * (exp(-B t) - exp(-B)), its
// bootstrap standard errors, and the long-term treatment-effect estimate.
// The parameterization pins delta(1) = 0, so a series generated by a
// per-exposure-window effect A * exp(-B t) is recovered with the same (A, B).

namespace learnfx {

struct ExponentialFit {
    double A = 0.0;
    double B = 0.0;
    double se_A = 0.0;              // bootstrap, 0 until bootstrap_fit runs
    double se_B = 0.0;
    double se_delta_infinity = 0.0;
    bool converged = false;
    bool no_learning = false;
    double residual_sse = 0.0;
    double delta_infinity = 0.0;    // lim delta(t) = -A * exp(-B)
    int iterations = 0;
};

/// Optimizer budget and stopping rule. Defaults suit routine use; tests and
/// callers with unusually scaled data can override.
struct FitOptions {
    int max_iterations = config::fit_max_iterations;
    double gradient_tol = config::fit_gradient_tol;
};

inline double exp_model(double t, double A, double B) {
    return A * (std::exp(-B * t) - std::exp(-B));
}

/// d model / d(A, B).
inline std::array<double, 2> exp_jacobian(double t, double A, double B) {
    double et = std::exp(-B * t);
    double e1 = std::exp(-B);
    return {et - e1, A * (-t * et + e1)};
}

namespace detail {

struct FitData {
    std::vector<double> t;
    std::vector<double> y;
};

inline double fit_sse(const FitData& d, double A, double B) {
    double sse = 0.0;
    for (std::size_t i = 0; i < d.t.size(); ++i) {
        double r = exp_model(d.t[i], A, B) - d.y[i];
        sse += r * r;
    }
    return sse;
}

/// Least-squares amplitude for a fixed decay rate:
/// A*(B) = sum w_t y_t / sum w_t^2 with w_t = exp(-B t) - exp(-B).
inline double amplitude_for(const FitData& d, double B) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < d.t.size(); ++i) {
        double w = std::exp(-B * d.t[i]) - std::exp(-B);
        num += w * d.y[i];
        den += w * w;
    }
    if (den <= 0.0) return 0.0;
    return num / den;
}

/// Initial decay rate from the log-ratio of successive series differences:
/// for the model, (y_{t+2}-y_{t+1})/(y_{t+1}-y_t) = exp(-B). Returns false
/// when no valid ratio exists.
inline bool init_from_ratios(const FitData& d, double& B0) {
    std::vector<double> ratios;
    for (std::size_t i = 0; i + 2 < d.t.size(); ++i) {
        if (d.t[i + 1] != d.t[i] + 1.0 || d.t[i + 2] != d.t[i] + 2.0) continue;
        double g0 = d.y[i + 1] - d.y[i];
        double g1 = d.y[i + 2] - d.y[i + 1];
        if (g0 == 0.0) continue;
        double r = g1 / g0;
        if (r > 0.0 && std::isfinite(r)) ratios.push_back(r);
    }
    if (ratios.empty()) return false;
    double r_med = stats::median(std::move(ratios));
    if (!(r_med > 0.0) || !std::isfinite(r_med)) return false;
    double b = -std::log(r_med);
    if (!std::isfinite(b) || b < config::fit_b_min || b > config::fit_b_max) return false;
    B0 = b;
    return true;
}

inline void grid_init(const FitData& d, double& A0, double& B0) {
    double best_sse = std::numeric_limits<double>::infinity();
    double log_lo = std::log(config::fit_grid_b_low);
    double log_hi = std::log(config::fit_grid_b_high);
    for (int g = 0; g < config::fit_grid_points; ++g) {
        double B = std::exp(log_lo + (log_hi - log_lo) * g /
                            static_cast<double>(config::fit_grid_points - 1));
        double A = amplitude_for(d, B);
        double sse = fit_sse(d, A, B);
        if (sse < best_sse) {
            best_sse = sse;
            A0 = A;
            B0 = B;
        }
    }
}

/// Damped Gauss-Newton (Levenberg-Marquardt style) on (A, theta = ln B),
/// which keeps B positive while A may take either sign.
inline ExponentialFit levenberg_fit(const FitData& d, double A0, double B0,
                                    const FitOptions& opt) {
    const double theta_lo = std::log(config::fit_b_min);
    const double theta_hi = std::log(config::fit_b_max);

    double A = A0;
    double theta = std::log(std::clamp(B0, config::fit_b_min, config::fit_b_max));
    double sse = fit_sse(d, A, std::exp(theta));
    double lambda = 1e-3;

    ExponentialFit fit;
    int iter = 0;
    for (; iter < opt.max_iterations; ++iter) {
        double B = std::exp(theta);
        // Gradient and normal matrix in (A, theta).
        double g0 = 0.0, g1 = 0.0;
        double h00 = 0.0, h01 = 0.0, h11 = 0.0;
        for (std::size_t i = 0; i < d.t.size(); ++i) {
            auto j = exp_jacobian(d.t[i], A, B);
            double ja = j[0];
            double jt = j[1] * B;  // chain rule through theta = ln B
            double r = exp_model(d.t[i], A, B) - d.y[i];
            g0 += ja * r;
            g1 += jt * r;
            h00 += ja * ja;
            h01 += ja * jt;
            h11 += jt * jt;
        }
        if (std::max(std::fabs(g0), std::fabs(g1)) < opt.gradient_tol) {
            fit.converged = true;
            break;
        }

        bool stepped = false;
        for (int attempt = 0; attempt < 24; ++attempt) {
            double a00 = h00 + lambda * (h00 > 0.0 ? h00 : 1.0);
            double a11 = h11 + lambda * (h11 > 0.0 ? h11 : 1.0);
            double det = a00 * a11 - h01 * h01;
            if (det <= 0.0 || !std::isfinite(det)) {
                lambda *= 4.0;
                continue;
            }
            double dA = -(a11 * g0 - h01 * g1) / det;
            double dT = -(-h01 * g0 + a00 * g1) / det;
            double A_new = A + dA;
            double theta_new = std::clamp(theta + dT, theta_lo, theta_hi);
            double sse_new = fit_sse(d, A_new, std::exp(theta_new));
            if (std::isfinite(sse_new) && sse_new <= sse) {
                double step = std::max(std::fabs(A_new - A), std::fabs(theta_new - theta));
                double scale = 1.0 + std::max(std::fabs(A), std::fabs(theta));
                A = A_new;
                theta = theta_new;
                sse = sse_new;
                lambda = std::max(lambda * 0.3, 1e-12);
                stepped = true;
                if (step < 1e-14 * scale) {
                    fit.converged = true;  // stagnated at machine precision
                }
                break;
            }
            lambda *= 4.0;
        }
        if (!stepped || fit.converged) {
            // No productive step exists at any damping: treat as converged
            // when the objective is flat to machine precision.
            if (!stepped) fit.converged = true;
            break;
        }
    }

    fit.A = A;
    fit.B = std::exp(theta);
    fit.residual_sse = sse;
    fit.delta_infinity = -fit.A * std::exp(-fit.B);
    fit.iterations = iter;
    return fit;
}

inline FitData series_to_fit_data(const LearningSeries& series) {
    FitData d;
    d.t.reserve(series.points.size());
    d.y.reserve(series.points.size());
    for (const LearningPoint& p : series.points) {
        d.t.push_back(static_cast<double>(p.window));
        d.y.push_back(p.delta_hat);
    }
    return d;
}

inline ExponentialFit fit_exponential_data(const FitData& d, const FitOptions& opt = {}) {
    double y_max = 0.0;
    for (double y : d.y) y_max = std::max(y_max, std::fabs(y));
    if (y_max == 0.0) {
        ExponentialFit flat;
        flat.A = 0.0;
        flat.B = 0.0;
        flat.converged = true;
        flat.no_learning = true;
        flat.residual_sse = 0.0;
        flat.delta_infinity = 0.0;
        return flat;
    }

    double A0 = 0.0, B0 = 0.0;
    grid_init(d, A0, B0);
    double B_ratio;
    if (init_from_ratios(d, B_ratio)) {
        double A_ratio = amplitude_for(d, B_ratio);
        if (fit_sse(d, A_ratio, B_ratio) < fit_sse(d, A0, B0)) {
            A0 = A_ratio;
            B0 = B_ratio;
        }
    }
    if (B0 <= 0.0) B0 = 1.0;
    return levenberg_fit(d, A0, B0, opt);
}

}  // namespace detail

/// Nonlinear least squares of delta(t) = A (exp(-B t) - exp(-B)) against the
/// learning series over t = 1..k-1. A flat series reports no_learning with
/// A = 0. Non-convergence returns the best point found with converged=false.
inline ExponentialFit fit_exponential(const LearningSeries& series, const FitOptions& opt = {}) {
    if (series.points.size() < 3) {
        throw DataError("fit_exponential: need at least 3 windows");
    }
    return detail::fit_exponential_data(detail::series_to_fit_data(series), opt);
}

// ---------------------------------------------------------------------------
// Bootstrap.

struct BootstrapResult {
    int requested = 0;
    int converged = 0;
    double se_A = 0.0;
    double se_B = 0.0;
    double se_delta_infinity = 0.0;
    std::vector<double> rep_A;  // converged replicates only
    std::vector<double> rep_B;
};

namespace detail {

/// Cell means of a within-cohort resample of units, identified by indexes
/// into `units_by_cohort`.
inline CellMeans resample_cells(const ExperimentPanel& panel, const CohortSchedule& schedule,
                                const std::vector<std::vector<int>>& units_by_cohort,
                                stats::RandomStream& rng) {
    CellMeans cells(schedule.cohorts(), schedule.windows());
    for (const auto& pool : units_by_cohort) {
        if (pool.empty()) continue;
        for (std::size_t draw = 0; draw < pool.size(); ++draw) {
            int u = pool[static_cast<std::size_t>(rng.next_index(pool.size()))];
            int c = panel.cohort_of(u);
            auto ws = panel.unit_windows(u);
            auto vs = panel.unit_values(u);
            for (std::size_t i = 0; i < ws.size(); ++i) {
                Cell& cell = cells.cell(c, ws[i]);
                cell.acc.add(vs[i]);
                cell.arm = schedule.arm(c, ws[i]);
            }
        }
    }
    return cells;
}

inline LearningSeries learning_series_for(LearningMethod method, const CellMeans& cells,
                                          const CohortSchedule& schedule) {
    switch (method) {
        case LearningMethod::did: return did_learning_series(cells);
        case LearningMethod::ladder: return ladder_learning_series(cells, schedule);
        case LearningMethod::cross_sectional:
            return cross_sectional_learning_series(cells, schedule);
    }
    throw DataError("unknown learning method");
}

}  // namespace detail

/// Unit-level bootstrap of the exponential fit: resample units with
/// replacement within each cohort, recompute the learning series, refit.
/// SEs are sample standard deviations over usable replicates; a replicate is
/// dropped when its refit does not converge or its resampled series is flat
/// (no decay to estimate). More than 20% dropped is an error. Replicate r
/// draws from a stream derived from (seed, r), so results are independent of
/// execution order and thread count.
inline BootstrapResult bootstrap_fit(const ExperimentPanel& panel, const CohortSchedule& schedule,
                                     LearningMethod method, int b_reps, std::uint64_t seed,
                                     const FitOptions& opt = {}) {
    if (b_reps < config::bootstrap_min_reps) {
        throw DataError("bootstrap_fit: need at least " +
                        std::to_string(config::bootstrap_min_reps) + " replicates");
    }
    std::vector<std::vector<int>> units_by_cohort(static_cast<std::size_t>(panel.n_cohorts()));
    for (int u = 0; u < panel.n_units(); ++u) {
        units_by_cohort[static_cast<std::size_t>(panel.cohort_of(u) - 1)].push_back(u);
    }

    struct Rep {
        double A = 0.0, B = 0.0, d_inf = 0.0;
        bool ok = false;
    };
    std::vector<Rep> reps(static_cast<std::size_t>(b_reps));
    parallel_for(static_cast<std::size_t>(b_reps), [&](std::size_t r) {
        stats::RandomStream rng = stats::RandomStream::substream(seed, r);
        CellMeans cells = detail::resample_cells(panel, schedule, units_by_cohort, rng);
        LearningSeries series = detail::learning_series_for(method, cells, schedule);
        ExponentialFit fit = detail::fit_exponential_data(detail::series_to_fit_data(series), opt);
        reps[r] = {fit.A, fit.B, fit.delta_infinity, fit.converged && !fit.no_learning};
    });

    BootstrapResult out;
    out.requested = b_reps;
    stats::RunningStat sa, sb, sd;
    for (const Rep& r : reps) {
        if (!r.ok) continue;
        ++out.converged;
        out.rep_A.push_back(r.A);
        out.rep_B.push_back(r.B);
        sa.add(r.A);
        sb.add(r.B);
        sd.add(r.d_inf);
    }
    int dropped = b_reps - out.converged;
    if (static_cast<double>(dropped) > config::bootstrap_max_drop_fraction * b_reps) {
        throw DataError("bootstrap_fit: " + std::to_string(dropped) + " of " +
                        std::to_string(b_reps) +
                        " replicates failed to converge or were flat (more than 20%); the "
                        "learning curve is too weakly identified for bootstrap standard errors");
    }
    out.se_A = std::sqrt(sa.sample_variance());
    out.se_B = std::sqrt(sb.sample_variance());
    out.se_delta_infinity = std::sqrt(sd.sample_variance());
    return out;
}

// ---------------------------------------------------------------------------
// Long-term effect.

struct LongTermEstimate {
    double observed_effect = 0.0;      // tau_hat_1
    double learning_limit = 0.0;       // delta_infinity
    double long_term_effect = 0.0;     // observed + limit
    double ci_low = 0.0;
    double ci_high = 0.0;
    // Same combination anchored at the last window instead of the first.
    double alt_observed_effect = 0.0;  // tau_hat_{k-1}
    double alt_long_term_effect = 0.0;
};

/// Long-term treatment effect: the window-1 effect tau_hat_1 plus the
/// fitted learning limit. The CI combines Var(tau_hat_1) with the bootstrap
/// variance of delta_infinity, treated as independent.
inline LongTermEstimate long_term_effect(const EffectSeries& effects, const ExponentialFit& fit,
                                         double alpha = 0.05) {
    if (!fit.converged) throw DataError("long_term_effect: exponential fit did not converge");
    if (effects.points.empty()) throw DataError("long_term_effect: empty effect series");
    LongTermEstimate lt;
    lt.observed_effect = effects.points.front().tau_hat;
    lt.learning_limit = fit.delta_infinity;
    lt.long_term_effect = lt.observed_effect + lt.learning_limit;
    lt.alt_observed_effect = effects.points.back().tau_hat;
    lt.alt_long_term_effect = lt.alt_observed_effect + fit.delta_infinity;
    double var_tau = effects.points.front().variance;
    if (std::isnan(var_tau)) var_tau = 0.0;
    double var = var_tau + fit.se_delta_infinity * fit.se_delta_infinity;
    IntervalEstimate e = gaussian_test(lt.long_term_effect, var, 1.0 - alpha);
    lt.ci_low = e.ci_low;
    lt.ci_high = e.ci_high;
    return lt;
}

}  // namespace learnfx
