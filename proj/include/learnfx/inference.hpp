#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "learnfx/estimators.hpp"
#include "learnfx/panel.hpp"
#include "learnfx/stats.hpp"

// Variances, confidence intervals, and p-values for the estimators, plus the
// closed-form variance comparison between the experimental (ladder) and
// observational (difference-in-differences) approaches.

namespace learnfx {

struct IntervalEstimate {
    double point = 0.0;
    double variance = 0.0;
    double std_error = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double p_value = 1.0;
    double level = 0.95;
};

/// Two-sided z interval and p-value for a Gaussian point estimate.
/// `level` is the confidence level 1 - alpha.
inline IntervalEstimate gaussian_test(double point, double variance, double level = 0.95) {
    if (variance < 0.0) throw DataError("gaussian_test: variance must be >= 0");
    if (!(level > 0.0 && level < 1.0)) throw DataError("gaussian_test: level must be in (0, 1)");
    IntervalEstimate e;
    e.point = point;
    e.variance = variance;
    e.std_error = std::sqrt(variance);
    e.level = level;
    double z_crit = stats::normal_quantile(1.0 - (1.0 - level) / 2.0);
    e.ci_low = point - z_crit * e.std_error;
    e.ci_high = point + z_crit * e.std_error;
    if (e.std_error > 0.0) {
        e.p_value = stats::two_sided_p(point / e.std_error);
    } else {
        e.p_value = (point == 0.0) ? 1.0 : 0.0;
    }
    return e;
}

// ---------------------------------------------------------------------------
// Variance of the learning estimates.

struct VarianceEstimate {
    double value = 0.0;
    /// True when computed from paired per-unit differences (captures the
    /// within-unit correlation); false for the conservative unpaired
    /// fallback used on sparse panels.
    bool paired = true;
};

/// Variance of the difference-in-differences estimate delta_hat_t.
///
/// On a zero-imputed panel, forms per-unit differences d_u = y_u(t) - y_u(1)
/// within each arm and returns s2_T/n_T + s2_C/n_C. On an observed-only
/// panel, falls back to the unpaired sum of the four cell mean-variances,
/// which ignores the within-unit correlation and is conservative for
/// positively correlated metrics.
inline VarianceEstimate did_variance(const ExperimentPanel& panel, int t) {
    if (!panel.windows_resolved()) throw DataError("did_variance: bucket windows first");
    if (t < 2 || t > panel.windows()) {
        throw DataError("did_variance: window " + std::to_string(t) + " out of range");
    }
    VarianceEstimate out;
    if (panel.policy() == ImputePolicy::zero) {
        stats::RunningStat arm[2];
        for (int u = 0; u < panel.n_units(); ++u) {
            int c = panel.cohort_of(u);
            if (c > 2) continue;
            double y1 = panel.value_at(u, 1);
            double yt = panel.value_at(u, t);
            if (std::isnan(y1) || std::isnan(yt)) continue;
            arm[c - 1].add(yt - y1);
        }
        if (arm[0].n < 2 || arm[1].n < 2) {
            throw DataError("did_variance: need at least 2 units per arm with windows 1 and " +
                            std::to_string(t));
        }
        out.value = arm[0].variance_of_mean() + arm[1].variance_of_mean();
        out.paired = true;
        return out;
    }
    stats::RunningStat cell[2][2];  // [arm][window index: 0 -> 1, 1 -> t]
    for (int u = 0; u < panel.n_units(); ++u) {
        int c = panel.cohort_of(u);
        if (c > 2) continue;
        double y1 = panel.value_at(u, 1);
        double yt = panel.value_at(u, t);
        if (!std::isnan(y1)) cell[c - 1][0].add(y1);
        if (!std::isnan(yt)) cell[c - 1][1].add(yt);
    }
    for (int a = 0; a < 2; ++a) {
        for (int w = 0; w < 2; ++w) {
            if (cell[a][w].n < 2) {
                throw DataError("did_variance: fewer than 2 observations in cohort " +
                                std::to_string(a + 1) + ", window " +
                                std::to_string(w == 0 ? 1 : t));
            }
        }
    }
    out.value = cell[0][0].variance_of_mean() + cell[0][1].variance_of_mean() +
                cell[1][0].variance_of_mean() + cell[1][1].variance_of_mean();
    out.paired = false;
    return out;
}

/// Variance of the ladder estimate: sum of the two cell mean-variances at
/// (cohort 2, window t) and (cohort t+1, window t).
inline double ladder_variance(const CellMeans& cells, int t) {
    if (t < 2 || t > cells.windows()) {
        throw DataError("ladder_variance: window " + std::to_string(t) + " out of range");
    }
    const Cell& a = cells.require_cell(2, t);
    const Cell& b = cells.require_cell(t + 1, t);
    if (a.degenerate() || b.degenerate()) {
        throw DataError("ladder_variance: degenerate cell at window " + std::to_string(t));
    }
    return a.mean_variance() + b.mean_variance();
}

/// Variance of the cross-sectional estimate, from the two final-window cells.
inline double cross_sectional_variance(const CellMeans& cells, const CohortSchedule& schedule,
                                       int t) {
    int k = schedule.cohorts();
    int last = schedule.windows();
    if (t < 2 || t > last) {
        throw DataError("cross_sectional_variance: window " + std::to_string(t) + " out of range");
    }
    const Cell& a = cells.require_cell(k - t + 1, last);
    const Cell& b = cells.require_cell(k, last);
    if (a.degenerate() || b.degenerate()) {
        throw DataError("cross_sectional_variance: degenerate cell at window " + std::to_string(t));
    }
    return a.mean_variance() + b.mean_variance();
}

// ---------------------------------------------------------------------------
// Closed-form power comparison.

struct PowerComparison {
    long n = 0;
    int k = 0;
    double sigma_sq = 0.0;
    double rho = 0.0;
    double var_experimental = 0.0;   // 2 k sigma^2 / n
    double var_observational = 0.0;  // 8 (1 - rho) sigma^2 / n
    double crossover_rho = 0.0;      // 1 - k / 4
    bool observational_wins = false;
};

/// Closed-form variances of delta_hat under an equal split of n units:
/// experimental (ladder) 2k sigma^2 / n versus observational
/// (difference-in-differences) 8 (1 - rho) sigma^2 / n. The observational
/// approach wins iff rho > 1 - k/4, hence always for k > 3.
inline PowerComparison power_comparison(long n, int k, double sigma_sq, double rho) {
    if (k < 3) throw DataError("power_comparison: k must be >= 3");
    if (n < k) throw DataError("power_comparison: n must be >= k");
    if (!(sigma_sq > 0.0)) throw DataError("power_comparison: sigma_sq must be positive");
    if (rho < 0.0 || rho >= 1.0) throw DataError("power_comparison: rho must be in [0, 1)");
    PowerComparison pc;
    pc.n = n;
    pc.k = k;
    pc.sigma_sq = sigma_sq;
    pc.rho = rho;
    pc.var_experimental = 2.0 * k * sigma_sq / static_cast<double>(n);
    pc.var_observational = 8.0 * (1.0 - rho) * sigma_sq / static_cast<double>(n);
    pc.crossover_rho = 1.0 - static_cast<double>(k) / 4.0;
    pc.observational_wins = pc.var_observational < pc.var_experimental;
    return pc;
}

/// Mean pairwise cross-window correlation of the metric, over units
/// observing both windows of each pair.
inline double estimate_rho(const ExperimentPanel& panel) {
    if (!panel.windows_resolved()) throw DataError("estimate_rho: bucket windows first");
    int k1 = panel.windows();
    if (k1 < 2) throw DataError("estimate_rho: need at least 2 windows");
    double corr_sum = 0.0;
    long pairs = 0;
    for (int i = 1; i <= k1; ++i) {
        for (int j = i + 1; j <= k1; ++j) {
            stats::RunningStat xi, xj;
            double cross = 0.0;
            std::vector<std::pair<double, double>> obs;
            for (int u = 0; u < panel.n_units(); ++u) {
                double a = panel.value_at(u, i);
                double b = panel.value_at(u, j);
                if (std::isnan(a) || std::isnan(b)) continue;
                obs.emplace_back(a, b);
                xi.add(a);
                xj.add(b);
            }
            if (xi.n < 2) continue;
            for (auto [a, b] : obs) cross += (a - xi.mean) * (b - xj.mean);
            double denom = std::sqrt(xi.m2 * xj.m2);
            if (denom <= 0.0) continue;
            corr_sum += cross / denom;
            ++pairs;
        }
    }
    if (pairs == 0) throw DataError("estimate_rho: no window pair has 2 complete units");
    return corr_sum / static_cast<double>(pairs);
}

// ---------------------------------------------------------------------------
// Attach inference to estimator output.

/// Fills variance, CI, and p-value on a learning series. Returns warnings
/// (conservative fallback and similar) accumulated along the way.
inline std::vector<std::string> complete_learning_series(LearningSeries& series,
                                                         const ExperimentPanel& panel,
                                                         const CellMeans& cells,
                                                         const CohortSchedule& schedule,
                                                         double alpha = 0.05) {
    std::vector<std::string> warnings;
    double level = 1.0 - alpha;
    bool fallback_warned = false;
    for (LearningPoint& p : series.points) {
        if (p.window == 1) {
            p.delta_hat = 0.0;
            p.variance = 0.0;
            p.ci_low = 0.0;
            p.ci_high = 0.0;
            p.p_value = 1.0;
            continue;
        }
        double var = 0.0;
        switch (series.method) {
            case LearningMethod::did: {
                VarianceEstimate ve = did_variance(panel, p.window);
                var = ve.value;
                if (!ve.paired && !fallback_warned) {
                    warnings.push_back(
                        "observed-only panel: difference-in-differences variance uses the "
                        "unpaired fallback, which is conservative under positive within-unit "
                        "correlation");
                    fallback_warned = true;
                }
                break;
            }
            case LearningMethod::ladder:
                var = ladder_variance(cells, p.window);
                break;
            case LearningMethod::cross_sectional:
                var = cross_sectional_variance(cells, schedule, p.window);
                break;
        }
        IntervalEstimate e = gaussian_test(p.delta_hat, var, level);
        p.variance = var;
        p.ci_low = e.ci_low;
        p.ci_high = e.ci_high;
        p.p_value = e.p_value;
    }
    return warnings;
}

/// Fills CI and p-value on the treatment-effect series. On a zero-imputed
/// panel where every unit starts at window 1, uses the two-sample variance
/// of per-unit cumulative averages; otherwise combines per-window cell
/// variances and warns that cross-window correlation is ignored.
inline std::vector<std::string> complete_effect_series(EffectSeries& series,
                                                       const ExperimentPanel& panel,
                                                       const CellMeans& cells,
                                                       double alpha = 0.05) {
    std::vector<std::string> warnings;
    double level = 1.0 - alpha;
    int k1 = static_cast<int>(series.points.size());

    bool paired = panel.policy() == ImputePolicy::zero;
    if (paired) {
        for (int u = 0; u < panel.n_units() && paired; ++u) {
            if (panel.cohort_of(u) <= 2 && panel.exposure_start(u) != 1) paired = false;
        }
    }

    if (paired) {
        // Per-unit cumulative averages a_u(t); tau_hat_t is their arm-mean
        // difference, so its variance is the paired two-sample one.
        std::vector<stats::RunningStat> acc(static_cast<std::size_t>(2 * k1));
        std::vector<double> cum;
        for (int u = 0; u < panel.n_units(); ++u) {
            int c = panel.cohort_of(u);
            if (c > 2) continue;
            auto vs = panel.unit_values(u);
            auto ws = panel.unit_windows(u);
            cum.assign(static_cast<std::size_t>(k1), 0.0);
            double run = 0.0;
            for (std::size_t i = 0; i < ws.size(); ++i) {
                run += vs[i];
                cum[static_cast<std::size_t>(ws[i] - 1)] = run / static_cast<double>(ws[i]);
            }
            for (int t = 1; t <= k1; ++t) {
                acc[static_cast<std::size_t>((c - 1) * k1 + t - 1)].add(
                    cum[static_cast<std::size_t>(t - 1)]);
            }
        }
        for (EffectPoint& p : series.points) {
            auto& ctrl = acc[static_cast<std::size_t>(p.window - 1)];
            auto& treat = acc[static_cast<std::size_t>(k1 + p.window - 1)];
            double var = ctrl.variance_of_mean() + treat.variance_of_mean();
            IntervalEstimate e = gaussian_test(p.tau_hat, var, level);
            p.variance = var;
            p.ci_low = e.ci_low;
            p.ci_high = e.ci_high;
            p.p_value = e.p_value;
        }
        return warnings;
    }

    warnings.push_back(
        "treatment-effect intervals combine per-window variances and ignore cross-window "
        "correlation on sparse panels");
    double var_sum = 0.0;
    for (EffectPoint& p : series.points) {
        int t = p.window;
        var_sum += cells.require_cell(1, t).mean_variance() +
                   cells.require_cell(2, t).mean_variance();
        double var = var_sum / (static_cast<double>(t) * static_cast<double>(t));
        IntervalEstimate e = gaussian_test(p.tau_hat, var, level);
        p.variance = var;
        p.ci_low = e.ci_low;
        p.ci_high = e.ci_high;
        p.p_value = e.p_value;
    }
    return warnings;
}

}  // namespace learnfx
