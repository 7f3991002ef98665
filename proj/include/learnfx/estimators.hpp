#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "learnfx/panel.hpp"
#include "learnfx/stats.hpp"

// Treatment-effect time series and the four user-learning estimators:
// two-cohort difference-in-differences, ladder, cross-sectional, and the
// per-unit half-split quick detector.
//
// Estimators return point series; variances, intervals, and p-values are
// attached by the inference module.

namespace learnfx {

struct EffectPoint {
    int window = 0;
    double window_diff = 0.0;  // T^t - C^t
    double tau_hat = 0.0;      // running mean of window_diff[1..t]
    double variance = std::numeric_limits<double>::quiet_NaN();
    double ci_low = std::numeric_limits<double>::quiet_NaN();
    double ci_high = std::numeric_limits<double>::quiet_NaN();
    double p_value = std::numeric_limits<double>::quiet_NaN();
};

struct EffectSeries {
    std::vector<EffectPoint> points;  // t = 1..k-1
};

enum class LearningMethod { did, ladder, cross_sectional };

inline const char* method_name(LearningMethod m) {
    switch (m) {
        case LearningMethod::did: return "did";
        case LearningMethod::ladder: return "ladder";
        case LearningMethod::cross_sectional: return "cross_sectional";
    }
    return "?";
}

struct LearningPoint {
    int window = 0;
    double delta_hat = 0.0;
    double variance = std::numeric_limits<double>::quiet_NaN();
    double ci_low = std::numeric_limits<double>::quiet_NaN();
    double ci_high = std::numeric_limits<double>::quiet_NaN();
    double p_value = std::numeric_limits<double>::quiet_NaN();
};

struct LearningSeries {
    LearningMethod method = LearningMethod::did;
    std::vector<LearningPoint> points;  // t = 1..k-1, delta_hat[1] = 0 by definition
};

struct QuickDetectResult {
    double delta2_hat = 0.0;
    double std_error = 0.0;
    double p_value = 1.0;
    long n_units_used = 0;
};

// ---------------------------------------------------------------------------

/// tau_hat_t = (1/t) * sum_{j<=t} (T^j - C^j), with T = cohort 2 and
/// C = cohort 1 (the always-treatment / always-control pair).
inline EffectSeries treatment_effect_series(const CellMeans& cells) {
    EffectSeries out;
    out.points.reserve(static_cast<std::size_t>(cells.windows()));
    double cum = 0.0;
    for (int t = 1; t <= cells.windows(); ++t) {
        EffectPoint p;
        p.window = t;
        p.window_diff = cells.require_mean(2, t) - cells.require_mean(1, t);
        cum += p.window_diff;
        p.tau_hat = cum / static_cast<double>(t);
        out.points.push_back(p);
    }
    return out;
}

/// delta_hat_t = (T^t - T^1) - (C^t - C^1) for t = 2..k-1; delta_hat_1 = 0.
inline LearningSeries did_learning_series(const CellMeans& cells) {
    if (cells.windows() < 2) throw DataError("difference-in-differences needs at least 2 windows");
    LearningSeries out;
    out.method = LearningMethod::did;
    out.points.resize(static_cast<std::size_t>(cells.windows()));
    out.points[0].window = 1;
    out.points[0].delta_hat = 0.0;
    double t1 = cells.require_mean(2, 1);
    double c1 = cells.require_mean(1, 1);
    for (int t = 2; t <= cells.windows(); ++t) {
        LearningPoint& p = out.points[static_cast<std::size_t>(t - 1)];
        p.window = t;
        p.delta_hat = (cells.require_mean(2, t) - t1) - (cells.require_mean(1, t) - c1);
    }
    return out;
}

/// Ladder contrast: delta_hat_t = T_2^t - T_{t+1}^t, the long-exposed cohort
/// against the cohort that switched to treatment at window t.
inline LearningSeries ladder_learning_series(const CellMeans& cells, const CohortSchedule& schedule) {
    if (schedule.design() != DesignKind::ladder) {
        throw DataError("ladder estimator needs a ladder schedule");
    }
    if (cells.windows() < 2) throw DataError("ladder estimator needs at least 2 windows");
    LearningSeries out;
    out.method = LearningMethod::ladder;
    out.points.resize(static_cast<std::size_t>(cells.windows()));
    out.points[0].window = 1;
    out.points[0].delta_hat = 0.0;
    for (int t = 2; t <= cells.windows(); ++t) {
        LearningPoint& p = out.points[static_cast<std::size_t>(t - 1)];
        p.window = t;
        p.delta_hat = cells.require_mean(2, t) - cells.require_mean(t + 1, t);
    }
    return out;
}

/// Cross-sectional variant: all contrasts in the final window k-1, against
/// the cohort whose treatment is exactly one window old there.
/// delta_hat_t = T_{k-t+1}^{k-1} - T_k^{k-1}.
inline LearningSeries cross_sectional_learning_series(const CellMeans& cells,
                                                      const CohortSchedule& schedule) {
    if (schedule.design() != DesignKind::ladder) {
        throw DataError("cross-sectional estimator needs a ladder schedule");
    }
    if (cells.windows() < 2) throw DataError("cross-sectional estimator needs at least 2 windows");
    int k = schedule.cohorts();
    int last = schedule.windows();  // k - 1
    LearningSeries out;
    out.method = LearningMethod::cross_sectional;
    out.points.resize(static_cast<std::size_t>(cells.windows()));
    out.points[0].window = 1;
    out.points[0].delta_hat = 0.0;
    double newest = cells.require_mean(k, last);
    for (int t = 2; t <= cells.windows(); ++t) {
        LearningPoint& p = out.points[static_cast<std::size_t>(t - 1)];
        p.window = t;
        p.delta_hat = cells.require_mean(k - t + 1, last) - newest;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Quick detection.

namespace detail {

/// Half-split difference for one unit over its observed windows inside
/// [lo, hi]: mean of the later half minus mean of the earlier half. The
/// earlier half takes ceil(m/2) windows. Returns false when fewer than two
/// windows qualify.
inline bool half_split_diff(const ExperimentPanel& panel, int u, int lo, int hi, double& out) {
    auto ws = panel.unit_windows(u);
    auto vs = panel.unit_values(u);
    int start = std::max(lo, panel.exposure_start(u));
    double sum_first = 0.0, sum_second = 0.0;
    long m = 0;
    for (std::size_t i = 0; i < ws.size(); ++i) {
        if (ws[i] >= start && ws[i] <= hi) ++m;
    }
    if (m < 2) return false;
    long first_count = (m + 1) / 2;
    long seen = 0;
    for (std::size_t i = 0; i < ws.size(); ++i) {
        if (ws[i] < start || ws[i] > hi) continue;
        if (seen < first_count) sum_first += vs[i];
        else sum_second += vs[i];
        ++seen;
    }
    out = sum_second / static_cast<double>(m - first_count) -
          sum_first / static_cast<double>(first_count);
    return true;
}

}  // namespace detail

/// Half-split detector restricted to windows [lo, hi]. Cohort 1 is control
/// and cohort 2 treatment; units in other cohorts are ignored, as are units
/// with fewer than two qualifying windows.
inline QuickDetectResult quick_detect_range(const ExperimentPanel& panel, int lo, int hi) {
    stats::RunningStat treat, control;
    for (int u = 0; u < panel.n_units(); ++u) {
        int c = panel.cohort_of(u);
        if (c > 2) continue;
        double d;
        if (!detail::half_split_diff(panel, u, lo, hi, d)) continue;
        (c == 2 ? treat : control).add(d);
    }
    if (treat.n < 2 || control.n < 2) {
        throw DataError("quick detection needs at least 2 qualifying units per arm (treatment " +
                        std::to_string(treat.n) + ", control " + std::to_string(control.n) + ")");
    }
    QuickDetectResult res;
    res.delta2_hat = treat.mean - control.mean;
    double var = treat.variance_of_mean() + control.variance_of_mean();
    res.std_error = std::sqrt(var);
    res.n_units_used = treat.n + control.n;
    if (res.std_error > 0.0) {
        res.p_value = stats::two_sided_p(res.delta2_hat / res.std_error);
    } else {
        res.p_value = (res.delta2_hat == 0.0) ? 1.0 : 0.0;
    }
    return res;
}

/// delta2_hat = mean half-split difference among treatment units minus the
/// same among control units, with a two-sample standard error.
inline QuickDetectResult quick_detect(const ExperimentPanel& panel) {
    if (!panel.windows_resolved()) throw DataError("quick_detect: bucket windows first");
    return quick_detect_range(panel, 1, panel.windows());
}

}  // namespace learnfx
