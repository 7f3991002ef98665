#pragma once

#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "learnfx/config.hpp"
#include "learnfx/estimators.hpp"
#include "learnfx/extrapolate.hpp"
#include "learnfx/inference.hpp"
#include "learnfx/io.hpp"
#include "learnfx/panel.hpp"
#include "learnfx/report.hpp"
#include "learnfx/stats.hpp"

// End-to-end analysis: ingest -> bucket -> impute -> SRM -> effect and
// learning series with inference -> quick detection -> exponential fit ->
// long-term effect -> period summary.

namespace learnfx {

struct AnalyzeOptions {
    std::string input_path;
    std::string schedule_path;
    BucketMode mode = BucketMode::exposure;
    ImputePolicy impute_policy = ImputePolicy::zero;
    double alpha = config::default_alpha;
    std::string method = "all";  // did | ladder | cross | all
    bool fit = false;
    int bootstrap = 0;           // 0 disables bootstrap standard errors
    std::uint64_t seed = 0;
    double window_days = 1.0;
    std::vector<double> expected_ratios;  // empty = equal split
    FitOptions fit_options;
};

namespace detail {

/// Period rows shaped like a per-period results table: "First 3 days" and
/// one row per full week. Treatment effect and half-split learning per
/// period, as percentages of the period's control mean.
inline std::vector<PeriodRow> build_periods(const ExperimentPanel& exposure_panel,
                                            const CellMeans& cells, double alpha) {
    std::vector<PeriodRow> rows;
    int k1 = exposure_panel.windows();
    if (k1 < 3) return rows;

    std::vector<std::pair<std::string, std::pair<int, int>>> spans;
    spans.push_back({"First 3 days", {1, 3}});
    for (int week = 1; 7 * week <= k1; ++week) {
        spans.push_back({"Week " + std::to_string(week), {7 * (week - 1) + 1, 7 * week}});
    }

    for (const auto& [label, span] : spans) {
        auto [lo, hi] = span;
        PeriodRow row;
        row.label = label;
        row.window_lo = lo;
        row.window_hi = hi;

        double diff_sum = 0.0, var_sum = 0.0;
        double ctrl_sum = 0.0;
        long ctrl_count = 0;
        bool complete = true;
        for (int t = lo; t <= hi; ++t) {
            const Cell& c = cells.cell(1, t);
            const Cell& tr = cells.cell(2, t);
            if (c.count() < 2 || tr.count() < 2) {
                complete = false;
                break;
            }
            diff_sum += tr.mean() - c.mean();
            var_sum += c.mean_variance() + tr.mean_variance();
            ctrl_sum += c.mean() * static_cast<double>(c.count());
            ctrl_count += c.count();
        }
        if (complete) {
            double len = static_cast<double>(hi - lo + 1);
            row.tau = diff_sum / len;
            double var = var_sum / (len * len);
            IntervalEstimate e = gaussian_test(row.tau, var, 1.0 - alpha);
            row.tau_p = e.p_value;
            row.control_mean = ctrl_sum / static_cast<double>(ctrl_count);
            if (row.control_mean != 0.0) row.tau_pct = 100.0 * row.tau / row.control_mean;
        }
        try {
            QuickDetectResult q = quick_detect_range(exposure_panel, lo, hi);
            row.delta2 = q.delta2_hat;
            row.delta2_p = q.p_value;
            row.has_quick = true;
            if (complete && row.control_mean != 0.0) {
                row.delta2_pct = 100.0 * q.delta2_hat / row.control_mean;
            }
            row.significant = q.p_value < alpha;
        } catch (const DataError&) {
            row.has_quick = false;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace detail

inline AnalysisReport run_analysis(const AnalyzeOptions& opt) {
    AnalysisReport report;
    report.input_path = opt.input_path;
    report.schedule_path = opt.schedule_path;
    report.mode = (opt.mode == BucketMode::calendar) ? "calendar" : "exposure";
    report.impute_policy = (opt.impute_policy == ImputePolicy::zero) ? "zero" : "observed-only";
    report.method = opt.method;
    report.alpha = opt.alpha;
    report.seed = opt.seed;

    std::string input_bytes = io::read_file(opt.input_path);
    report.input_digest = stats::digest_hex(input_bytes);
    std::string schedule_bytes = io::read_file(opt.schedule_path);
    report.schedule_digest = stats::digest_hex(schedule_bytes);

    nlohmann::json schedule_json;
    try {
        schedule_json = nlohmann::json::parse(schedule_bytes);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("schedule " + opt.schedule_path + ": " + e.what());
    }
    CohortSchedule schedule = io::parse_schedule(schedule_json);

    std::istringstream input_stream(input_bytes);
    ExperimentPanel raw = ingest_csv(input_stream);
    ExperimentPanel panel =
        impute(bucket_windows(raw, opt.mode, opt.window_days), opt.impute_policy);

    report.design = io::design_name(schedule.design());
    report.cohorts = schedule.cohorts();
    report.windows = panel.windows();
    report.units = panel.n_units();

    std::vector<double> ratios = opt.expected_ratios;
    if (ratios.empty()) {
        ratios.assign(static_cast<std::size_t>(panel.n_cohorts()),
                      1.0 / static_cast<double>(panel.n_cohorts()));
    }
    report.srm = srm_check(panel, ratios);
    if (report.srm.flagged) {
        report.warnings.push_back("sample ratio mismatch: cohort counts deviate from the "
                                  "expected split (p = " +
                                  fmt_csv_double(report.srm.p_value) + ")");
    }
    if (opt.impute_policy == ImputePolicy::observed_only) {
        report.warnings.push_back(
            "observed-only analysis assumes missing-data patterns are consistent between "
            "arms; this is untested beyond the sample-ratio check");
    }

    CellMeans cells = cell_means(panel, schedule);

    report.effects = treatment_effect_series(cells);
    for (const std::string& wmsg : complete_effect_series(report.effects, panel, cells, opt.alpha)) {
        report.warnings.push_back(wmsg);
    }

    bool is_ladder = schedule.design() == DesignKind::ladder;
    bool want_did = opt.method == "did" || opt.method == "all";
    bool want_ladder = opt.method == "ladder" || (opt.method == "all" && is_ladder);
    bool want_cross = opt.method == "cross" || (opt.method == "all" && is_ladder);
    if ((opt.method == "ladder" || opt.method == "cross") && !is_ladder) {
        throw DataError("method \"" + opt.method + "\" needs a ladder schedule");
    }
    if (want_did) {
        LearningSeries s = did_learning_series(cells);
        for (const std::string& wmsg :
             complete_learning_series(s, panel, cells, schedule, opt.alpha)) {
            report.warnings.push_back(wmsg);
        }
        report.learning.push_back(std::move(s));
    }
    if (want_ladder) {
        LearningSeries s = ladder_learning_series(cells, schedule);
        for (const std::string& wmsg :
             complete_learning_series(s, panel, cells, schedule, opt.alpha)) {
            report.warnings.push_back(wmsg);
        }
        report.learning.push_back(std::move(s));
    }
    if (want_cross) {
        LearningSeries s = cross_sectional_learning_series(cells, schedule);
        for (const std::string& wmsg :
             complete_learning_series(s, panel, cells, schedule, opt.alpha)) {
            report.warnings.push_back(wmsg);
        }
        report.learning.push_back(std::move(s));
    }
    if (report.learning.empty()) throw DataError("no learning method selected");

    // Quick detection runs on the exposure-aligned view of the data.
    const ExperimentPanel* qd_panel = &panel;
    std::optional<ExperimentPanel> qd_storage;
    if (opt.mode == BucketMode::calendar) {
        qd_storage.emplace(impute(bucket_windows(raw, BucketMode::exposure, opt.window_days),
                                  opt.impute_policy));
        qd_panel = &*qd_storage;
    }
    try {
        report.quick = quick_detect(*qd_panel);
        report.has_quick = true;
    } catch (const DataError& e) {
        report.warnings.push_back(std::string("quick detection skipped: ") + e.what());
    }

    if (opt.fit) {
        const LearningSeries& series = report.learning.front();
        report.fit_method = series.method;
        report.fit = fit_exponential(series, opt.fit_options);
        report.has_fit = true;
        if (!report.fit.converged) {
            report.warnings.push_back("exponential fit did not converge within the iteration "
                                      "budget; estimates are best-so-far");
        }
        if (opt.bootstrap > 0) {
            // A failed bootstrap costs only the standard errors; the point
            // estimates above are still valid, so degrade instead of aborting.
            try {
                BootstrapResult boot = bootstrap_fit(panel, schedule, series.method, opt.bootstrap,
                                                     opt.seed, opt.fit_options);
                report.fit.se_A = boot.se_A;
                report.fit.se_B = boot.se_B;
                report.fit.se_delta_infinity = boot.se_delta_infinity;
                report.bootstrap_requested = boot.requested;
                report.bootstrap_converged = boot.converged;
                if (boot.converged < boot.requested) {
                    report.warnings.push_back(
                        std::to_string(boot.requested - boot.converged) + " of " +
                        std::to_string(boot.requested) +
                        " bootstrap replicates were dropped (non-convergence or flat resample)");
                }
            } catch (const DataError& e) {
                report.bootstrap_requested = opt.bootstrap;
                report.bootstrap_converged = 0;
                report.warnings.push_back(std::string("bootstrap standard errors unavailable: ") +
                                          e.what());
            }
        }
        if (report.fit.converged) {
            report.long_term = long_term_effect(report.effects, report.fit, opt.alpha);
            report.has_long_term = true;
        }
    }

    report.periods = detail::build_periods(*qd_panel, cells, opt.alpha);

    report.warnings.push_back(
        "p-values are per-window; no multiple-testing correction is applied");
    return report;
}

}  // namespace learnfx
