#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "learnfx/config.hpp"
#include "learnfx/estimators.hpp"
#include "learnfx/extrapolate.hpp"
#include "learnfx/inference.hpp"
#include "learnfx/panel.hpp"
#include "learnfx/simulate.hpp"

// Report assembly and serialization. JSON output is written by a dedicated
// emitter with a fixed key order and 17-significant-digit floats, so equal
// analyses produce byte-identical documents; CSV exports round to 6
// significant digits for readability.

namespace learnfx {

/// %.17g, which round-trips IEEE doubles; non-finite values become null.
inline std::string fmt_json_double(double x) {
    if (std::isnan(x) || std::isinf(x)) return "null";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline std::string fmt_csv_double(double x) {
    if (std::isnan(x) || std::isinf(x)) return "";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", x);
    return buf;
}

class JsonWriter {
  public:
    std::string take() { return std::move(out_); }

    void begin_object() { open('{'); }
    void end_object() { close('}'); }
    void begin_array() { open('['); }
    void end_array() { close(']'); }

    void key(std::string_view k) {
        separate();
        write_string(k);
        out_ += ": ";
        pending_ = true;
    }

    void value(double v) { lead(); out_ += fmt_json_double(v); }
    void value(bool v) { lead(); out_ += v ? "true" : "false"; }
    void value(int v) { value(static_cast<long long>(v)); }
    void value(long v) { value(static_cast<long long>(v)); }
    void value(long long v) {
        lead();
        char buf[24];
        std::snprintf(buf, sizeof(buf), "%lld", v);
        out_ += buf;
    }
    void value(unsigned long long v) {
        lead();
        char buf[24];
        std::snprintf(buf, sizeof(buf), "%llu", v);
        out_ += buf;
    }
    void value(std::string_view v) { lead(); write_string(v); }
    void value(const char* v) { value(std::string_view(v)); }
    void null() { lead(); out_ += "null"; }

  private:
    void open(char c) {
        lead();
        out_ += c;
        counts_.push_back(0);
    }
    void close(char c) {
        int count = counts_.back();
        counts_.pop_back();
        if (count > 0) {
            out_ += '\n';
            indent();
        }
        out_ += c;
    }
    void lead() {
        if (pending_) {
            pending_ = false;
            if (!counts_.empty()) ++counts_.back();
            return;
        }
        separate();
    }
    void separate() {
        if (counts_.empty()) return;
        if (counts_.back() > 0) out_ += ',';
        out_ += '\n';
        ++counts_.back();
        indent();
    }
    void indent() {
        for (std::size_t i = 0; i < counts_.size(); ++i) out_ += "  ";
    }
    void write_string(std::string_view s) {
        out_ += '"';
        for (unsigned char c : s) {
            switch (c) {
                case '"': out_ += "\\\""; break;
                case '\\': out_ += "\\\\"; break;
                case '\n': out_ += "\\n"; break;
                case '\r': out_ += "\\r"; break;
                case '\t': out_ += "\\t"; break;
                default:
                    if (c < 0x20) {
                        char buf[8];
                        std::snprintf(buf, sizeof(buf), "\\u%04x", c);
                        out_ += buf;
                    } else {
                        out_ += static_cast<char>(c);
                    }
            }
        }
        out_ += '"';
    }

    std::string out_;
    std::vector<int> counts_;
    bool pending_ = false;
};

// ---------------------------------------------------------------------------
// Report model.

/// One row of the period summary: per-period treatment effect and half-split
/// learning check, as percentages of the control mean in that period.
struct PeriodRow {
    std::string label;
    int window_lo = 0;
    int window_hi = 0;
    double control_mean = std::numeric_limits<double>::quiet_NaN();
    double tau = std::numeric_limits<double>::quiet_NaN();
    double tau_pct = std::numeric_limits<double>::quiet_NaN();
    double tau_p = std::numeric_limits<double>::quiet_NaN();
    double delta2 = std::numeric_limits<double>::quiet_NaN();
    double delta2_pct = std::numeric_limits<double>::quiet_NaN();
    double delta2_p = std::numeric_limits<double>::quiet_NaN();
    bool has_quick = false;
    bool significant = false;  // half-split p below alpha
};

struct AnalysisReport {
    std::string input_path;
    std::string input_digest;
    std::string schedule_path;
    std::string schedule_digest;
    std::string mode = "exposure";
    std::string impute_policy = "zero";
    std::string method = "all";
    double alpha = config::default_alpha;
    std::uint64_t seed = 0;
    std::string design = "two-cohort";
    int cohorts = 0;
    int windows = 0;
    long units = 0;

    SrmResult srm;
    EffectSeries effects;
    std::vector<LearningSeries> learning;

    bool has_quick = false;
    QuickDetectResult quick;

    bool has_fit = false;
    LearningMethod fit_method = LearningMethod::did;
    ExponentialFit fit;
    int bootstrap_requested = 0;
    int bootstrap_converged = 0;

    bool has_long_term = false;
    LongTermEstimate long_term;

    std::vector<PeriodRow> periods;
    std::vector<std::string> warnings;
};

// ---------------------------------------------------------------------------
// JSON rendering.

namespace detail {

inline void write_effect_series(JsonWriter& w, const EffectSeries& s) {
    w.begin_array();
    for (const EffectPoint& p : s.points) {
        w.begin_object();
        w.key("window");
        w.value(p.window);
        w.key("window_diff");
        w.value(p.window_diff);
        w.key("tau_hat");
        w.value(p.tau_hat);
        w.key("variance");
        w.value(p.variance);
        w.key("ci_low");
        w.value(p.ci_low);
        w.key("ci_high");
        w.value(p.ci_high);
        w.key("p_value");
        w.value(p.p_value);
        w.end_object();
    }
    w.end_array();
}

inline void write_learning_series(JsonWriter& w, const LearningSeries& s) {
    w.begin_array();
    for (const LearningPoint& p : s.points) {
        w.begin_object();
        w.key("window");
        w.value(p.window);
        w.key("delta_hat");
        w.value(p.delta_hat);
        w.key("variance");
        w.value(p.variance);
        w.key("ci_low");
        w.value(p.ci_low);
        w.key("ci_high");
        w.value(p.ci_high);
        w.key("p_value");
        w.value(p.p_value);
        w.end_object();
    }
    w.end_array();
}

inline void write_double_array(JsonWriter& w, const std::vector<double>& xs) {
    w.begin_array();
    for (double x : xs) w.value(x);
    w.end_array();
}

}  // namespace detail

inline std::string report_to_json(const AnalysisReport& r) {
    JsonWriter w;
    w.begin_object();
    w.key("schema_version");
    w.value(config::report_schema_version);
    w.key("tool_version");
    w.value(config::tool_version);

    w.key("metadata");
    w.begin_object();
    w.key("input");
    w.value(r.input_path);
    w.key("input_digest");
    w.value(r.input_digest);
    w.key("schedule");
    w.value(r.schedule_path);
    w.key("schedule_digest");
    w.value(r.schedule_digest);
    w.key("design");
    w.value(r.design);
    w.key("mode");
    w.value(r.mode);
    w.key("impute");
    w.value(r.impute_policy);
    w.key("method");
    w.value(r.method);
    w.key("alpha");
    w.value(r.alpha);
    w.key("seed");
    w.value(static_cast<unsigned long long>(r.seed));
    w.key("cohorts");
    w.value(r.cohorts);
    w.key("windows");
    w.value(r.windows);
    w.key("units");
    w.value(r.units);
    w.end_object();

    w.key("srm");
    w.begin_object();
    w.key("statistic");
    w.value(r.srm.statistic);
    w.key("p_value");
    w.value(r.srm.p_value);
    w.key("flagged");
    w.value(r.srm.flagged);
    w.key("dof");
    w.value(r.srm.dof);
    w.key("counts");
    w.begin_array();
    for (long c : r.srm.counts) w.value(c);
    w.end_array();
    w.key("expected");
    detail::write_double_array(w, r.srm.expected);
    w.end_object();

    w.key("effects");
    detail::write_effect_series(w, r.effects);

    w.key("learning");
    w.begin_object();
    for (const LearningSeries& s : r.learning) {
        w.key(method_name(s.method));
        detail::write_learning_series(w, s);
    }
    w.end_object();

    w.key("quick_detect");
    if (r.has_quick) {
        w.begin_object();
        w.key("delta2");
        w.value(r.quick.delta2_hat);
        w.key("se");
        w.value(r.quick.std_error);
        w.key("p_value");
        w.value(r.quick.p_value);
        w.key("n_units");
        w.value(r.quick.n_units_used);
        w.end_object();
    } else {
        w.null();
    }

    w.key("fit");
    if (r.has_fit) {
        w.begin_object();
        w.key("method");
        w.value(method_name(r.fit_method));
        w.key("A");
        w.value(r.fit.A);
        w.key("B");
        w.value(r.fit.B);
        w.key("se_A");
        w.value(r.fit.se_A);
        w.key("se_B");
        w.value(r.fit.se_B);
        w.key("converged");
        w.value(r.fit.converged);
        w.key("no_learning");
        w.value(r.fit.no_learning);
        w.key("residual_sse");
        w.value(r.fit.residual_sse);
        w.key("delta_infinity");
        w.value(r.fit.delta_infinity);
        w.key("se_delta_infinity");
        w.value(r.fit.se_delta_infinity);
        w.key("iterations");
        w.value(r.fit.iterations);
        w.key("bootstrap_replicates");
        w.value(r.bootstrap_requested);
        w.key("bootstrap_converged");
        w.value(r.bootstrap_converged);
        w.end_object();
    } else {
        w.null();
    }

    w.key("long_term");
    if (r.has_long_term) {
        w.begin_object();
        w.key("observed_effect");
        w.value(r.long_term.observed_effect);
        w.key("learning_limit");
        w.value(r.long_term.learning_limit);
        w.key("long_term_effect");
        w.value(r.long_term.long_term_effect);
        w.key("ci_low");
        w.value(r.long_term.ci_low);
        w.key("ci_high");
        w.value(r.long_term.ci_high);
        w.key("alt_observed_effect");
        w.value(r.long_term.alt_observed_effect);
        w.key("alt_long_term_effect");
        w.value(r.long_term.alt_long_term_effect);
        w.end_object();
    } else {
        w.null();
    }

    w.key("periods");
    w.begin_array();
    for (const PeriodRow& p : r.periods) {
        w.begin_object();
        w.key("label");
        w.value(p.label);
        w.key("windows");
        w.begin_array();
        w.value(p.window_lo);
        w.value(p.window_hi);
        w.end_array();
        w.key("control_mean");
        w.value(p.control_mean);
        w.key("tau");
        w.value(p.tau);
        w.key("tau_pct");
        w.value(p.tau_pct);
        w.key("tau_p_value");
        w.value(p.tau_p);
        w.key("delta2");
        w.value(p.delta2);
        w.key("delta2_pct");
        w.value(p.delta2_pct);
        w.key("delta2_p_value");
        w.value(p.delta2_p);
        w.key("significant");
        w.value(p.significant);
        w.end_object();
    }
    w.end_array();

    w.key("warnings");
    w.begin_array();
    for (const std::string& s : r.warnings) w.value(s);
    w.end_array();

    w.end_object();
    std::string out = w.take();
    out += '\n';
    return out;
}

// ---------------------------------------------------------------------------
// CSV rendering (tidy series tables).

inline std::string report_series_csv(const AnalysisReport& r) {
    std::string out = "series,method,window,estimate,ci_low,ci_high,p_value\n";
    auto row = [&out](std::string_view series, std::string_view method, int window, double est,
                      double lo, double hi, double p) {
        out += series;
        out += ',';
        out += method;
        out += ',';
        out += std::to_string(window);
        out += ',';
        out += fmt_csv_double(est);
        out += ',';
        out += fmt_csv_double(lo);
        out += ',';
        out += fmt_csv_double(hi);
        out += ',';
        out += fmt_csv_double(p);
        out += '\n';
    };
    for (const EffectPoint& p : r.effects.points) {
        row("tau_hat", "", p.window, p.tau_hat, p.ci_low, p.ci_high, p.p_value);
    }
    for (const LearningSeries& s : r.learning) {
        for (const LearningPoint& p : s.points) {
            row("delta_hat", method_name(s.method), p.window, p.delta_hat, p.ci_low, p.ci_high,
                p.p_value);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Simulation summary rendering.

inline std::string summary_to_json(const ReplicationSummary& s) {
    JsonWriter w;
    w.begin_object();
    w.key("schema_version");
    w.value(config::report_schema_version);
    w.key("tool_version");
    w.value(config::tool_version);

    w.key("config");
    w.begin_object();
    w.key("n_units");
    w.value(s.config.n_units);
    w.key("k");
    w.value(s.config.k);
    w.key("windows");
    w.value(s.config.windows());
    w.key("sigma");
    w.value(s.config.sigma);
    w.key("effect_A");
    w.value(s.config.effect_A);
    w.key("effect_B");
    w.value(s.config.effect_B);
    w.key("baseline_intercept");
    w.value(s.config.baseline_intercept);
    w.key("window_effects");
    detail::write_double_array(w, s.config.window_effects);
    w.key("rho");
    w.value(s.config.rho);
    w.key("replications");
    w.value(s.config.replications);
    w.key("seed");
    w.value(static_cast<unsigned long long>(s.config.seed));
    w.end_object();

    w.key("approaches");
    w.begin_object();
    for (const ApproachSummary* a : {&s.observational, &s.experimental}) {
        w.key(a->name);
        w.begin_object();
        w.key("replications");
        w.value(a->replications);
        w.key("converged");
        w.value(a->converged);
        w.key("mean_A");
        w.value(a->mean_A);
        w.key("sd_A");
        w.value(a->sd_A);
        w.key("mean_B");
        w.value(a->mean_B);
        w.key("sd_B");
        w.value(a->sd_B);
        w.key("delta_mean");
        detail::write_double_array(w, a->delta_mean);
        w.key("delta_var");
        detail::write_double_array(w, a->delta_var);
        w.end_object();
    }
    w.end_object();

    w.end_object();
    std::string out = w.take();
    out += '\n';
    return out;
}

inline std::string replications_csv(const ReplicationSummary& s) {
    std::string out = "approach,replication,A,B,converged\n";
    for (const ApproachSummary* a : {&s.observational, &s.experimental}) {
        for (std::size_t r = 0; r < a->rep_A.size(); ++r) {
            out += a->name;
            out += ',';
            out += std::to_string(r + 1);
            out += ',';
            out += fmt_csv_double(a->rep_A[r]);
            out += ',';
            out += fmt_csv_double(a->rep_B[r]);
            out += ',';
            out += a->rep_converged[r] ? "1" : "0";
            out += '\n';
        }
    }
    return out;
}

inline std::string power_to_json(const PowerComparison& pc) {
    JsonWriter w;
    w.begin_object();
    w.key("n");
    w.value(pc.n);
    w.key("k");
    w.value(pc.k);
    w.key("sigma_sq");
    w.value(pc.sigma_sq);
    w.key("rho");
    w.value(pc.rho);
    w.key("var_experimental");
    w.value(pc.var_experimental);
    w.key("var_observational");
    w.value(pc.var_observational);
    w.key("crossover_rho");
    w.value(pc.crossover_rho);
    w.key("observational_wins");
    w.value(pc.observational_wins);
    w.end_object();
    std::string out = w.take();
    out += '\n';
    return out;
}

inline std::string quick_to_json(const QuickDetectResult& q) {
    JsonWriter w;
    w.begin_object();
    w.key("delta2");
    w.value(q.delta2_hat);
    w.key("se");
    w.value(q.std_error);
    w.key("p_value");
    w.value(q.p_value);
    w.key("n_units");
    w.value(q.n_units_used);
    w.end_object();
    std::string out = w.take();
    out += '\n';
    return out;
}

// ---------------------------------------------------------------------------
// Minimal SVG line chart of the series (presentation only; not part of the
// byte-stability contract).

inline std::string report_svg(const AnalysisReport& r) {
    const double width = 720, height = 400;
    const double ml = 60, mr = 20, mt = 30, mb = 40;
    double lo = 0.0, hi = 0.0;
    auto widen = [&lo, &hi](double v) {
        if (std::isnan(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    };
    for (const EffectPoint& p : r.effects.points) {
        widen(p.tau_hat);
        widen(p.ci_low);
        widen(p.ci_high);
    }
    for (const LearningSeries& s : r.learning) {
        for (const LearningPoint& p : s.points) {
            widen(p.delta_hat);
            widen(p.ci_low);
            widen(p.ci_high);
        }
    }
    if (hi - lo < 1e-12) hi = lo + 1.0;
    double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    int k1 = std::max(r.windows, 2);

    auto sx = [&](double t) { return ml + (t - 1.0) / (k1 - 1.0) * (width - ml - mr); };
    auto sy = [&](double v) { return mt + (hi - v) / (hi - lo) * (height - mt - mb); };
    char buf[160];
    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"400\" "
           "viewBox=\"0 0 720 400\" font-family=\"sans-serif\" font-size=\"11\">\n";
    svg += "<rect width=\"720\" height=\"400\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#999\"/>\n",
                  ml, sy(0.0), width - mr, sy(0.0));
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", ml,
                  mt, ml, height - mb);
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n", ml,
                  height - mb, width - mr, height - mb);
    svg += buf;
    std::snprintf(buf, sizeof(buf), "<text x=\"8\" y=\"%.1f\">%.3g</text>\n", sy(hi) + 4, hi);
    svg += buf;
    std::snprintf(buf, sizeof(buf), "<text x=\"8\" y=\"%.1f\">%.3g</text>\n", sy(lo) + 4, lo);
    svg += buf;
    std::snprintf(buf, sizeof(buf), "<text x=\"%.1f\" y=\"%.1f\">window</text>\n",
                  width / 2 - 20, height - 10);
    svg += buf;

    auto polyline = [&](const std::vector<std::pair<double, double>>& pts, const char* color,
                        const char* dash) {
        if (pts.empty()) return;
        svg += "<polyline fill=\"none\" stroke=\"";
        svg += color;
        svg += "\"";
        if (dash[0]) {
            svg += " stroke-dasharray=\"";
            svg += dash;
            svg += "\"";
        }
        svg += " points=\"";
        for (auto [t, v] : pts) {
            std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", sx(t), sy(v));
            svg += buf;
        }
        svg += "\"/>\n";
    };

    std::vector<std::pair<double, double>> pts, band_lo, band_hi;
    for (const EffectPoint& p : r.effects.points) {
        pts.emplace_back(p.window, p.tau_hat);
        if (!std::isnan(p.ci_low)) band_lo.emplace_back(p.window, p.ci_low);
        if (!std::isnan(p.ci_high)) band_hi.emplace_back(p.window, p.ci_high);
    }
    polyline(band_lo, "#9ecae1", "3,3");
    polyline(band_hi, "#9ecae1", "3,3");
    polyline(pts, "#1f77b4", "");
    svg += "<text x=\"70\" y=\"20\" fill=\"#1f77b4\">treatment effect</text>\n";

    const char* colors[] = {"#d62728", "#2ca02c", "#9467bd"};
    double label_x = 200;
    int ci = 0;
    for (const LearningSeries& s : r.learning) {
        pts.clear();
        for (const LearningPoint& p : s.points) pts.emplace_back(p.window, p.delta_hat);
        polyline(pts, colors[ci % 3], "");
        std::snprintf(buf, sizeof(buf), "<text x=\"%.0f\" y=\"20\" fill=\"%s\">%s</text>\n",
                      label_x, colors[ci % 3], method_name(s.method));
        svg += buf;
        label_x += 120;
        ++ci;
    }
    if (r.has_fit && r.fit.converged && !r.fit.no_learning) {
        pts.clear();
        for (double t = 1.0; t <= k1; t += 0.25) {
            pts.emplace_back(t, exp_model(t, r.fit.A, r.fit.B));
        }
        polyline(pts, "#7f7f7f", "5,3");
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace learnfx
