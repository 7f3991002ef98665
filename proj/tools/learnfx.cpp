#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "learnfx/learnfx.hpp"

namespace {

using namespace learnfx;

void emit(const std::string& content, const std::string& path) {
    if (path.empty()) {
        std::cout << content;
    } else {
        io::write_file(path, content);
    }
}

int cmd_analyze(const AnalyzeOptions& opt, const std::string& output, const std::string& format,
                const std::string& svg_path, bool strict_srm) {
    AnalysisReport report = run_analysis(opt);
    emit(format == "csv" ? report_series_csv(report) : report_to_json(report), output);
    if (!svg_path.empty()) io::write_file(svg_path, report_svg(report));
    if (strict_srm && report.srm.flagged) {
        std::cerr << "error: sample ratio mismatch (chi-square " << report.srm.statistic
                  << ", p = " << report.srm.p_value << ")\n";
        return 2;
    }
    return 0;
}

int cmd_detect(const std::string& input, ImputePolicy policy, double window_days) {
    ExperimentPanel raw = ingest_csv_file(input);
    ExperimentPanel panel = impute(bucket_windows(raw, BucketMode::exposure, window_days), policy);
    QuickDetectResult q = quick_detect(panel);
    std::cout << quick_to_json(q);
    return 0;
}

int cmd_simulate(const SimulationConfig& cfg, const std::string& output, const std::string& csv) {
    ReplicationSummary summary = run_replications(cfg);
    emit(summary_to_json(summary), output);
    if (!csv.empty()) io::write_file(csv, replications_csv(summary));
    return 0;
}

int cmd_power(long n, int k, double sigma_sq, double rho) {
    std::cout << power_to_json(power_comparison(n, k, sigma_sq, rho));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"user-learning (novelty/primacy) estimation for A/B tests"};
    app.require_subcommand(1);

    // analyze
    AnalyzeOptions aopt;
    std::string a_mode = "exposure", a_impute = "zero", a_format = "json";
    std::string a_output, a_svg;
    bool a_strict_srm = false;
    auto* analyze = app.add_subcommand("analyze", "full analysis of an experiment CSV");
    analyze->add_option("--input", aopt.input_path, "long-format observations CSV")
        ->required()
        ->check(CLI::ExistingFile);
    analyze->add_option("--schedule", aopt.schedule_path, "cohort schedule JSON")
        ->required()
        ->check(CLI::ExistingFile);
    analyze->add_option("--mode", a_mode, "window alignment (default exposure)")
        ->check(CLI::IsMember({"calendar", "exposure"}));
    analyze->add_option("--impute", a_impute, "missing-data policy (default zero)")
        ->check(CLI::IsMember({"zero", "observed"}));
    analyze->add_option("--alpha", aopt.alpha, "significance level (default 0.05)")
        ->check(CLI::Range(1e-6, 0.5));
    analyze->add_option("--method", aopt.method, "learning estimator (default all)")
        ->check(CLI::IsMember({"did", "ladder", "cross", "all"}));
    analyze->add_flag("--fit", aopt.fit, "fit the exponential learning curve");
    analyze->add_option("--bootstrap", aopt.bootstrap,
                        "bootstrap replicates for fit standard errors (0 = off)");
    analyze->add_option("--seed", aopt.seed, "bootstrap seed");
    analyze->add_option("--window-days", aopt.window_days,
                        "window length in days for timestamped input (default 1)");
    analyze->add_option("--expected-ratios", aopt.expected_ratios,
                        "expected cohort proportions for the sample-ratio check");
    analyze->add_option("--output", a_output, "report path (default stdout)");
    analyze->add_option("--format", a_format, "report format (default json)")
        ->check(CLI::IsMember({"json", "csv"}));
    analyze->add_option("--svg", a_svg, "also write a line chart to this path");
    analyze->add_flag("--strict-srm", a_strict_srm, "exit 2 when the sample-ratio check trips");

    // detect
    std::string d_input, d_impute = "zero";
    double d_window_days = 1.0;
    auto* detect = app.add_subcommand("detect", "quick user-learning check (half-split)");
    detect->add_option("--input", d_input, "long-format observations CSV")
        ->required()
        ->check(CLI::ExistingFile);
    detect->add_option("--impute", d_impute, "missing-data policy (default zero)")
        ->check(CLI::IsMember({"zero", "observed"}));
    detect->add_option("--window-days", d_window_days,
                       "window length in days for timestamped input (default 1)");

    // simulate
    std::string s_config, s_output, s_csv;
    bool s_paper_preset = false;
    auto* simulate = app.add_subcommand("simulate", "replication study on synthetic experiments");
    simulate->add_option("--config", s_config, "simulation config JSON")->check(CLI::ExistingFile);
    simulate->add_flag("--paper-preset", s_paper_preset,
                       "desk-scale synthetic study (20000 units, 14 windows, exp(-t/3) effect)");
    auto* s_n = simulate->add_option("--n-units", "unit count");
    auto* s_k = simulate->add_option("--k", "cohort count (k-1 windows)");
    auto* s_sigma = simulate->add_option("--sigma", "noise SD");
    auto* s_ea = simulate->add_option("--effect-a", "injected effect amplitude");
    auto* s_eb = simulate->add_option("--effect-b", "injected effect decay rate");
    auto* s_base = simulate->add_option("--baseline", "baseline intercept");
    auto* s_rho = simulate->add_option("--rho", "within-unit cross-window correlation");
    auto* s_design = simulate->add_option("--design", "panel design for generate-only use")
                         ->check(CLI::IsMember({"two-cohort", "ladder"}));
    auto* s_reps = simulate->add_option("--replications", "replication count");
    auto* s_seed = simulate->add_option("--seed", "master seed");
    simulate->add_option("--output", s_output, "summary JSON path (default stdout)");
    simulate->add_option("--csv", s_csv, "per-replication fit CSV path");

    // power
    long p_n = 0;
    int p_k = 0;
    double p_sigma_sq = 0.0, p_rho = 0.0;
    auto* power = app.add_subcommand("power", "closed-form variance comparison");
    power->add_option("--n", p_n, "unit count")->required();
    power->add_option("--k", p_k, "cohort count")->required();
    power->add_option("--sigma-sq", p_sigma_sq, "per-window metric variance")->required();
    power->add_option("--rho", p_rho, "within-unit cross-window correlation")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (analyze->parsed()) {
            aopt.mode = (a_mode == "calendar") ? BucketMode::calendar : BucketMode::exposure;
            aopt.impute_policy =
                (a_impute == "observed") ? ImputePolicy::observed_only : ImputePolicy::zero;
            return cmd_analyze(aopt, a_output, a_format, a_svg, a_strict_srm);
        }
        if (detect->parsed()) {
            ImputePolicy policy =
                (d_impute == "observed") ? ImputePolicy::observed_only : ImputePolicy::zero;
            return cmd_detect(d_input, policy, d_window_days);
        }
        if (simulate->parsed()) {
            SimulationConfig cfg;
            if (s_paper_preset && !s_config.empty()) {
                throw DataError("simulate: pass either --config or --paper-preset, not both");
            }
            if (s_paper_preset) {
                cfg = SimulationConfig::paper_preset();
            } else if (!s_config.empty()) {
                cfg = io::load_simulation_config(s_config);
            }
            if (*s_n) cfg.n_units = s_n->as<long>();
            if (*s_k) cfg.k = s_k->as<int>();
            if (*s_sigma) cfg.sigma = s_sigma->as<double>();
            if (*s_ea) cfg.effect_A = s_ea->as<double>();
            if (*s_eb) cfg.effect_B = s_eb->as<double>();
            if (*s_base) cfg.baseline_intercept = s_base->as<double>();
            if (*s_rho) cfg.rho = s_rho->as<double>();
            if (*s_design) cfg.design = io::parse_design(s_design->as<std::string>());
            if (*s_reps) cfg.replications = s_reps->as<int>();
            if (*s_seed) cfg.seed = s_seed->as<std::uint64_t>();
            if (*s_k && cfg.window_effects.size() != static_cast<std::size_t>(cfg.k - 1)) {
                cfg.window_effects.clear();
            }
            cfg.validate();
            return cmd_simulate(cfg, s_output, s_csv);
        }
        if (power->parsed()) {
            return cmd_power(p_n, p_k, p_sigma_sq, p_rho);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
