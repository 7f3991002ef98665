#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "learnfx/estimators.hpp"
#include "learnfx/extrapolate.hpp"
#include "learnfx/panel.hpp"
#include "learnfx/parallel.hpp"
#include "learnfx/stats.hpp"

// Synthetic experiments: unit observations are
//   baseline_intercept + window_effects[j] + sigma * (sqrt(rho) Z_u + sqrt(1-rho) eps_uj)
// and treated observations additionally receive an independent Gaussian draw
// with mean effect_A * exp(-effect_B * s) and SD sigma, where s is the
// unit's exposure age (1 in the window its cohort enters treatment).
// run_replications drives the observational-vs-experimental comparison.

namespace learnfx {

struct SimulationConfig {
    long n_units = 20000;
    int k = 15;  // cohort count; the experiment spans k-1 windows
    double sigma = 2.0;
    double effect_A = 1.0;
    double effect_B = 1.0 / 3.0;
    double baseline_intercept = 10.0;
    std::vector<double> window_effects;  // length k-1; empty means all zero
    double rho = 0.2;
    DesignKind design = DesignKind::two_cohort;
    int replications = 200;
    std::uint64_t seed = 7;

    int windows() const { return k - 1; }

    void validate() const {
        if (k < 3) throw DataError("simulation config: k must be >= 3");
        if (n_units < 2L * k) throw DataError("simulation config: n_units must be >= 2k");
        if (!(sigma > 0.0)) throw DataError("simulation config: sigma must be positive");
        if (!(rho >= 0.0 && rho < 1.0)) {
            throw DataError("simulation config: rho must be in [0, 1) for the "
                            "shared-component noise construction");
        }
        if (effect_B < 0.0) throw DataError("simulation config: effect_B must be >= 0");
        if (!window_effects.empty() &&
            static_cast<int>(window_effects.size()) != k - 1) {
            throw DataError("simulation config: window_effects must have k-1 entries");
        }
        if (replications < 1) throw DataError("simulation config: replications must be >= 1");
    }

    /// The synthetic study at desk scale: 20000 units over 14 windows,
    /// sigma 2, injected effect exp(-t/3), weekly seasonality, 200
    /// replications.
    static SimulationConfig paper_preset() {
        SimulationConfig cfg;
        cfg.n_units = 20000;
        cfg.k = 15;
        cfg.sigma = 2.0;
        cfg.effect_A = 1.0;
        cfg.effect_B = 1.0 / 3.0;
        cfg.baseline_intercept = 10.0;
        cfg.rho = 0.2;
        cfg.design = DesignKind::two_cohort;
        cfg.replications = 200;
        cfg.seed = 7;
        cfg.window_effects.resize(static_cast<std::size_t>(cfg.k - 1));
        for (int j = 1; j <= cfg.k - 1; ++j) {
            cfg.window_effects[static_cast<std::size_t>(j - 1)] =
                0.5 * std::sin(2.0 * 3.141592653589793 * j / 7.0);
        }
        return cfg;
    }
};

namespace detail {

/// Random equal split of n units into m cohorts (remainder spread over the
/// first cohorts). Returns 1-based cohort labels per unit.
inline std::vector<int> split_cohorts(long n, int m, stats::RandomStream& rng) {
    std::vector<int> cohort(static_cast<std::size_t>(n));
    long base = n / m, rem = n % m;
    std::size_t pos = 0;
    for (int c = 1; c <= m; ++c) {
        long size = base + (c <= rem ? 1 : 0);
        for (long i = 0; i < size; ++i) cohort[pos++] = c;
    }
    std::shuffle(cohort.begin(), cohort.end(), rng.engine());
    return cohort;
}

/// Baseline observations for all units and windows, unit-major.
inline std::vector<double> draw_baseline(const SimulationConfig& cfg, stats::RandomStream& rng) {
    int w = cfg.windows();
    std::vector<double> base(static_cast<std::size_t>(cfg.n_units) * w);
    double shared_w = std::sqrt(cfg.rho);
    double fresh_w = std::sqrt(1.0 - cfg.rho);
    std::size_t pos = 0;
    for (long u = 0; u < cfg.n_units; ++u) {
        double z = rng.gauss();
        for (int j = 1; j <= w; ++j) {
            double eps = rng.gauss();
            double wfx = cfg.window_effects.empty()
                             ? 0.0
                             : cfg.window_effects[static_cast<std::size_t>(j - 1)];
            base[pos++] = cfg.baseline_intercept + wfx +
                          cfg.sigma * (shared_w * z + fresh_w * eps);
        }
    }
    return base;
}

/// Treatment lift draw for exposure age s. When effect_A is exactly 0 the
/// draw is skipped entirely, keeping the arms exchangeable and every
/// observation's variance at sigma^2, which the closed-form variance
/// comparisons assume.
inline double effect_draw(const SimulationConfig& cfg, int age, stats::RandomStream& rng) {
    return rng.gauss(cfg.effect_A * std::exp(-cfg.effect_B * age), cfg.sigma);
}

}  // namespace detail

/// One synthetic experiment under `config` with every unit observed in all
/// windows (dense, zero-imputation-equivalent panel).
inline std::pair<ExperimentPanel, CohortSchedule> generate_experiment(const SimulationConfig& cfg,
                                                                      std::uint64_t seed) {
    cfg.validate();
    CohortSchedule schedule = (cfg.design == DesignKind::two_cohort)
                                  ? CohortSchedule::two_cohort(cfg.windows())
                                  : CohortSchedule::ladder(cfg.k);
    stats::RandomStream rng(seed);
    std::vector<double> values = detail::draw_baseline(cfg, rng);
    std::vector<int> cohort = detail::split_cohorts(cfg.n_units, schedule.cohorts(), rng);

    std::vector<int> first_treated(static_cast<std::size_t>(schedule.cohorts() + 1), 0);
    for (int c = 1; c <= schedule.cohorts(); ++c) {
        first_treated[static_cast<std::size_t>(c)] = schedule.first_treated_window(c);
    }

    int w = cfg.windows();
    if (cfg.effect_A != 0.0) {
        std::size_t pos = 0;
        for (long u = 0; u < cfg.n_units; ++u) {
            int ft = first_treated[static_cast<std::size_t>(cohort[static_cast<std::size_t>(u)])];
            for (int j = 1; j <= w; ++j, ++pos) {
                if (ft != 0 && j >= ft) {
                    values[pos] += detail::effect_draw(cfg, j - ft + 1, rng);
                }
            }
        }
    }

    std::vector<int> exposure(static_cast<std::size_t>(cfg.n_units), 1);
    ExperimentPanel panel = ExperimentPanel::dense(std::move(cohort), std::move(exposure), w,
                                                   std::move(values), schedule.cohorts());
    return {std::move(panel), std::move(schedule)};
}

// ---------------------------------------------------------------------------
// Replication study.

struct ApproachSummary {
    std::string name;
    int replications = 0;
    int converged = 0;
    double mean_A = 0.0, sd_A = 0.0;
    double mean_B = 0.0, sd_B = 0.0;
    std::vector<double> rep_A;        // per replication (all, converged or not)
    std::vector<double> rep_B;
    std::vector<char> rep_converged;
    std::vector<double> delta_mean;   // per window t = 1..k-1, across replications
    std::vector<double> delta_var;
};

struct ReplicationSummary {
    SimulationConfig config;
    ApproachSummary observational;  // difference-in-differences on a two-cohort split
    ApproachSummary experimental;   // ladder on a k-cohort split of the same pool
};

namespace detail {

struct RepOutcome {
    double A[2] = {0.0, 0.0};
    double B[2] = {0.0, 0.0};
    bool ok[2] = {false, false};
    std::vector<double> delta[2];  // per window
};

/// Accumulate cell means over the shared baseline plus per-schedule effect
/// draws, without materializing a panel.
inline void accumulate_cells(const SimulationConfig& cfg, const std::vector<double>& base,
                             const std::vector<int>& cohort, const CohortSchedule& schedule,
                             stats::RandomStream& rng, CellMeans& cells) {
    int w = cfg.windows();
    std::vector<int> first_treated(static_cast<std::size_t>(schedule.cohorts() + 1), 0);
    for (int c = 1; c <= schedule.cohorts(); ++c) {
        first_treated[static_cast<std::size_t>(c)] = schedule.first_treated_window(c);
    }
    bool with_effect = cfg.effect_A != 0.0;
    std::size_t pos = 0;
    for (long u = 0; u < cfg.n_units; ++u) {
        int c = cohort[static_cast<std::size_t>(u)];
        int ft = first_treated[static_cast<std::size_t>(c)];
        for (int j = 1; j <= w; ++j, ++pos) {
            double y = base[pos];
            if (with_effect && ft != 0 && j >= ft) {
                y += effect_draw(cfg, j - ft + 1, rng);
            }
            Cell& cell = cells.cell(c, j);
            cell.acc.add(y);
            cell.arm = schedule.arm(c, j);
        }
    }
}

inline RepOutcome run_one_replication(const SimulationConfig& cfg, std::uint64_t rep_seed) {
    stats::RandomStream rng(rep_seed);
    std::vector<double> base = draw_baseline(cfg, rng);

    CohortSchedule did_schedule = CohortSchedule::two_cohort(cfg.windows());
    CohortSchedule ladder_schedule = CohortSchedule::ladder(cfg.k);

    RepOutcome out;

    // Two windows give the delta series (useful for variance studies) but
    // not enough points for the two-parameter curve; skip the fit then.
    bool fittable = cfg.windows() >= 3;

    std::vector<int> cohorts_did = split_cohorts(cfg.n_units, 2, rng);
    CellMeans cells_did(2, cfg.windows());
    accumulate_cells(cfg, base, cohorts_did, did_schedule, rng, cells_did);
    LearningSeries did = did_learning_series(cells_did);
    if (fittable) {
        ExponentialFit fit_did = fit_exponential(did);
        out.A[0] = fit_did.A;
        out.B[0] = fit_did.B;
        out.ok[0] = fit_did.converged && !fit_did.no_learning;
    }
    out.delta[0].reserve(did.points.size());
    for (const LearningPoint& p : did.points) out.delta[0].push_back(p.delta_hat);

    std::vector<int> cohorts_lad = split_cohorts(cfg.n_units, cfg.k, rng);
    CellMeans cells_lad(cfg.k, cfg.windows());
    accumulate_cells(cfg, base, cohorts_lad, ladder_schedule, rng, cells_lad);
    LearningSeries lad = ladder_learning_series(cells_lad, ladder_schedule);
    if (fittable) {
        ExponentialFit fit_lad = fit_exponential(lad);
        out.A[1] = fit_lad.A;
        out.B[1] = fit_lad.B;
        out.ok[1] = fit_lad.converged && !fit_lad.no_learning;
    }
    out.delta[1].reserve(lad.points.size());
    for (const LearningPoint& p : lad.points) out.delta[1].push_back(p.delta_hat);

    return out;
}

}  // namespace detail

/// Runs `config.replications` independent experiments. Each replication
/// draws a fresh baseline from stream (seed, r) and splits the same unit
/// pool two ways: two cohorts for the observational (difference-in-
/// differences) analysis and k cohorts for the experimental (ladder) one,
/// so the approaches face the same noise. Summaries are reduced in
/// replication order, independent of thread count.
inline ReplicationSummary run_replications(const SimulationConfig& cfg) {
    cfg.validate();
    if (cfg.replications < 2) throw DataError("run_replications: need at least 2 replications");

    std::vector<detail::RepOutcome> reps(static_cast<std::size_t>(cfg.replications));
    parallel_for(static_cast<std::size_t>(cfg.replications), [&](std::size_t r) {
        try {
            reps[r] = detail::run_one_replication(cfg, stats::derive_stream_seed(cfg.seed, r));
        } catch (const std::exception& e) {
            throw DataError("replication " + std::to_string(r) + ": " + e.what());
        }
    });

    ReplicationSummary summary;
    summary.config = cfg;
    summary.observational.name = "observational";
    summary.experimental.name = "experimental";

    for (int a = 0; a < 2; ++a) {
        ApproachSummary& s = (a == 0) ? summary.observational : summary.experimental;
        s.replications = cfg.replications;
        stats::RunningStat sa, sb;
        std::vector<stats::RunningStat> sd(static_cast<std::size_t>(cfg.windows()));
        for (const detail::RepOutcome& rep : reps) {
            s.rep_A.push_back(rep.A[a]);
            s.rep_B.push_back(rep.B[a]);
            s.rep_converged.push_back(rep.ok[a] ? 1 : 0);
            if (rep.ok[a]) {
                ++s.converged;
                sa.add(rep.A[a]);
                sb.add(rep.B[a]);
            }
            for (std::size_t t = 0; t < rep.delta[a].size(); ++t) {
                sd[t].add(rep.delta[a][t]);
            }
        }
        if (s.converged >= 2) {
            s.mean_A = sa.mean;
            s.sd_A = std::sqrt(sa.sample_variance());
            s.mean_B = sb.mean;
            s.sd_B = std::sqrt(sb.sample_variance());
        } else if (s.converged == 1) {
            s.mean_A = sa.mean;
            s.mean_B = sb.mean;
        }
        s.delta_mean.resize(sd.size());
        s.delta_var.resize(sd.size());
        for (std::size_t t = 0; t < sd.size(); ++t) {
            s.delta_mean[t] = sd[t].mean;
            s.delta_var[t] = (sd[t].n >= 2) ? sd[t].sample_variance() : 0.0;
        }
    }
    return summary;
}

}  // namespace learnfx
