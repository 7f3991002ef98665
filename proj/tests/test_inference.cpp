#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "learnfx/learnfx.hpp"

using namespace learnfx;

TEST_CASE("z interval matches the textbook two-sided case") {
    auto e = gaussian_test(2.0, 4.0, 0.95);
    CHECK_THAT(e.std_error, Catch::Matchers::WithinAbs(2.0, 1e-12));
    CHECK_THAT(e.ci_low, Catch::Matchers::WithinAbs(-1.92, 5e-3));
    CHECK_THAT(e.ci_high, Catch::Matchers::WithinAbs(5.92, 5e-3));
    CHECK_THAT(e.p_value, Catch::Matchers::WithinAbs(0.3173, 5e-4));
}

TEST_CASE("z interval degenerates gracefully at zero variance") {
    auto flat = gaussian_test(0.0, 0.0);
    CHECK(flat.p_value == 1.0);
    CHECK(flat.ci_low == 0.0);
    CHECK(flat.ci_high == 0.0);
    auto shifted = gaussian_test(1.5, 0.0);
    CHECK(shifted.p_value == 0.0);
    CHECK(shifted.ci_low == 1.5);
}

TEST_CASE("z interval rejects invalid inputs") {
    CHECK_THROWS_AS(gaussian_test(0.0, -1.0), DataError);
    CHECK_THROWS_AS(gaussian_test(0.0, 1.0, 0.0), DataError);
    CHECK_THROWS_AS(gaussian_test(0.0, 1.0, 1.0), DataError);
}

TEST_CASE("p-values fall as the point moves away from zero") {
    double prev = 1.1;
    for (double point : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0}) {
        auto e = gaussian_test(point, 1.0);
        CHECK(e.p_value < prev);
        prev = e.p_value;
    }
}

TEST_CASE("normal quantile inverts the normal cdf") {
    for (double p : {0.001, 0.01, 0.025, 0.2, 0.5, 0.8, 0.975, 0.99, 0.999}) {
        double z = stats::normal_quantile(p);
        CHECK_THAT(stats::normal_cdf(z), Catch::Matchers::WithinAbs(p, 1e-12));
    }
    CHECK_THAT(stats::normal_quantile(0.975),
               Catch::Matchers::WithinAbs(1.959963984540054, 1e-9));
}

TEST_CASE("chi-square tail matches closed forms") {
    for (double x : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0}) {
        CHECK_THAT(stats::chi_square_sf(x, 2),
                   Catch::Matchers::WithinRel(std::exp(-x / 2.0), 1e-10));
        double z = std::sqrt(x);
        CHECK_THAT(stats::chi_square_sf(x, 1),
                   Catch::Matchers::WithinRel(2.0 * stats::normal_sf(z), 1e-10));
    }
    CHECK_THAT(stats::chi_square_sf(3.841458820694124, 1),
               Catch::Matchers::WithinAbs(0.05, 1e-9));
    CHECK_THAT(stats::chi_square_sf(11.070497693516351, 5),
               Catch::Matchers::WithinAbs(0.05, 1e-9));
}

TEST_CASE("paired variance uses within-unit differences") {
    auto panel = testutil::dense_panel(2, 2, 2, [](int c, int w, int u) {
        if (w == 1) return 0.0;
        if (c == 1) return u == 0 ? 0.0 : 2.0;
        return u == 0 ? 1.0 : 3.0;
    });
    auto ve = did_variance(panel, 2);
    CHECK(ve.paired);
    CHECK_THAT(ve.value, Catch::Matchers::WithinRel(2.0, 1e-12));
}

TEST_CASE("paired variance captures within-unit correlation the fallback misses") {
    auto correlated = [](int c, int w, int u) {
        double base = u == 0 ? 0.0 : 10.0;
        double slope = c == 2 ? 1.0 : 0.0;
        return base + (w == 2 ? slope : 0.0);
    };
    auto paired_panel = testutil::dense_panel(2, 2, 2, correlated);
    auto ve = did_variance(paired_panel, 2);
    CHECK(ve.paired);
    CHECK(ve.value == 0.0);

    learnfx::PanelBuilder b;
    for (int c = 1; c <= 2; ++c) {
        for (int u = 0; u < 2; ++u) {
            std::string id = "c" + std::to_string(c) + "u" + std::to_string(u);
            for (int w = 1; w <= 2; ++w) b.add(id, c, w, correlated(c, w, u));
        }
    }
    auto observed = impute(b.build(), ImputePolicy::observed_only);
    auto fallback = did_variance(observed, 2);
    CHECK_FALSE(fallback.paired);
    CHECK_THAT(fallback.value, Catch::Matchers::WithinRel(100.0, 1e-12));
}

TEST_CASE("paired variance needs two complete units per arm") {
    auto panel = testutil::dense_panel(2, 2, 1, [](int, int w, int) {
        return static_cast<double>(w);
    });
    CHECK_THROWS_AS(did_variance(panel, 2), DataError);
}

TEST_CASE("staggered-contrast variance sums the two cell terms") {
    auto panel = testutil::dense_panel(3, 2, 2, [](int c, int w, int u) {
        if (w == 2 && c >= 2) return u == 0 ? 0.0 : 2.0;
        return 1.0;
    });
    auto cells = cell_means(panel, CohortSchedule::ladder(3));
    CHECK_THAT(ladder_variance(cells, 2), Catch::Matchers::WithinRel(2.0, 1e-12));

    auto flat = testutil::dense_panel(3, 2, 2, [](int, int, int) { return 5.0; });
    auto flat_cells = cell_means(flat, CohortSchedule::ladder(3));
    CHECK(ladder_variance(flat_cells, 2) == 0.0);
}

TEST_CASE("staggered-contrast variance rejects degenerate cells") {
    auto panel = testutil::dense_panel(3, 2, 1, [](int, int w, int) {
        return static_cast<double>(w);
    });
    auto cells = cell_means(panel, CohortSchedule::ladder(3));
    CHECK_THROWS_AS(ladder_variance(cells, 2), DataError);
}

TEST_CASE("final-window variance reads the two tenure cells") {
    auto schedule = CohortSchedule::ladder(4);
    auto panel = testutil::dense_panel(4, 3, 3, [](int c, int w, int u) {
        if (w == 3 && (c == 2 || c == 4)) return static_cast<double>(u);
        return 0.0;
    });
    auto cells = cell_means(panel, schedule);
    double s2 = 1.0;  // sample variance of {0,1,2}
    CHECK_THAT(cross_sectional_variance(cells, schedule, 3),
               Catch::Matchers::WithinRel(2.0 * s2 / 3.0, 1e-12));
}

TEST_CASE("design power comparison reproduces the reference numbers") {
    auto pc = power_comparison(1000, 14, 4.0, 0.5);
    CHECK_THAT(pc.var_experimental, Catch::Matchers::WithinRel(0.112, 1e-12));
    CHECK_THAT(pc.var_observational, Catch::Matchers::WithinRel(0.016, 1e-12));
    CHECK(pc.observational_wins);
    CHECK_THAT(pc.crossover_rho, Catch::Matchers::WithinAbs(1.0 - 14.0 / 4.0, 1e-12));
}

TEST_CASE("design comparison crossover sits at one minus k over four") {
    auto pc = power_comparison(1000, 3, 1.0, 0.25);
    CHECK_THAT(pc.crossover_rho, Catch::Matchers::WithinAbs(0.25, 1e-12));
    CHECK(pc.var_experimental == pc.var_observational);
    CHECK_FALSE(pc.observational_wins);

    auto below = power_comparison(1000, 3, 1.0, 0.1);
    CHECK(below.var_observational > below.var_experimental);
    auto above = power_comparison(1000, 3, 1.0, 0.4);
    CHECK(above.var_observational < above.var_experimental);
}

TEST_CASE("observational design wins for any experiment past three windows") {
    // k = 4 at rho = 0 is the exact boundary: 8(1-0) == 2*4. Everywhere past
    // it the observational variance is strictly smaller.
    auto tie = power_comparison(5000, 4, 2.5, 0.0);
    CHECK(tie.var_observational == tie.var_experimental);
    CHECK_FALSE(tie.observational_wins);
    for (int k : {4, 5, 8, 14, 30}) {
        for (double rho : {0.0, 0.2, 0.5, 0.9}) {
            if (k == 4 && rho == 0.0) continue;
            auto pc = power_comparison(5000, k, 2.5, rho);
            CHECK(pc.observational_wins);
            CHECK(pc.var_observational < pc.var_experimental);
        }
    }
}

TEST_CASE("design comparison validates its domain") {
    CHECK_THROWS_AS(power_comparison(1000, 2, 1.0, 0.5), DataError);
    CHECK_THROWS_AS(power_comparison(10, 14, 1.0, 0.5), DataError);
    CHECK_THROWS_AS(power_comparison(1000, 14, 0.0, 0.5), DataError);
    CHECK_THROWS_AS(power_comparison(1000, 14, 1.0, 1.0), DataError);
    CHECK_THROWS_AS(power_comparison(1000, 14, 1.0, -0.1), DataError);
}

TEST_CASE("correlation estimate recovers the shared-component weight") {
    SimulationConfig cfg;
    cfg.n_units = 4000;
    cfg.k = 4;
    cfg.sigma = 2.0;
    cfg.effect_A = 0.0;
    cfg.rho = 0.5;
    cfg.replications = 1;
    auto [panel, schedule] = generate_experiment(cfg, 101);
    (void)schedule;
    double rho = estimate_rho(panel);
    CHECK_THAT(rho, Catch::Matchers::WithinAbs(0.5, 0.05));
}

TEST_CASE("interval completion pins the first window and fills the rest") {
    auto panel = testutil::dense_panel(2, 3, 6, [](int c, int w, int u) {
        return 0.1 * u + (c == 2 ? 0.5 * w : 0.0);
    });
    auto schedule = CohortSchedule::two_cohort(3);
    auto cells = cell_means(panel, schedule);
    auto series = did_learning_series(cells);
    auto warnings = complete_learning_series(series, panel, cells, schedule);
    CHECK(warnings.empty());
    CHECK(series.points[0].variance == 0.0);
    CHECK(series.points[0].p_value == 1.0);
    for (std::size_t t = 1; t < series.points.size(); ++t) {
        const auto& p = series.points[t];
        CHECK(std::isfinite(p.variance));
        CHECK(p.ci_low <= p.delta_hat);
        CHECK(p.ci_high >= p.delta_hat);
        CHECK(p.p_value >= 0.0);
        CHECK(p.p_value <= 1.0);
    }
}

TEST_CASE("interval completion warns once about the unpaired fallback") {
    learnfx::PanelBuilder b;
    for (int c = 1; c <= 2; ++c) {
        for (int u = 0; u < 4; ++u) {
            std::string id = "c" + std::to_string(c) + "u" + std::to_string(u);
            for (int w = 1; w <= 3; ++w) {
                b.add(id, c, w, 0.25 * u + (c == 2 ? 0.5 * w : 0.0));
            }
        }
    }
    auto panel = impute(b.build(), ImputePolicy::observed_only);
    auto schedule = CohortSchedule::two_cohort(3);
    auto cells = cell_means(panel, schedule);
    auto series = did_learning_series(cells);
    auto warnings = complete_learning_series(series, panel, cells, schedule);
    REQUIRE(warnings.size() == 1);
    CHECK_THAT(warnings[0], Catch::Matchers::ContainsSubstring("unpaired"));
}

TEST_CASE("effect-series completion uses cumulative averages when units align") {
    auto panel = testutil::dense_panel(2, 4, 8, [](int c, int w, int u) {
        return 0.3 * u + (c == 2 ? 1.0 + 0.1 * w : 0.0);
    });
    auto schedule = CohortSchedule::two_cohort(4);
    auto cells = cell_means(panel, schedule);
    auto effects = treatment_effect_series(cells);
    auto warnings = complete_effect_series(effects, panel, cells);
    CHECK(warnings.empty());
    for (const auto& p : effects.points) {
        CHECK(std::isfinite(p.variance));
        CHECK(p.ci_low <= p.tau_hat);
        CHECK(p.ci_high >= p.tau_hat);
    }
}

TEST_CASE("effect-series completion warns when pairing is impossible") {
    learnfx::PanelBuilder b;
    for (int c = 1; c <= 2; ++c) {
        for (int u = 0; u < 4; ++u) {
            std::string id = "c" + std::to_string(c) + "u" + std::to_string(u);
            int first = (u == 0) ? 2 : 1;
            for (int w = first; w <= 3; ++w) {
                b.add(id, c, w, 0.25 * u + 0.5 * w);
            }
        }
    }
    auto panel = impute(b.build(), ImputePolicy::zero);
    auto schedule = CohortSchedule::two_cohort(3);
    auto cells = cell_means(panel, schedule);
    auto effects = treatment_effect_series(cells);
    auto warnings = complete_effect_series(effects, panel, cells);
    REQUIRE_FALSE(warnings.empty());
    for (const auto& p : effects.points) CHECK(std::isfinite(p.variance));
}
