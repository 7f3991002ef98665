#pragma once

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "learnfx/learnfx.hpp"

namespace testutil {

struct Obs {
    std::string id;
    int cohort;
    int window;
    double value;
};

inline learnfx::ExperimentPanel panel_from(const std::vector<Obs>& rows) {
    learnfx::PanelBuilder b;
    for (const Obs& r : rows) b.add(r.id, r.cohort, r.window, r.value);
    return b.build();
}

inline learnfx::ExperimentPanel csv_panel(const std::string& text,
                                          const learnfx::CsvSchema& schema = {}) {
    std::istringstream in(text);
    return learnfx::ingest_csv(in, schema);
}

/// Dense panel with `per_cohort` units in each of `cohorts` cohorts, all
/// observed over windows 1..windows; values from value(cohort, window, unit).
template <class F>
learnfx::ExperimentPanel dense_panel(int cohorts, int windows, int per_cohort, F&& value) {
    std::vector<int> cohort;
    std::vector<double> values;
    for (int c = 1; c <= cohorts; ++c) {
        for (int u = 0; u < per_cohort; ++u) {
            cohort.push_back(c);
            for (int w = 1; w <= windows; ++w) values.push_back(value(c, w, u));
        }
    }
    std::vector<int> exposure(cohort.size(), 1);
    return learnfx::ExperimentPanel::dense(std::move(cohort), std::move(exposure), windows,
                                           std::move(values), cohorts);
}

}  // namespace testutil
