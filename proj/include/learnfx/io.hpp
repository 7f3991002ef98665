#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "learnfx/panel.hpp"
#include "learnfx/simulate.hpp"

// File loading: schedule and simulation-config JSON documents.

namespace learnfx::io {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << content;
}

inline DesignKind parse_design(const std::string& s) {
    if (s == "two-cohort") return DesignKind::two_cohort;
    if (s == "ladder") return DesignKind::ladder;
    throw DataError("design must be \"two-cohort\" or \"ladder\", got \"" + s + "\"");
}

inline const char* design_name(DesignKind d) {
    return d == DesignKind::two_cohort ? "two-cohort" : "ladder";
}

/// Schedule document: {"design": "two-cohort"|"ladder", "cohorts": m,
/// "windows": k-1, optional "assignments": matrix of "C"/"T"}. For a ladder,
/// either of cohorts/windows may be omitted (they determine each other).
inline CohortSchedule parse_schedule(const nlohmann::json& j) {
    if (!j.is_object()) throw DataError("schedule: expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        if (key != "design" && key != "cohorts" && key != "windows" && key != "assignments") {
            throw DataError("schedule: unknown key \"" + key + "\"");
        }
    }
    if (!j.contains("design")) throw DataError("schedule: missing \"design\"");
    DesignKind design = parse_design(j.at("design").get<std::string>());

    int cohorts = j.contains("cohorts") ? j.at("cohorts").get<int>() : 0;
    int windows = j.contains("windows") ? j.at("windows").get<int>() : 0;

    if (j.contains("assignments")) {
        const auto& m = j.at("assignments");
        if (!m.is_array() || m.empty()) throw DataError("schedule: assignments must be a matrix");
        int rows = static_cast<int>(m.size());
        int cols = static_cast<int>(m.at(0).size());
        if (cohorts == 0) cohorts = rows;
        if (windows == 0) windows = cols;
        if (rows != cohorts || cols == 0) {
            throw DataError("schedule: assignments shape disagrees with cohort count");
        }
        std::vector<Arm> a;
        a.reserve(static_cast<std::size_t>(rows) * cols);
        for (const auto& row : m) {
            if (static_cast<int>(row.size()) != windows) {
                throw DataError("schedule: ragged assignments matrix");
            }
            for (const auto& cell : row) {
                std::string s = cell.get<std::string>();
                if (s == "C") a.push_back(Arm::control);
                else if (s == "T") a.push_back(Arm::treatment);
                else throw DataError("schedule: assignment entries must be \"C\" or \"T\"");
            }
        }
        return CohortSchedule(design, cohorts, windows, std::move(a));
    }

    if (design == DesignKind::two_cohort) {
        if (cohorts == 0) cohorts = 2;
        if (cohorts != 2) throw DataError("schedule: two-cohort design must have 2 cohorts");
        if (windows == 0) throw DataError("schedule: two-cohort design needs \"windows\"");
        return CohortSchedule::two_cohort(windows);
    }
    if (cohorts == 0 && windows == 0) {
        throw DataError("schedule: ladder design needs \"cohorts\" or \"windows\"");
    }
    if (cohorts == 0) cohorts = windows + 1;
    if (windows != 0 && windows != cohorts - 1) {
        throw DataError("schedule: ladder design needs cohorts == windows + 1");
    }
    return CohortSchedule::ladder(cohorts);
}

inline CohortSchedule load_schedule(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("schedule " + path + ": " + e.what());
    }
    return parse_schedule(j);
}

/// Simulation config document mirroring the SimulationConfig fields.
inline SimulationConfig parse_simulation_config(const nlohmann::json& j) {
    if (!j.is_object()) throw DataError("simulation config: expected a JSON object");
    SimulationConfig cfg;
    cfg.window_effects.clear();
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        const auto& v = it.value();
        try {
            if (key == "n_units") cfg.n_units = v.get<long>();
            else if (key == "k") cfg.k = v.get<int>();
            else if (key == "sigma") cfg.sigma = v.get<double>();
            else if (key == "effect_A") cfg.effect_A = v.get<double>();
            else if (key == "effect_B") cfg.effect_B = v.get<double>();
            else if (key == "baseline_intercept") cfg.baseline_intercept = v.get<double>();
            else if (key == "window_effects") cfg.window_effects = v.get<std::vector<double>>();
            else if (key == "rho") cfg.rho = v.get<double>();
            else if (key == "design") cfg.design = parse_design(v.get<std::string>());
            else if (key == "replications") cfg.replications = v.get<int>();
            else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
            else throw DataError("simulation config: unknown key \"" + key + "\"");
        } catch (const nlohmann::json::exception& e) {
            throw DataError("simulation config key \"" + key + "\": " + e.what());
        }
    }
    cfg.validate();
    return cfg;
}

inline SimulationConfig load_simulation_config(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("simulation config " + path + ": " + e.what());
    }
    return parse_simulation_config(j);
}

}  // namespace learnfx::io
