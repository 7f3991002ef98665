#pragma once

#include <cstdint>

namespace learnfx::config {

inline constexpr double default_alpha = 0.05;
inline constexpr double srm_p_threshold = 1e-3;

inline constexpr double fit_gradient_tol = 1e-10;
inline constexpr int fit_max_iterations = 200;
inline constexpr double fit_b_min = 1e-6;
inline constexpr double fit_b_max = 1e3;
inline constexpr double fit_grid_b_low = 0.01;
inline constexpr double fit_grid_b_high = 5.0;
inline constexpr int fit_grid_points = 40;

inline constexpr int bootstrap_default_reps = 200;
inline constexpr int bootstrap_min_reps = 50;
inline constexpr double bootstrap_max_drop_fraction = 0.20;

inline constexpr const char* report_schema_version = "1.0";
inline constexpr const char* tool_version = "0.1.0";

}  // namespace learnfx::config
