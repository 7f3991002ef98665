#pragma once

#include "learnfx/analyze.hpp"
#include "learnfx/config.hpp"
#include "learnfx/estimators.hpp"
#include "learnfx/extrapolate.hpp"
#include "learnfx/inference.hpp"
#include "learnfx/io.hpp"
#include "learnfx/panel.hpp"
#include "learnfx/parallel.hpp"
#include "learnfx/report.hpp"
#include "learnfx/simulate.hpp"
#include "learnfx/stats.hpp"
