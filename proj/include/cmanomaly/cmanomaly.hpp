#pragma once

// Forecasting-based anomaly detection for multivariate monitoring series: a linear-time
// pairwise-interaction layer feeding a small MLP, sigmoid-of-error scoring, run-adjusted
// F1 evaluation, and a kernel efficiency harness.

#include "cmanomaly/adam.hpp"
#include "cmanomaly/bench.hpp"
#include "cmanomaly/dataset.hpp"
#include "cmanomaly/detector.hpp"
#include "cmanomaly/error.hpp"
#include "cmanomaly/interactions.hpp"
#include "cmanomaly/manifest.hpp"
#include "cmanomaly/matrix.hpp"
#include "cmanomaly/mlp.hpp"
#include "cmanomaly/model.hpp"
#include "cmanomaly/model_io.hpp"
#include "cmanomaly/preprocess.hpp"
#include "cmanomaly/reports.hpp"
#include "cmanomaly/rng.hpp"
#include "cmanomaly/train.hpp"
