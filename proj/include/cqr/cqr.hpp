#pragma once

// Censored quantile regression: losses, censoring-distribution estimators,
// the MM solver, bootstrap inference and the simulation harness.

#include "cqr/errors.hpp"
#include "cqr/sample.hpp"
#include "cqr/step_distribution.hpp"
#include "cqr/losscore.hpp"
#include "cqr/kernel.hpp"
#include "cqr/survdist.hpp"
#include "cqr/mmsolver.hpp"
#include "cqr/bandwidth_cv.hpp"
#include "cqr/parallel.hpp"
#include "cqr/inference.hpp"
#include "cqr/simlab.hpp"
#include "cqr/simlab_io.hpp"
