#pragma once

#include "gsobi/diagnostics.hpp"
#include "gsobi/error.hpp"
#include "gsobi/estimators.hpp"
#include "gsobi/io.hpp"
#include "gsobi/matrixops.hpp"
#include "gsobi/metrics.hpp"
#include "gsobi/modelfit.hpp"
#include "gsobi/optimize.hpp"
#include "gsobi/sim.hpp"
#include "gsobi/study.hpp"
