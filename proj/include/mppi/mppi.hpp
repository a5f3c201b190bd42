#pragma once

#include "mppi/bench.hpp"
#include "mppi/config.hpp"
#include "mppi/cost.hpp"
#include "mppi/error.hpp"
#include "mppi/model.hpp"
#include "mppi/pipeline.hpp"
#include "mppi/prng.hpp"
#include "mppi/report.hpp"
#include "mppi/selftest.hpp"
#include "mppi/sim.hpp"
#include "mppi/solver.hpp"
