#pragma once

#include "coex/analytic.hpp"
#include "coex/core.hpp"
#include "coex/experiments.hpp"
#include "coex/metric_curve.hpp"
#include "coex/montecarlo.hpp"
#include "coex/quadrature.hpp"
#include "coex/rng.hpp"
#include "coex/scenarios.hpp"
