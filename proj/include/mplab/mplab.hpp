#pragma once

#include "mplab/cli.hpp"
#include "mplab/config.hpp"
#include "mplab/ensemble.hpp"
#include "mplab/fluct_mc.hpp"
#include "mplab/funcalc.hpp"
#include "mplab/linalg.hpp"
#include "mplab/mp_analytics.hpp"
#include "mplab/quadrature.hpp"
#include "mplab/rng.hpp"
#include "mplab/stats.hpp"
#include "mplab/test_function.hpp"
