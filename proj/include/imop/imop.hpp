#pragma once

// Umbrella header.

#include "data.hpp"
#include "estimators.hpp"
#include "fixtures.hpp"
#include "harness.hpp"
#include "identifiability.hpp"
#include "io.hpp"
#include "linalg.hpp"
#include "loss.hpp"
#include "lp.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "qp.hpp"
#include "reform.hpp"
#include "search.hpp"
#include "solver.hpp"
