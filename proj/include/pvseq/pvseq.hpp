#pragma once

#include "clickstream.hpp"
#include "dykstra.hpp"
#include "errors.hpp"
#include "estimator.hpp"
#include "evaluation.hpp"
#include "poset_graph.hpp"
#include "sequence.hpp"
#include "solver.hpp"
