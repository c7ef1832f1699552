#pragma once

#include "matsubara/graph.hpp"
#include "matsubara/graph_json.hpp"
#include "matsubara/kernel.hpp"
#include "matsubara/expression.hpp"
#include "matsubara/render.hpp"
#include "matsubara/engine.hpp"
#include "matsubara/oracles.hpp"
#include "matsubara/random_graph.hpp"
