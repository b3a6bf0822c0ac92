#pragma once

#include "coopreg/bvp.hpp"
#include "coopreg/cli.hpp"
#include "coopreg/comm_graph.hpp"
#include "coopreg/errors.hpp"
#include "coopreg/expression.hpp"
#include "coopreg/grid.hpp"
#include "coopreg/kernel.hpp"
#include "coopreg/linalg.hpp"
#include "coopreg/scenario.hpp"
#include "coopreg/signal_model.hpp"
#include "coopreg/simulator.hpp"
#include "coopreg/synthesis.hpp"
