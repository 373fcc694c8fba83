#pragma once

// Umbrella header.

#include "statesim/aggregate.hpp"
#include "statesim/bisim.hpp"
#include "statesim/experiment.hpp"
#include "statesim/generators.hpp"
#include "statesim/io_util.hpp"
#include "statesim/mdp.hpp"
#include "statesim/mdp_io.hpp"
#include "statesim/metrics.hpp"
#include "statesim/rng.hpp"
#include "statesim/transport.hpp"
