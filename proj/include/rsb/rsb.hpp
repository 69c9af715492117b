#pragma once

#include "rsb/errors.hpp"
#include "rsb/state_set.hpp"
#include "rsb/transition_system.hpp"
#include "rsb/model_io.hpp"
#include "rsb/antichain.hpp"
#include "rsb/ltl.hpp"
#include "rsb/fixpoint.hpp"
#include "rsb/partition.hpp"
#include "rsb/refinement.hpp"
#include "rsb/parallel.hpp"
#include "rsb/quotient.hpp"
#include "rsb/controller.hpp"
#include "rsb/grid.hpp"
