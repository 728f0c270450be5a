#pragma once

#include "mlspi/bound.hpp"
#include "mlspi/errors.hpp"
#include "mlspi/evaluation.hpp"
#include "mlspi/exact_solver.hpp"
#include "mlspi/features.hpp"
#include "mlspi/game_model.hpp"
#include "mlspi/lspi.hpp"
#include "mlspi/matrix_game.hpp"
#include "mlspi/random.hpp"
#include "mlspi/state_space.hpp"
