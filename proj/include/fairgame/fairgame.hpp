#pragma once

#include "fairgame/environments.hpp"
#include "fairgame/error.hpp"
#include "fairgame/fair_learning.hpp"
#include "fairgame/game_core.hpp"
#include "fairgame/io.hpp"
#include "fairgame/markov_game.hpp"
#include "fairgame/metrics.hpp"
#include "fairgame/runner.hpp"
#include "fairgame/verify.hpp"
