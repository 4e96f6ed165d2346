#pragma once

// Umbrella header for the whole library.

#include "mailbench/analysis.hpp"
#include "mailbench/common.hpp"
#include "mailbench/envs.hpp"
#include "mailbench/experiment.hpp"
#include "mailbench/game.hpp"
#include "mailbench/imitation.hpp"
#include "mailbench/mail.hpp"
#include "mailbench/matrix_nash.hpp"
#include "mailbench/plot.hpp"
#include "mailbench/records.hpp"
#include "mailbench/reward_free.hpp"
#include "mailbench/rng.hpp"
#include "mailbench/serialize.hpp"
