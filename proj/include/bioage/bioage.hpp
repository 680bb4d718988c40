#pragma once

#include "bridge.hpp"
#include "calibration.hpp"
#include "density.hpp"
#include "deterministic.hpp"
#include "erl.hpp"
#include "error.hpp"
#include "grid.hpp"
#include "hazard.hpp"
#include "mc_oracle.hpp"
#include "pde_engine.hpp"
#include "policy.hpp"
#include "rng.hpp"
