#pragma once

#include "headway/errors.hpp"
#include "headway/network.hpp"
#include "headway/fundamental_diagram.hpp"
#include "headway/route_choice.hpp"
#include "headway/scenario.hpp"
#include "headway/scenario_io.hpp"
#include "headway/engine.hpp"
#include "headway/mlp.hpp"
#include "headway/policy.hpp"
#include "headway/ppo.hpp"
#include "headway/report.hpp"
#include "headway/manifest.hpp"
