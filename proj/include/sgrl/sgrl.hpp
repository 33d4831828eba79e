#pragma once

#include "sgrl/baseline.hpp"
#include "sgrl/core.hpp"
#include "sgrl/frozen_lake.hpp"
#include "sgrl/generators.hpp"
#include "sgrl/gridworld.hpp"
#include "sgrl/harness.hpp"
#include "sgrl/io.hpp"
#include "sgrl/nsga2.hpp"
#include "sgrl/policy.hpp"
#include "sgrl/properties.hpp"
#include "sgrl/random.hpp"
