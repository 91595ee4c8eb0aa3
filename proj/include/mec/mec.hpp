#pragma once

#include "mec/adversary.hpp"
#include "mec/agents.hpp"
#include "mec/baselines.hpp"
#include "mec/env.hpp"
#include "mec/error.hpp"
#include "mec/harness.hpp"
#include "mec/nn.hpp"
#include "mec/policy.hpp"
#include "mec/privacy.hpp"
#include "mec/random.hpp"
