#pragma once

// Everything except the YAML loader (hsort/config.hpp), which needs yaml-cpp.
#include "hsort/bytes.hpp"
#include "hsort/chain.hpp"
#include "hsort/circuits.hpp"
#include "hsort/encdom.hpp"
#include "hsort/experiment.hpp"
#include "hsort/setup.hpp"
#include "hsort/simnet.hpp"
#include "hsort/sortition.hpp"
#include "hsort/stake.hpp"
