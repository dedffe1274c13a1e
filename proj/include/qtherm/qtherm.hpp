#pragma once

#include "config.hpp"
#include "constants.hpp"
#include "ensemble.hpp"
#include "entropy.hpp"
#include "error.hpp"
#include "io.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "oracle.hpp"
#include "record.hpp"
#include "rng.hpp"
#include "steps.hpp"
#include "thermo.hpp"
#include "tpm.hpp"
#include "unravel.hpp"
