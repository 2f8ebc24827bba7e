#pragma once

#include "ciail/numcore/adam.hpp"
#include "ciail/numcore/checkpoint.hpp"
#include "ciail/numcore/finite_diff.hpp"
#include "ciail/numcore/mlp.hpp"
#include "ciail/numcore/rng.hpp"
#include "ciail/numcore/tape.hpp"
#include "ciail/numcore/tensor.hpp"
