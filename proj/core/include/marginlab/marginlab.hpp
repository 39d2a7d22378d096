#pragma once

// Umbrella header: the whole public surface.

#include "marginlab/analysis.hpp"
#include "marginlab/bounds.hpp"
#include "marginlab/constructions.hpp"
#include "marginlab/embedding.hpp"
#include "marginlab/errors.hpp"
#include "marginlab/reduce.hpp"
#include "marginlab/relevance.hpp"
#include "marginlab/rng.hpp"
#include "marginlab/train.hpp"
#include "marginlab/version.hpp"
