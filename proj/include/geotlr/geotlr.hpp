#pragma once

// Umbrella header.
#include "geotlr/errors.hpp"
#include "geotlr/geometry.hpp"
#include "geotlr/kernels.hpp"
#include "geotlr/tilestore.hpp"
#include "geotlr/compression.hpp"
#include "geotlr/tlr_linalg.hpp"
#include "geotlr/covariance.hpp"
#include "geotlr/nelder_mead.hpp"
#include "geotlr/stats.hpp"
#include "geotlr/predict.hpp"
#include "geotlr/io.hpp"
#include "geotlr/benchmark.hpp"
