#pragma once

// Umbrella header.

#include "stecgd/coarse_grad.hpp"
#include "stecgd/dataset.hpp"
#include "stecgd/decomposition.hpp"
#include "stecgd/diagnostics.hpp"
#include "stecgd/errors.hpp"
#include "stecgd/experiment.hpp"
#include "stecgd/io.hpp"
#include "stecgd/network.hpp"
#include "stecgd/quantization.hpp"
#include "stecgd/subspace_data.hpp"
#include "stecgd/svg.hpp"
