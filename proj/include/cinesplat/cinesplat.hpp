#pragma once

// Convenience include for the whole library.

#include "cinesplat/checks.hpp"
#include "cinesplat/common.hpp"
#include "cinesplat/dataset_io.hpp"
#include "cinesplat/fft.hpp"
#include "cinesplat/forward_model.hpp"
#include "cinesplat/grid.hpp"
#include "cinesplat/image_io.hpp"
#include "cinesplat/metrics.hpp"
#include "cinesplat/model_io.hpp"
#include "cinesplat/optimizer.hpp"
#include "cinesplat/parallel.hpp"
#include "cinesplat/phantom.hpp"
#include "cinesplat/primitive.hpp"
#include "cinesplat/rasterize.hpp"
#include "cinesplat/temporal.hpp"
