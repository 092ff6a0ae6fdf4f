#pragma once

// Umbrella header. The bridge client (POSIX-only) is not included here;
// include samodal/bridge.hpp explicitly.

#include "samodal/error.hpp"
#include "samodal/types.hpp"
#include "samodal/mask.hpp"
#include "samodal/rle.hpp"
#include "samodal/rng.hpp"
#include "samodal/sampling.hpp"
#include "samodal/scenegen.hpp"
#include "samodal/backends.hpp"
#include "samodal/memory.hpp"
#include "samodal/pipeline.hpp"
#include "samodal/metrics.hpp"
#include "samodal/evaluate.hpp"
#include "samodal/ablation.hpp"
#include "samodal/render.hpp"
#include "samodal/io.hpp"
