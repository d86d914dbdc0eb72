#pragma once

// High-frequency-subspace diffusion for accelerated MR-style reconstruction:
// umbrella header.

#include "hfsdiff/acquisition.hpp"
#include "hfsdiff/bench.hpp"
#include "hfsdiff/core.hpp"
#include "hfsdiff/denoiser.hpp"
#include "hfsdiff/diffusion.hpp"
#include "hfsdiff/fft.hpp"
#include "hfsdiff/io.hpp"
#include "hfsdiff/masks.hpp"
#include "hfsdiff/metrics.hpp"
#include "hfsdiff/operators.hpp"
#include "hfsdiff/rng.hpp"
#include "hfsdiff/sampler.hpp"
#include "hfsdiff/schedule.hpp"
#include "hfsdiff/score.hpp"
