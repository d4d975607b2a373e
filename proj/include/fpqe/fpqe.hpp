#pragma once

// Umbrella header for the fidelity-preserving quantum encoding lab.

#include "fpqe/autodiff.hpp"
#include "fpqe/autoencoder.hpp"
#include "fpqe/bench.hpp"
#include "fpqe/common.hpp"
#include "fpqe/data.hpp"
#include "fpqe/encoders.hpp"
#include "fpqe/image_ops.hpp"
#include "fpqe/manifest.hpp"
#include "fpqe/metrics.hpp"
#include "fpqe/optim.hpp"
#include "fpqe/qnn.hpp"
#include "fpqe/quantum.hpp"
#include "fpqe/rng.hpp"
#include "fpqe/synthdata.hpp"
#include "fpqe/tensor.hpp"
#include "fpqe/version.hpp"
