#pragma once

// Umbrella header.

#include "dloc/common.hpp"
#include "dloc/scene.hpp"
#include "dloc/channel.hpp"
#include "dloc/solver.hpp"
#include "dloc/refine.hpp"
#include "dloc/daun.hpp"
#include "dloc/config.hpp"
#include "dloc/snapshot_io.hpp"
#include "dloc/eval.hpp"
