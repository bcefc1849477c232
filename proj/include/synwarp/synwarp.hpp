#pragma once

// Umbrella header for the whole library.

#include "synwarp/ablate.hpp"
#include "synwarp/bundle.hpp"
#include "synwarp/cgf.hpp"
#include "synwarp/common.hpp"
#include "synwarp/config.hpp"
#include "synwarp/dofw.hpp"
#include "synwarp/eval.hpp"
#include "synwarp/grad.hpp"
#include "synwarp/gradcheck.hpp"
#include "synwarp/losses.hpp"
#include "synwarp/metrics.hpp"
#include "synwarp/model.hpp"
#include "synwarp/motion.hpp"
#include "synwarp/ops.hpp"
#include "synwarp/optim.hpp"
#include "synwarp/params.hpp"
#include "synwarp/rac.hpp"
#include "synwarp/synth.hpp"
#include "synwarp/tape.hpp"
#include "synwarp/tensor.hpp"
#include "synwarp/train.hpp"
