#pragma once

#include "fasttcm/bench.hpp"
#include "fasttcm/bridge.hpp"
#include "fasttcm/checkpoint.hpp"
#include "fasttcm/config.hpp"
#include "fasttcm/dataset.hpp"
#include "fasttcm/encoders.hpp"
#include "fasttcm/eval.hpp"
#include "fasttcm/experiments.hpp"
#include "fasttcm/gradcheck.hpp"
#include "fasttcm/head.hpp"
#include "fasttcm/metrics.hpp"
#include "fasttcm/model.hpp"
#include "fasttcm/netpbm.hpp"
#include "fasttcm/ops.hpp"
#include "fasttcm/optim.hpp"
#include "fasttcm/rng.hpp"
#include "fasttcm/serialize.hpp"
#include "fasttcm/synthgen.hpp"
#include "fasttcm/tensor.hpp"
#include "fasttcm/trainer.hpp"
#include "fasttcm/visualize.hpp"
