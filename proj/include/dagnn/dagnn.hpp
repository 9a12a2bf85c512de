#pragma once

#include "dagnn/ablate.hpp"
#include "dagnn/config.hpp"
#include "dagnn/exact_gpc.hpp"
#include "dagnn/fingerprint.hpp"
#include "dagnn/gp_head.hpp"
#include "dagnn/gradcheck.hpp"
#include "dagnn/graph.hpp"
#include "dagnn/gru.hpp"
#include "dagnn/metrics.hpp"
#include "dagnn/model.hpp"
#include "dagnn/mpnn.hpp"
#include "dagnn/params.hpp"
#include "dagnn/predictive.hpp"
#include "dagnn/rng.hpp"
#include "dagnn/specnorm.hpp"
#include "dagnn/synth.hpp"
#include "dagnn/tape.hpp"
#include "dagnn/tensor.hpp"
#include "dagnn/train.hpp"
