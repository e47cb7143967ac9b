#pragma once

#include "costgcn/bench.hpp"
#include "costgcn/blocks.hpp"
#include "costgcn/clip_io.hpp"
#include "costgcn/config.hpp"
#include "costgcn/continual.hpp"
#include "costgcn/flops.hpp"
#include "costgcn/graph.hpp"
#include "costgcn/modality.hpp"
#include "costgcn/network.hpp"
#include "costgcn/numerics.hpp"
#include "costgcn/random_init.hpp"
#include "costgcn/tensor.hpp"
#include "costgcn/verify.hpp"
#include "costgcn/weights.hpp"
