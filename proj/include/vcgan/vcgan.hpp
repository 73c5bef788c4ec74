#pragma once

#include "vcgan/ablation.hpp"
#include "vcgan/checkpoint.hpp"
#include "vcgan/core_data.hpp"
#include "vcgan/discriminator.hpp"
#include "vcgan/errors.hpp"
#include "vcgan/flo_io.hpp"
#include "vcgan/flow_warp.hpp"
#include "vcgan/generator.hpp"
#include "vcgan/image_io.hpp"
#include "vcgan/layers.hpp"
#include "vcgan/losses.hpp"
#include "vcgan/metrics.hpp"
#include "vcgan/synthdata.hpp"
#include "vcgan/train_config.hpp"
#include "vcgan/training.hpp"
