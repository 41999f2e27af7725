#pragma once

#include "ffino/core/conv.hpp"
#include "ffino/core/error.hpp"
#include "ffino/core/fft.hpp"
#include "ffino/core/linalg.hpp"
#include "ffino/core/random.hpp"
#include "ffino/core/runtime.hpp"
#include "ffino/core/tensor.hpp"
#include "ffino/datagen/dataset.hpp"
#include "ffino/datagen/fields.hpp"
#include "ffino/datagen/grid.hpp"
#include "ffino/datagen/lhs.hpp"
#include "ffino/datagen/physics.hpp"
#include "ffino/datagen/relperm.hpp"
#include "ffino/eval/evaluate.hpp"
#include "ffino/eval/images.hpp"
#include "ffino/eval/metrics.hpp"
#include "ffino/eval/report.hpp"
#include "ffino/io/container.hpp"
#include "ffino/model/checkpoint.hpp"
#include "ffino/model/config.hpp"
#include "ffino/model/ffino.hpp"
#include "ffino/nn/layers.hpp"
#include "ffino/nn/spectral.hpp"
#include "ffino/train/batch.hpp"
#include "ffino/train/loss.hpp"
#include "ffino/train/optimizer.hpp"
#include "ffino/train/trainer.hpp"
