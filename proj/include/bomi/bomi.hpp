// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bomi/config.hpp"
#include "bomi/dataset.hpp"
#include "bomi/dataset_io.hpp"
#include "bomi/error.hpp"
#include "bomi/experiments.hpp"
#include "bomi/features.hpp"
#include "bomi/fusion.hpp"
#include "bomi/lda.hpp"
#include "bomi/linalg.hpp"
#include "bomi/pipeline.hpp"
#include "bomi/processing.hpp"
#include "bomi/ring_buffer.hpp"
#include "bomi/synth.hpp"
#include "bomi/types.hpp"
