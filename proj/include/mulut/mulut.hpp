// SPDX-FileCopyrightText: © 2026 The mulut Authors
//
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "mulut/cost.hpp"
#include "mulut/engine.hpp"
#include "mulut/error.hpp"
#include "mulut/finetune.hpp"
#include "mulut/image.hpp"
#include "mulut/interp.hpp"
#include "mulut/lut.hpp"
#include "mulut/metrics.hpp"
#include "mulut/pipeline.hpp"
#include "mulut/transfer.hpp"
