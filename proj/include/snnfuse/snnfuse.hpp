// Copyright 2026 The snnfuse Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================


#pragma once

// Umbrella header.

#include "snnfuse/affine.hpp"
#include "snnfuse/bench.hpp"
#include "snnfuse/channel.hpp"
#include "snnfuse/config.hpp"
#include "snnfuse/dataset.hpp"
#include "snnfuse/encoding.hpp"
#include "snnfuse/fusion.hpp"
#include "snnfuse/gradcheck.hpp"
#include "snnfuse/loss.hpp"
#include "snnfuse/net.hpp"
#include "snnfuse/neuron.hpp"
#include "snnfuse/pipeline.hpp"
#include "snnfuse/rng.hpp"
#include "snnfuse/speedup_model.hpp"
#include "snnfuse/tensor.hpp"
#include "snnfuse/train.hpp"
#include "snnfuse/verify.hpp"
