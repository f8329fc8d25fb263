// Copyright 2026 The mbnet Authors. All Rights Reserved.
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

#pragma once

#include "mbnet/arch.hpp"
#include "mbnet/arch_text.hpp"
#include "mbnet/bench.hpp"
#include "mbnet/binary_io.hpp"
#include "mbnet/cost.hpp"
#include "mbnet/error.hpp"
#include "mbnet/fast_conv.hpp"
#include "mbnet/gemm.hpp"
#include "mbnet/model.hpp"
#include "mbnet/ops.hpp"
#include "mbnet/ops_backward.hpp"
#include "mbnet/ppm.hpp"
#include "mbnet/tensor.hpp"
#include "mbnet/train.hpp"
#include "mbnet/weights.hpp"
