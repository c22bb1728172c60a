// Copyright 2026 The freqdet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FREQDET_FREQDET_HPP_
#define FREQDET_FREQDET_HPP_

#include "freqdet/block.hpp"
#include "freqdet/box.hpp"
#include "freqdet/dct_core.hpp"
#include "freqdet/error.hpp"
#include "freqdet/freq_frontend.hpp"
#include "freqdet/jpeg_bitstream.hpp"
#include "freqdet/perf_bench.hpp"
#include "freqdet/pipeline.hpp"
#include "freqdet/tensor_assembly.hpp"
#include "freqdet/voc_eval.hpp"
#include "freqdet/weights_io.hpp"

#endif  // FREQDET_FREQDET_HPP_
