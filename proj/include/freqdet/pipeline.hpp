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

// End-to-end paths from JPEG bytes: the partial decode that stops at the DCT
// tensor, and the full decode to RGB samples.

#ifndef FREQDET_PIPELINE_HPP_
#define FREQDET_PIPELINE_HPP_

#include <cstdint>
#include <optional>
#include <span>

#include "freqdet/dct_core.hpp"
#include "freqdet/jpeg_bitstream.hpp"
#include "freqdet/tensor_assembly.hpp"

namespace freqdet {

struct ExtractOptions {
  ResampleMode resample = ResampleMode::kReplicate;
  std::optional<NormStats> normalization;
};

// parse -> entropy decode -> dequantize -> chroma to 4:4:4 -> assemble.
inline DctTensor extract_dct_tensor(std::span<const std::uint8_t> bytes,
                                    const ExtractOptions& opts = {}) {
  const DecodedJpeg d = decode_coefficients(bytes);
  DctTensor t = assemble_dct_tensor<float>(
      to_444_planes(dequantize_planes(d.structure, d.grids), opts.resample));
  if (opts.normalization) t = normalize(t, *opts.normalization);
  return t;
}

inline Image8 full_decode(std::span<const std::uint8_t> bytes,
                          ResampleMode mode = ResampleMode::kReplicate) {
  const DecodedJpeg d = decode_coefficients(bytes);
  return full_decode_reference(d.structure, d.grids, mode);
}

}  // namespace freqdet

#endif  // FREQDET_PIPELINE_HPP_
