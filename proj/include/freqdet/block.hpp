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

// 8x8 block value types shared by the bitstream reader and the transform
// code, plus the zigzag scan table.

#ifndef FREQDET_BLOCK_HPP_
#define FREQDET_BLOCK_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "freqdet/error.hpp"

namespace freqdet {

inline constexpr std::size_t kBlockSide = 8;
inline constexpr std::size_t kBlockSize = 64;

// Fixed-size coefficient or sample block in natural (row-major) order.
// The tag keeps quantized, transform-domain and spatial blocks apart.
template <typename T, typename Tag>
struct Block64 {
  using value_type = T;
  std::array<T, kBlockSize> values{};

  constexpr T& operator[](std::size_t i) { return values[i]; }
  constexpr const T& operator[](std::size_t i) const { return values[i]; }
  // (row, col): row is the vertical index (y or v), col the horizontal one.
  constexpr T& at(std::size_t row, std::size_t col) {
    return values[row * kBlockSide + col];
  }
  constexpr const T& at(std::size_t row, std::size_t col) const {
    return values[row * kBlockSide + col];
  }
  T* data() { return values.data(); }
  const T* data() const { return values.data(); }

  friend bool operator==(const Block64&, const Block64&) = default;
};

struct QuantizedTag {};
struct DctTag {};
struct PixelTag {};

// Entropy-decoded coefficients, DC absolute.
using QuantizedBlock = Block64<std::int16_t, QuantizedTag>;
// S_uv: row v (vertical frequency), column u (horizontal frequency).
using DctBlock = Block64<double, DctTag>;
// s_yx: row y, column x.
using PixelBlock = Block64<double, PixelTag>;

template <typename Block>
class BlockGrid {
 public:
  BlockGrid() = default;
  BlockGrid(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), blocks_(rows * cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return blocks_.size(); }
  bool empty() const { return blocks_.empty(); }

  Block& at(std::size_t row, std::size_t col) {
    return blocks_[row * cols_ + col];
  }
  const Block& at(std::size_t row, std::size_t col) const {
    return blocks_[row * cols_ + col];
  }

  auto begin() { return blocks_.begin(); }
  auto end() { return blocks_.end(); }
  auto begin() const { return blocks_.begin(); }
  auto end() const { return blocks_.end(); }

  friend bool operator==(const BlockGrid&, const BlockGrid&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Block> blocks_;
};

// Zigzag position -> natural index (v * 8 + u).
inline constexpr std::array<std::uint8_t, kBlockSize> kZigzagToNatural = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,
    12, 19, 26, 33, 40, 48, 41, 34, 27, 20, 13, 6,  7,  14, 21, 28,
    35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23, 30, 37, 44, 51,
    58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63};

inline constexpr std::array<std::uint8_t, kBlockSize> kNaturalToZigzag = [] {
  std::array<std::uint8_t, kBlockSize> inverse{};
  for (std::size_t k = 0; k < kBlockSize; ++k) {
    inverse[kZigzagToNatural[k]] = static_cast<std::uint8_t>(k);
  }
  return inverse;
}();

// Frequency coordinates of a coefficient: u horizontal, v vertical.
struct FrequencyIndex {
  std::size_t u = 0;
  std::size_t v = 0;
  friend bool operator==(const FrequencyIndex&, const FrequencyIndex&) = default;
};

inline FrequencyIndex zigzag_map(std::size_t zigzag_index) {
  if (zigzag_index >= kBlockSize) {
    throw Error(ErrorKind::kInvalidArgument,
                "zigzag index " + std::to_string(zigzag_index) +
                    " outside [0, 63]");
  }
  const std::size_t natural = kZigzagToNatural[zigzag_index];
  return {natural % kBlockSide, natural / kBlockSide};
}

inline std::size_t zigzag_index_of(FrequencyIndex f) {
  if (f.u >= kBlockSide || f.v >= kBlockSide) {
    throw Error(ErrorKind::kInvalidArgument, "frequency index outside 8x8");
  }
  return kNaturalToZigzag[f.v * kBlockSide + f.u];
}

}  // namespace freqdet

#endif  // FREQDET_BLOCK_HPP_
