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

// Detection input assembly: the coefficient-plane layout (h, w, 3) where each
// 8x8 tile holds one block's coefficients at its spatial footprint, and the
// flattened (h/8, w/8, 192) tensor. Channel c = component * 64 + v * 8 + u
// with components ordered Y, Cb, Cr.

#ifndef FREQDET_TENSOR_ASSEMBLY_HPP_
#define FREQDET_TENSOR_ASSEMBLY_HPP_

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "freqdet/block.hpp"
#include "freqdet/dct_core.hpp"
#include "freqdet/error.hpp"

namespace freqdet {

// Row-major (row, col, channel) array.
template <typename T>
class Tensor3 {
 public:
  using value_type = T;

  Tensor3() = default;
  Tensor3(std::size_t rows, std::size_t cols, std::size_t channels,
          T fill = T{})
      : rows_(rows),
        cols_(cols),
        channels_(channels),
        data_(rows * cols * channels, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }

  T& at(std::size_t r, std::size_t c, std::size_t ch) {
    return data_[(r * cols_ + c) * channels_ + ch];
  }
  const T& at(std::size_t r, std::size_t c, std::size_t ch) const {
    return data_[(r * cols_ + c) * channels_ + ch];
  }
  // Channel vector of one cell.
  T* cell(std::size_t r, std::size_t c) {
    return data_.data() + (r * cols_ + c) * channels_;
  }
  const T* cell(std::size_t r, std::size_t c) const {
    return data_.data() + (r * cols_ + c) * channels_;
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool same_shape(const Tensor3& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && channels_ == o.channels_;
  }

  template <typename U>
  Tensor3<U> cast() const {
    Tensor3<U> out(rows_, cols_, channels_);
    std::transform(data_.begin(), data_.end(), out.data(),
                   [](T v) { return static_cast<U>(v); });
    return out;
  }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t channels_ = 0;
  std::vector<T> data_;
};

using DctTensor = Tensor3<float>;
// (h_pad, w_pad, components) planes. Same storage type as a feature map.
template <typename T>
using CoefficientPlanes = Tensor3<T>;

inline constexpr std::size_t kDctChannels = 3 * kBlockSize;

inline constexpr std::size_t TensorChannel(std::size_t component,
                                           std::size_t u, std::size_t v) {
  return component * kBlockSize + v * kBlockSide + u;
}

// Brings every plane to 4:4:4. A single luma plane gets two zero chroma
// planes, which is neutral chroma (128) in the level-shifted domain.
inline std::vector<ComponentPlane<DctBlock>> to_444_planes(
    std::vector<ComponentPlane<DctBlock>> planes,
    ResampleMode mode = ResampleMode::kReplicate) {
  if (planes.size() != 1 && planes.size() != 3) {
    throw Error(ErrorKind::kShapeMismatch, "expected 1 or 3 component planes");
  }
  std::vector<ComponentPlane<DctBlock>> out;
  for (auto& p : planes) {
    if (p.subsampling == Subsampling{1, 1}) {
      out.push_back(std::move(p));
    } else {
      out.push_back(upsample_chroma_to_444(p, mode));
    }
  }
  if (out.size() == 1) {
    for (auto role : {ComponentRole::kCb, ComponentRole::kCr}) {
      ComponentPlane<DctBlock> zero = out[0];
      zero.role = role;
      for (auto& b : zero.grid) b.values.fill(0.0);
      out.push_back(std::move(zero));
    }
  }
  return out;
}

namespace detail {

inline void CheckAssemblyInput(
    const std::vector<ComponentPlane<DctBlock>>& planes) {
  if (planes.size() != 3) {
    throw Error(ErrorKind::kShapeMismatch,
                "tensor assembly needs 3 planes, got " +
                    std::to_string(planes.size()));
  }
  for (const auto& p : planes) {
    if (p.subsampling != Subsampling{1, 1}) {
      throw Error(ErrorKind::kShapeMismatch,
                  std::string("plane ") + RoleName(p.role) +
                      " is subsampled; upsample to 4:4:4 first");
    }
    if (p.grid.rows() != planes[0].grid.rows() ||
        p.grid.cols() != planes[0].grid.cols()) {
      throw Error(ErrorKind::kShapeMismatch, "plane block grids differ");
    }
  }
}

}  // namespace detail

template <typename T = float>
Tensor3<T> assemble_dct_tensor(
    const std::vector<ComponentPlane<DctBlock>>& planes) {
  detail::CheckAssemblyInput(planes);
  const std::size_t rows = planes[0].grid.rows();
  const std::size_t cols = planes[0].grid.cols();
  Tensor3<T> t(rows, cols, kDctChannels);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const DctBlock& b = planes[k].grid.at(r, c);
        T* dst = t.cell(r, c) + k * kBlockSize;
        for (std::size_t i = 0; i < kBlockSize; ++i) {
          dst[i] = static_cast<T>(b[i]);
        }
      }
    }
  }
  return t;
}

// Tile layout: plane position (8i + v, 8j + u) of component k holds S_uv of
// block (i, j).
template <typename T = float>
CoefficientPlanes<T> coefficient_planes(
    const std::vector<ComponentPlane<DctBlock>>& planes) {
  detail::CheckAssemblyInput(planes);
  const std::size_t rows = planes[0].grid.rows();
  const std::size_t cols = planes[0].grid.cols();
  CoefficientPlanes<T> out(rows * 8, cols * 8, 3);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const DctBlock& b = planes[k].grid.at(r, c);
        for (std::size_t v = 0; v < 8; ++v) {
          for (std::size_t u = 0; u < 8; ++u) {
            out.at(r * 8 + v, c * 8 + u, k) = static_cast<T>(b.at(v, u));
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor3<T> flatten_blocks(const CoefficientPlanes<T>& p) {
  if (p.rows() % 8 != 0 || p.cols() % 8 != 0) {
    throw Error(ErrorKind::kShapeMismatch,
                "coefficient planes must be a multiple of 8 in both axes");
  }
  const std::size_t comps = p.channels();
  Tensor3<T> t(p.rows() / 8, p.cols() / 8, comps * kBlockSize);
  for (std::size_t y = 0; y < p.rows(); ++y) {
    for (std::size_t x = 0; x < p.cols(); ++x) {
      for (std::size_t k = 0; k < comps; ++k) {
        t.at(y / 8, x / 8, k * kBlockSize + (y % 8) * 8 + (x % 8)) =
            p.at(y, x, k);
      }
    }
  }
  return t;
}

template <typename T>
CoefficientPlanes<T> unflatten_blocks(const Tensor3<T>& t) {
  if (t.channels() % kBlockSize != 0) {
    throw Error(ErrorKind::kShapeMismatch,
                "channel count is not a multiple of 64");
  }
  const std::size_t comps = t.channels() / kBlockSize;
  CoefficientPlanes<T> p(t.rows() * 8, t.cols() * 8, comps);
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) {
      for (std::size_t k = 0; k < comps; ++k) {
        for (std::size_t i = 0; i < kBlockSize; ++i) {
          p.at(r * 8 + i / 8, c * 8 + i % 8, k) = t.at(r, c, k * kBlockSize + i);
        }
      }
    }
  }
  return p;
}

// ---------------------------------------------------------------------------
// Normalization statistics.

inline constexpr double kStdFloor = 1e-6;

struct NormStats {
  std::vector<double> mean;
  std::vector<double> std;
  std::uint64_t count = 0;  // samples per channel

  std::size_t channels() const { return mean.size(); }
};

// Per-channel Welford accumulator; partial accumulators merge exactly in any
// fixed order.
class StatsAccumulator {
 public:
  explicit StatsAccumulator(std::size_t channels)
      : mean_(channels, 0.0), m2_(channels, 0.0) {}

  template <typename T>
  void add(const Tensor3<T>& t) {
    if (t.channels() != mean_.size()) {
      throw Error(ErrorKind::kShapeMismatch, "channel count mismatch");
    }
    const std::size_t ch = mean_.size();
    for (std::size_t cell = 0; cell < t.rows() * t.cols(); ++cell) {
      ++count_;
      const double inv = 1.0 / static_cast<double>(count_);
      const T* v = t.data() + cell * ch;
      for (std::size_t c = 0; c < ch; ++c) {
        const double x = static_cast<double>(v[c]);
        const double delta = x - mean_[c];
        mean_[c] += delta * inv;
        m2_[c] += delta * (x - mean_[c]);
      }
    }
  }

  void merge(const StatsAccumulator& o) {
    if (o.mean_.size() != mean_.size()) {
      throw Error(ErrorKind::kShapeMismatch, "channel count mismatch");
    }
    if (o.count_ == 0) return;
    if (count_ == 0) {
      *this = o;
      return;
    }
    const double na = static_cast<double>(count_);
    const double nb = static_cast<double>(o.count_);
    const double n = na + nb;
    for (std::size_t c = 0; c < mean_.size(); ++c) {
      const double delta = o.mean_[c] - mean_[c];
      mean_[c] += delta * nb / n;
      m2_[c] += o.m2_[c] + delta * delta * na * nb / n;
    }
    count_ += o.count_;
  }

  std::uint64_t count() const { return count_; }

  NormStats finish(double floor = kStdFloor) const {
    if (count_ == 0) {
      throw Error(ErrorKind::kEmptyCorpus, "no samples accumulated");
    }
    NormStats s;
    s.mean = mean_;
    s.std.resize(mean_.size());
    s.count = count_;
    for (std::size_t c = 0; c < mean_.size(); ++c) {
      s.std[c] = std::max(std::sqrt(m2_[c] / static_cast<double>(count_)),
                          floor);
    }
    return s;
  }

 private:
  std::vector<double> mean_;
  std::vector<double> m2_;
  std::uint64_t count_ = 0;
};

// Population mean / standard deviation per channel over every cell of every
// tensor.
template <typename T>
NormStats compute_stats(std::span<const Tensor3<T>> corpus) {
  if (corpus.empty()) {
    throw Error(ErrorKind::kEmptyCorpus, "cannot compute stats of no tensors");
  }
  StatsAccumulator acc(corpus.front().channels());
  for (const auto& t : corpus) acc.add(t);
  return acc.finish();
}

template <typename T>
NormStats compute_stats(const std::vector<Tensor3<T>>& corpus) {
  return compute_stats(std::span<const Tensor3<T>>(corpus));
}

template <typename T>
Tensor3<T> normalize(const Tensor3<T>& t, const NormStats& s) {
  if (t.channels() != s.channels() || s.std.size() != s.channels()) {
    throw Error(ErrorKind::kShapeMismatch,
                "stats have " + std::to_string(s.channels()) +
                    " channels, tensor has " + std::to_string(t.channels()));
  }
  Tensor3<T> out(t.rows(), t.cols(), t.channels());
  const std::size_t ch = t.channels();
  for (std::size_t cell = 0; cell < t.rows() * t.cols(); ++cell) {
    const T* src = t.data() + cell * ch;
    T* dst = out.data() + cell * ch;
    for (std::size_t c = 0; c < ch; ++c) {
      dst[c] = static_cast<T>((static_cast<double>(src[c]) - s.mean[c]) /
                              s.std[c]);
    }
  }
  return out;
}

inline nlohmann::json stats_to_json(const NormStats& s) {
  return {{"channels", s.channels()},
          {"mean", s.mean},
          {"std", s.std},
          {"count", s.count}};
}

inline NormStats stats_from_json(const nlohmann::json& j) {
  try {
    NormStats s;
    const auto channels = j.at("channels").get<std::size_t>();
    s.mean = j.at("mean").get<std::vector<double>>();
    s.std = j.at("std").get<std::vector<double>>();
    s.count = j.at("count").get<std::uint64_t>();
    if (s.mean.size() != channels || s.std.size() != channels) {
      throw Error(ErrorKind::kFormat,
                  "stats file: mean/std length differs from channels");
    }
    for (double v : s.std) {
      if (!(v > 0)) throw Error(ErrorKind::kFormat, "stats file: std <= 0");
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("stats file: ") + e.what());
  }
}

inline void save_stats(const std::string& path, const NormStats& s) {
  std::ofstream f(path);
  if (!f) throw Error(ErrorKind::kIo, "cannot open " + path + " for writing");
  f << stats_to_json(s).dump(2) << "\n";
}

inline NormStats load_stats(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::kIo, "cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, path + ": " + e.what());
  }
  return stats_from_json(j);
}

// ---------------------------------------------------------------------------
// DCTT tensor file: "DCTT", u32 version = 1, u32 rows, u32 cols,
// u32 channels, then float32 values in (row, col, channel) order. All
// integers and floats little-endian.

inline constexpr std::uint32_t kDcttVersion = 1;

namespace detail {

inline void PutU32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t GetU32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{in[at + i]} << (8 * i);
  return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_dctt(const DctTensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(20 + 4 * t.size());
  for (char c : {'D', 'C', 'T', 'T'}) out.push_back(static_cast<std::uint8_t>(c));
  detail::PutU32(out, kDcttVersion);
  detail::PutU32(out, static_cast<std::uint32_t>(t.rows()));
  detail::PutU32(out, static_cast<std::uint32_t>(t.cols()));
  detail::PutU32(out, static_cast<std::uint32_t>(t.channels()));
  for (float v : t.values()) detail::PutU32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

inline DctTensor decode_dctt(std::span<const std::uint8_t> in) {
  if (in.size() < 20 || std::memcmp(in.data(), "DCTT", 4) != 0) {
    throw Error(ErrorKind::kFormat, "not a DCTT file");
  }
  const auto version = detail::GetU32(in, 4);
  if (version != kDcttVersion) {
    throw Error(ErrorKind::kFormat,
                "unsupported DCTT version " + std::to_string(version));
  }
  const std::size_t rows = detail::GetU32(in, 8);
  const std::size_t cols = detail::GetU32(in, 12);
  const std::size_t channels = detail::GetU32(in, 16);
  const std::size_t n = rows * cols * channels;
  if (in.size() != 20 + 4 * n) {
    throw Error(ErrorKind::kFormat, "DCTT payload size does not match header");
  }
  DctTensor t(rows, cols, channels);
  for (std::size_t i = 0; i < n; ++i) {
    t.data()[i] = std::bit_cast<float>(detail::GetU32(in, 20 + 4 * i));
  }
  return t;
}

inline std::vector<std::uint8_t> ReadFileBytes(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIo, "cannot open " + path);
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(f), {});
}

inline void WriteFileBytes(const std::string& path,
                           std::span<const std::uint8_t> bytes) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIo, "cannot open " + path + " for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw Error(ErrorKind::kIo, "write failed: " + path);
}

inline void save_dctt(const std::string& path, const DctTensor& t) {
  WriteFileBytes(path, encode_dctt(t));
}

inline DctTensor load_dctt(const std::string& path) {
  return decode_dctt(ReadFileBytes(path));
}

}  // namespace freqdet

#endif  // FREQDET_TENSOR_ASSEMBLY_HPP_
