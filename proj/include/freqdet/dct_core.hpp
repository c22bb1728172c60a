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

// Blockwise 8x8 DCT, dequantization, chroma resampling and the reference
// full-decode path (coefficients -> RGB).
//
// Normalization is the orthonormal one used by every baseline JPEG codec:
//   S_uv = 1/4 C_u C_v sum_x sum_y s_yx cos((2x+1)u pi/16) cos((2y+1)v pi/16)
// with C_0 = 1/sqrt(2) and C_k = 1 otherwise. Samples are level shifted by
// -128 before the forward transform, so coefficients decoded from a file live
// in the level-shifted domain.

#ifndef FREQDET_DCT_CORE_HPP_
#define FREQDET_DCT_CORE_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "freqdet/block.hpp"
#include "freqdet/error.hpp"
#include "freqdet/jpeg_bitstream.hpp"

namespace freqdet {

namespace detail {

// kDctMatrix[k][n] = C_k / 2 * cos((2n + 1) k pi / 16); rows orthonormal.
inline const std::array<std::array<double, 8>, 8>& DctMatrix() {
  static const auto m = [] {
    std::array<std::array<double, 8>, 8> a{};
    for (int k = 0; k < 8; ++k) {
      const double ck = k == 0 ? 1.0 / std::numbers::sqrt2 : 1.0;
      for (int n = 0; n < 8; ++n) {
        a[k][n] = 0.5 * ck * std::cos((2 * n + 1) * k * std::numbers::pi / 16);
      }
    }
    return a;
  }();
  return m;
}

}  // namespace detail

// Separable row/column evaluation of the 2-D forward DCT.
inline DctBlock fdct_block(const PixelBlock& p) {
  const auto& a = detail::DctMatrix();
  std::array<double, kBlockSize> rows{};  // rows[y][u]
  for (std::size_t y = 0; y < 8; ++y) {
    for (std::size_t u = 0; u < 8; ++u) {
      double acc = 0;
      for (std::size_t x = 0; x < 8; ++x) acc += a[u][x] * p.at(y, x);
      rows[y * 8 + u] = acc;
    }
  }
  DctBlock out;
  for (std::size_t v = 0; v < 8; ++v) {
    for (std::size_t u = 0; u < 8; ++u) {
      double acc = 0;
      for (std::size_t y = 0; y < 8; ++y) acc += a[v][y] * rows[y * 8 + u];
      out.at(v, u) = acc;
    }
  }
  return out;
}

inline PixelBlock idct_block(const DctBlock& d) {
  const auto& a = detail::DctMatrix();
  std::array<double, kBlockSize> cols{};  // cols[y][u]
  for (std::size_t y = 0; y < 8; ++y) {
    for (std::size_t u = 0; u < 8; ++u) {
      double acc = 0;
      for (std::size_t v = 0; v < 8; ++v) acc += a[v][y] * d.at(v, u);
      cols[y * 8 + u] = acc;
    }
  }
  PixelBlock out;
  for (std::size_t y = 0; y < 8; ++y) {
    for (std::size_t x = 0; x < 8; ++x) {
      double acc = 0;
      for (std::size_t u = 0; u < 8; ++u) acc += a[u][x] * cols[y * 8 + u];
      out.at(y, x) = acc;
    }
  }
  return out;
}

using NaturalQuantTable = std::array<std::uint16_t, kBlockSize>;

inline DctBlock dequantize(const QuantizedBlock& q, const NaturalQuantTable& t) {
  DctBlock out;
  for (std::size_t i = 0; i < kBlockSize; ++i) {
    out[i] = static_cast<double>(q[i]) * static_cast<double>(t[i]);
  }
  return out;
}

inline DctBlock dequantize(const QuantizedBlock& q, const QuantTable& t) {
  return dequantize(q, t.natural());
}

// ---------------------------------------------------------------------------
// Component planes.

enum class ComponentRole { kY, kCb, kCr };

inline const char* RoleName(ComponentRole r) {
  switch (r) {
    case ComponentRole::kY: return "Y";
    case ComponentRole::kCb: return "Cb";
    case ComponentRole::kCr: return "Cr";
  }
  return "?";
}

// Full-resolution samples per component sample along each axis; (1, 1) is
// 4:4:4, (2, 2) is 4:2:0 chroma.
struct Subsampling {
  std::uint8_t x = 1;
  std::uint8_t y = 1;
  friend bool operator==(const Subsampling&, const Subsampling&) = default;
};

template <typename Block>
struct ComponentPlane {
  ComponentRole role = ComponentRole::kY;
  Subsampling subsampling;
  std::size_t width = 0;   // component samples before block padding
  std::size_t height = 0;
  std::size_t image_width = 0;  // frame size
  std::size_t image_height = 0;
  BlockGrid<Block> grid;
};

enum class ResampleMode { kReplicate, kBilinear };

inline std::vector<ComponentPlane<DctBlock>> dequantize_planes(
    const JpegStructure& structure, const QuantizedGrids& grids) {
  const auto& frame = structure.frame;
  std::vector<ComponentPlane<DctBlock>> planes;
  const std::size_t n = frame.components.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& fc = frame.components[i];
    auto git = grids.find(fc.id);
    if (git == grids.end()) {
      throw Error(ErrorKind::kShapeMismatch,
                  "no coefficients for component " + std::to_string(fc.id));
    }
    const auto geometry = component_geometry(frame, i);
    const auto& src = git->second;
    if (src.rows() != geometry.block_rows || src.cols() != geometry.block_cols) {
      throw Error(ErrorKind::kShapeMismatch,
                  "coefficient grid does not match frame geometry");
    }
    const NaturalQuantTable table = structure.quant_table_for(i).natural();
    ComponentPlane<DctBlock> p;
    p.role = n == 1 ? ComponentRole::kY : static_cast<ComponentRole>(i);
    p.subsampling = {static_cast<std::uint8_t>(frame.max_h() / fc.h_sampling),
                     static_cast<std::uint8_t>(frame.max_v() / fc.v_sampling)};
    p.width = geometry.width;
    p.height = geometry.height;
    p.image_width = frame.width;
    p.image_height = frame.height;
    p.grid = BlockGrid<DctBlock>(src.rows(), src.cols());
    for (std::size_t r = 0; r < src.rows(); ++r) {
      for (std::size_t c = 0; c < src.cols(); ++c) {
        p.grid.at(r, c) = dequantize(src.at(r, c), table);
      }
    }
    planes.push_back(std::move(p));
  }
  return planes;
}

// Real-valued samples covering a whole block grid (padded size).
struct SpatialPlane {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;

  double& at(std::size_t y, std::size_t x) { return values[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

inline SpatialPlane idct_plane(const BlockGrid<DctBlock>& grid) {
  SpatialPlane s{grid.cols() * 8, grid.rows() * 8, {}};
  s.values.resize(s.width * s.height);
  for (std::size_t br = 0; br < grid.rows(); ++br) {
    for (std::size_t bc = 0; bc < grid.cols(); ++bc) {
      const PixelBlock px = idct_block(grid.at(br, bc));
      for (std::size_t y = 0; y < 8; ++y) {
        for (std::size_t x = 0; x < 8; ++x) {
          s.at(br * 8 + y, bc * 8 + x) = px.at(y, x);
        }
      }
    }
  }
  return s;
}

inline BlockGrid<DctBlock> fdct_plane(const SpatialPlane& s) {
  BlockGrid<DctBlock> grid(s.height / 8, s.width / 8);
  for (std::size_t br = 0; br < grid.rows(); ++br) {
    for (std::size_t bc = 0; bc < grid.cols(); ++bc) {
      PixelBlock px;
      for (std::size_t y = 0; y < 8; ++y) {
        for (std::size_t x = 0; x < 8; ++x) {
          px.at(y, x) = s.at(br * 8 + y, bc * 8 + x);
        }
      }
      grid.at(br, bc) = fdct_block(px);
    }
  }
  return grid;
}

namespace detail {

inline void CheckSubsampling(Subsampling s) {
  if (s.x < 1 || s.x > 2 || s.y < 1 || s.y > 2) {
    throw Error(ErrorKind::kInvalidArgument,
                "unsupported subsampling " + std::to_string(s.x) + "x" +
                    std::to_string(s.y));
  }
}

// Source coordinate for a bilinear tap, sample centres aligned.
inline void BilinearTap(std::size_t out, unsigned factor, std::size_t src_size,
                        std::size_t& i0, std::size_t& i1, double& w1) {
  double f = (static_cast<double>(out) + 0.5) / factor - 0.5;
  const double max_index = static_cast<double>(src_size - 1);
  f = std::clamp(f, 0.0, max_index);
  i0 = static_cast<std::size_t>(std::floor(f));
  i1 = std::min(i0 + 1, src_size - 1);
  w1 = f - static_cast<double>(i0);
}

}  // namespace detail

// Resamples `src` (component resolution) to a plane of out_width x
// out_height by the given integer factors.
inline SpatialPlane upsample_spatial(const SpatialPlane& src, Subsampling s,
                                     std::size_t out_width,
                                     std::size_t out_height,
                                     ResampleMode mode) {
  detail::CheckSubsampling(s);
  SpatialPlane out{out_width, out_height, {}};
  out.values.resize(out_width * out_height);
  if (mode == ResampleMode::kReplicate) {
    for (std::size_t y = 0; y < out_height; ++y) {
      const std::size_t sy = std::min(y / s.y, src.height - 1);
      for (std::size_t x = 0; x < out_width; ++x) {
        const std::size_t sx = std::min(x / s.x, src.width - 1);
        out.at(y, x) = src.at(sy, sx);
      }
    }
    return out;
  }
  for (std::size_t y = 0; y < out_height; ++y) {
    std::size_t y0, y1;
    double wy;
    detail::BilinearTap(y, s.y, src.height, y0, y1, wy);
    for (std::size_t x = 0; x < out_width; ++x) {
      std::size_t x0, x1;
      double wx;
      detail::BilinearTap(x, s.x, src.width, x0, x1, wx);
      const double top = (1 - wx) * src.at(y0, x0) + wx * src.at(y0, x1);
      const double bottom = (1 - wx) * src.at(y1, x0) + wx * src.at(y1, x1);
      out.at(y, x) = (1 - wy) * top + wy * bottom;
    }
  }
  return out;
}

namespace detail {

using Matrix8 = std::array<std::array<double, 8>, 8>;

// 1-D replicate upsampling by `factor` restricted to output block `phase`,
// as a map between coefficient vectors: D * R * D^T.
inline Matrix8 ReplicateOperator(std::size_t factor, std::size_t phase) {
  const auto& a = DctMatrix();
  Matrix8 m{};
  for (std::size_t k = 0; k < 8; ++k) {
    for (std::size_t j = 0; j < 8; ++j) {
      double acc = 0;
      for (std::size_t n = 0; n < 8; ++n) {
        acc += a[k][n] * a[j][(8 * phase + n) / factor];
      }
      m[k][j] = acc;
    }
  }
  return m;
}

inline const Matrix8& ReplicateOperatorCached(std::size_t factor, std::size_t phase) {
  static const auto table = [] {
    std::array<std::array<Matrix8, 4>, 5> t{};
    for (std::size_t f = 1; f <= 4; ++f) {
      for (std::size_t ph = 0; ph < f; ++ph) t[f][ph] = ReplicateOperator(f, ph);
    }
    return t;
  }();
  return table[factor][phase];
}

// out = Ay * in * Ax^T over (v, u).
inline DctBlock ApplySeparable(const DctBlock& in, const Matrix8& ay, const Matrix8& ax) {
  std::array<double, kBlockSize> tmp{};  // tmp[v][u']
  for (std::size_t v = 0; v < 8; ++v) {
    for (std::size_t uo = 0; uo < 8; ++uo) {
      double acc = 0;
      for (std::size_t u = 0; u < 8; ++u) acc += ax[uo][u] * in.at(v, u);
      tmp[v * 8 + uo] = acc;
    }
  }
  DctBlock out;
  for (std::size_t vo = 0; vo < 8; ++vo) {
    for (std::size_t uo = 0; uo < 8; ++uo) {
      double acc = 0;
      for (std::size_t v = 0; v < 8; ++v) acc += ay[vo][v] * tmp[v * 8 + uo];
      out.at(vo, uo) = acc;
    }
  }
  return out;
}

}  // namespace detail

// IDCT -> spatial resample -> FDCT. A (1, 1) plane is returned unchanged.
// Replication is applied as the equivalent per-block coefficient operator.
inline ComponentPlane<DctBlock> upsample_chroma_to_444(
    const ComponentPlane<DctBlock>& plane,
    ResampleMode mode = ResampleMode::kReplicate) {
  detail::CheckSubsampling(plane.subsampling);
  if (plane.subsampling == Subsampling{1, 1}) return plane;
  const std::size_t rows = CeilDiv(plane.image_height, kBlockSide);
  const std::size_t cols = CeilDiv(plane.image_width, kBlockSide);
  const std::size_t sx = plane.subsampling.x, sy = plane.subsampling.y;
  ComponentPlane<DctBlock> out;
  out.role = plane.role;
  out.subsampling = {1, 1};
  out.width = plane.image_width;
  out.height = plane.image_height;
  out.image_width = plane.image_width;
  out.image_height = plane.image_height;
  const bool covered = sx <= 4 && sy <= 4 && CeilDiv(rows, sy) <= plane.grid.rows() &&
                       CeilDiv(cols, sx) <= plane.grid.cols();
  if (mode == ResampleMode::kReplicate && covered) {
    out.grid = BlockGrid<DctBlock>(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto& ay = detail::ReplicateOperatorCached(sy, r % sy);
      for (std::size_t c = 0; c < cols; ++c) {
        out.grid.at(r, c) = detail::ApplySeparable(
            plane.grid.at(r / sy, c / sx), ay, detail::ReplicateOperatorCached(sx, c % sx));
      }
    }
    return out;
  }
  const SpatialPlane src = idct_plane(plane.grid);
  out.grid = fdct_plane(upsample_spatial(src, plane.subsampling, cols * 8, rows * 8, mode));
  return out;
}

// ---------------------------------------------------------------------------
// Reference full decode.

// 8-bit samples of one component (or an RGB image when channels == 3).
struct Image8 {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  std::vector<std::uint8_t> data;

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c = 0) {
    return data[(y * width + x) * channels + c];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c = 0) const {
    return data[(y * width + x) * channels + c];
  }
};

inline std::uint8_t ClampToByte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

// Reconstructed component samples round half to even, the convention of
// the common SIMD decoders; the final RGB output rounds half up. Values
// within 1e-9 of a half are exact ties carrying transform roundoff.
inline double RoundSample(double v) {
  const double f = std::floor(v);
  if (std::abs(v - f - 0.5) < 1e-9) v = f + 0.5;
  return std::clamp(std::nearbyint(v), 0.0, 255.0);
}

// Level-unshifted, rounded and clamped samples covering the padded grid.
inline Image8 reconstruct_samples(const BlockGrid<DctBlock>& grid) {
  Image8 img{grid.cols() * 8, grid.rows() * 8, 1, {}};
  img.data.resize(img.width * img.height);
  for (std::size_t br = 0; br < grid.rows(); ++br) {
    for (std::size_t bc = 0; bc < grid.cols(); ++bc) {
      const PixelBlock px = idct_block(grid.at(br, bc));
      for (std::size_t y = 0; y < 8; ++y) {
        for (std::size_t x = 0; x < 8; ++x) {
          img.at(br * 8 + y, bc * 8 + x) =
              static_cast<std::uint8_t>(RoundSample(px.at(y, x) + 128.0));
        }
      }
    }
  }
  return img;
}

// BT.601 full-range YCbCr -> RGB.
inline void YCbCrToRgb(double y, double cb, double cr, std::uint8_t* rgb) {
  rgb[0] = ClampToByte(y + 1.402 * (cr - 128.0));
  rgb[1] = ClampToByte(y - 0.344136 * (cb - 128.0) - 0.714136 * (cr - 128.0));
  rgb[2] = ClampToByte(y + 1.772 * (cb - 128.0));
}

inline Image8 color_convert(const std::vector<SpatialPlane>& full_res,
                            std::size_t width, std::size_t height) {
  Image8 rgb{width, height, 3, {}};
  rgb.data.resize(width * height * 3);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      std::uint8_t* out = &rgb.at(y, x, 0);
      if (full_res.size() == 1) {
        out[0] = out[1] = out[2] = ClampToByte(full_res[0].at(y, x));
      } else {
        YCbCrToRgb(full_res[0].at(y, x), full_res[1].at(y, x),
                   full_res[2].at(y, x), out);
      }
    }
  }
  return rgb;
}

// dequantize -> IDCT -> +128 -> clamp -> upsample -> YCbCr to RGB.
inline Image8 full_decode_planes(
    const std::vector<ComponentPlane<DctBlock>>& planes,
    ResampleMode mode = ResampleMode::kReplicate) {
  if (planes.empty() || (planes.size() != 1 && planes.size() != 3)) {
    throw Error(ErrorKind::kShapeMismatch, "expected 1 or 3 component planes");
  }
  const std::size_t width = planes[0].image_width;
  const std::size_t height = planes[0].image_height;
  std::vector<SpatialPlane> full;
  for (const auto& p : planes) {
    detail::CheckSubsampling(p.subsampling);
    SpatialPlane samples = idct_plane(p.grid);
    for (double& v : samples.values) v = RoundSample(v + 128.0);
    if (p.subsampling == Subsampling{1, 1}) {
      full.push_back(std::move(samples));
    } else {
      full.push_back(upsample_spatial(samples, p.subsampling, width, height, mode));
    }
  }
  return color_convert(full, width, height);
}

inline Image8 full_decode_reference(
    const JpegStructure& structure, const QuantizedGrids& grids,
    ResampleMode mode = ResampleMode::kReplicate) {
  return full_decode_planes(dequantize_planes(structure, grids), mode);
}

}  // namespace freqdet

#endif  // FREQDET_DCT_CORE_HPP_
