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

// Frequency-domain detection front-end: the 8x8 / stride-8 block
// convolution, the pixel -> frequency weight transform, and a compact
// SSD-style detector (conv stack, multiscale heads, anchors, box decoding,
// NMS).

#ifndef FREQDET_FREQ_FRONTEND_HPP_
#define FREQDET_FREQ_FRONTEND_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "freqdet/block.hpp"
#include "freqdet/box.hpp"
#include "freqdet/dct_core.hpp"
#include "freqdet/error.hpp"
#include "freqdet/tensor_assembly.hpp"

namespace freqdet {

template <typename T>
using FeatureMap = Tensor3<T>;

// Weights laid out [out][in][ky][kx].
template <typename T>
struct Kernel {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::vector<T> weights;
  std::vector<T> bias;

  Kernel() = default;
  Kernel(std::size_t out, std::size_t in, std::size_t kh, std::size_t kw)
      : out_channels(out),
        in_channels(in),
        kernel_h(kh),
        kernel_w(kw),
        weights(out * in * kh * kw, T{}),
        bias(out, T{}) {}

  T& w(std::size_t o, std::size_t c, std::size_t y, std::size_t x) {
    return weights[((o * in_channels + c) * kernel_h + y) * kernel_w + x];
  }
  const T& w(std::size_t o, std::size_t c, std::size_t y,
             std::size_t x) const {
    return weights[((o * in_channels + c) * kernel_h + y) * kernel_w + x];
  }
  std::size_t slice_size() const { return kernel_h * kernel_w; }
};

// ---------------------------------------------------------------------------
// Block convolution.

// output(i, j, o) = bias_o + sum_c <block (i, j) of channel c, slice (o, c)>.
// Direct evaluation; every 8x8 input block feeds exactly one output cell.
template <typename T>
FeatureMap<T> block_conv8(const Tensor3<T>& input, const Kernel<T>& k) {
  if (k.kernel_h != 8 || k.kernel_w != 8) {
    throw Error(ErrorKind::kShapeMismatch, "block_conv8 needs an 8x8 kernel");
  }
  if (input.rows() % 8 != 0 || input.cols() % 8 != 0) {
    throw Error(ErrorKind::kShapeMismatch,
                "block_conv8 input must be a multiple of 8 in both axes");
  }
  if (input.channels() != k.in_channels) {
    throw Error(ErrorKind::kShapeMismatch,
                "kernel expects " + std::to_string(k.in_channels) +
                    " input channels, got " +
                    std::to_string(input.channels()));
  }
  FeatureMap<T> out(input.rows() / 8, input.cols() / 8, k.out_channels);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) {
      for (std::size_t o = 0; o < k.out_channels; ++o) {
        T acc = k.bias[o];
        for (std::size_t c = 0; c < k.in_channels; ++c) {
          for (std::size_t y = 0; y < 8; ++y) {
            for (std::size_t x = 0; x < 8; ++x) {
              acc += input.at(i * 8 + y, j * 8 + x, c) * k.w(o, c, y, x);
            }
          }
        }
        out.at(i, j, o) = acc;
      }
    }
  }
  return out;
}

// The same front-end applied to the flattened (h/8, w/8, 64 * C) layout: a
// 1x1 contraction whose weight for channel c * 64 + y * 8 + x is slice
// (o, c) at (y, x).
template <typename T>
FeatureMap<T> pointwise_block_conv(const Tensor3<T>& tensor,
                                   const Kernel<T>& k) {
  if (k.kernel_h != 8 || k.kernel_w != 8 ||
      tensor.channels() != k.in_channels * kBlockSize) {
    throw Error(ErrorKind::kShapeMismatch,
                "pointwise front-end needs an 8x8 kernel over " +
                    std::to_string(k.in_channels * kBlockSize) + " channels");
  }
  FeatureMap<T> out(tensor.rows(), tensor.cols(), k.out_channels);
  const std::size_t ch = tensor.channels();
  for (std::size_t cell = 0; cell < tensor.rows() * tensor.cols(); ++cell) {
    const T* in = tensor.data() + cell * ch;
    T* dst = out.data() + cell * k.out_channels;
    for (std::size_t o = 0; o < k.out_channels; ++o) {
      // Kernel slices for output o are contiguous and ordered c, y, x,
      // which is exactly the tensor's channel order.
      const T* w = k.weights.data() + o * ch;
      T acc = k.bias[o];
      for (std::size_t i = 0; i < ch; ++i) acc += in[i] * w[i];
      dst[o] = acc;
    }
  }
  return out;
}

// Replaces each (out, in) slice by its orthonormal 2-D DCT. Since the DCT is
// orthonormal, <x, w> = <DCT x, DCT w>, so the transformed kernel applied to
// coefficient planes reproduces the original kernel applied to level-shifted
// pixels.
template <typename T>
Kernel<T> pixel_to_freq_weights(const Kernel<T>& k) {
  if (k.kernel_h != 8 || k.kernel_w != 8) {
    throw Error(ErrorKind::kShapeMismatch,
                "pixel_to_freq_weights needs 8x8 spatial kernels");
  }
  Kernel<T> out = k;
  for (std::size_t o = 0; o < k.out_channels; ++o) {
    for (std::size_t c = 0; c < k.in_channels; ++c) {
      PixelBlock slice;
      for (std::size_t y = 0; y < 8; ++y) {
        for (std::size_t x = 0; x < 8; ++x) {
          slice.at(y, x) = static_cast<double>(k.w(o, c, y, x));
        }
      }
      const DctBlock f = fdct_block(slice);
      for (std::size_t v = 0; v < 8; ++v) {
        for (std::size_t u = 0; u < 8; ++u) {
          out.w(o, c, v, u) = static_cast<T>(f.at(v, u));
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// General convolution (im2col + GEMM).

inline std::size_t ConvOutputSize(std::size_t in, std::size_t kernel,
                                  std::size_t stride, std::size_t padding) {
  if (in + 2 * padding < kernel || stride == 0) {
    throw Error(ErrorKind::kShapeMismatch,
                "convolution kernel larger than padded input");
  }
  return (in + 2 * padding - kernel) / stride + 1;
}

// GEMM-ready weights: row index (ky * kw + kx) * in + c, column o.
template <typename T>
struct PackedKernel {
  std::size_t rows = 0;  // kh * kw * in
  std::size_t cols = 0;  // out
  std::vector<T> values;
};

template <typename T>
PackedKernel<T> PackKernel(const Kernel<T>& k) {
  PackedKernel<T> p;
  p.rows = k.kernel_h * k.kernel_w * k.in_channels;
  p.cols = k.out_channels;
  p.values.resize(p.rows * p.cols);
  for (std::size_t o = 0; o < k.out_channels; ++o) {
    for (std::size_t c = 0; c < k.in_channels; ++c) {
      for (std::size_t y = 0; y < k.kernel_h; ++y) {
        for (std::size_t x = 0; x < k.kernel_w; ++x) {
          const std::size_t row = (y * k.kernel_w + x) * k.in_channels + c;
          p.values[row * p.cols + o] = k.w(o, c, y, x);
        }
      }
    }
  }
  return p;
}

template <typename T>
using RowMajorMatrix =
    Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
FeatureMap<T> conv2d(const FeatureMap<T>& input, const Kernel<T>& k,
                     const PackedKernel<T>& packed, std::size_t stride,
                     std::size_t padding, bool relu) {
  if (input.channels() != k.in_channels) {
    throw Error(ErrorKind::kShapeMismatch,
                "conv expects " + std::to_string(k.in_channels) +
                    " input channels, got " +
                    std::to_string(input.channels()));
  }
  const std::size_t oh = ConvOutputSize(input.rows(), k.kernel_h, stride, padding);
  const std::size_t ow = ConvOutputSize(input.cols(), k.kernel_w, stride, padding);
  const std::size_t cin = k.in_channels;
  const std::size_t kdim = packed.rows;
  FeatureMap<T> out(oh, ow, k.out_channels);

  using ConstMap = Eigen::Map<const RowMajorMatrix<T>>;
  using Map = Eigen::Map<RowMajorMatrix<T>>;
  ConstMap weights(packed.values.data(), static_cast<Eigen::Index>(kdim),
                   static_cast<Eigen::Index>(packed.cols));
  Map result(out.data(), static_cast<Eigen::Index>(oh * ow),
             static_cast<Eigen::Index>(k.out_channels));

  if (k.kernel_h == 1 && k.kernel_w == 1 && stride == 1 && padding == 0) {
    ConstMap cols(input.data(), static_cast<Eigen::Index>(oh * ow),
                  static_cast<Eigen::Index>(cin));
    result.noalias() = cols * weights;
  } else {
    std::vector<T> patches(oh * ow * kdim, T{});
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        T* row = patches.data() + (oy * ow + ox) * kdim;
        for (std::size_t ky = 0; ky < k.kernel_h; ++ky) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * stride + ky) -
                                    static_cast<std::ptrdiff_t>(padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(input.rows())) continue;
          for (std::size_t kx = 0; kx < k.kernel_w; ++kx) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * stride + kx) -
                static_cast<std::ptrdiff_t>(padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(input.cols())) continue;
            const T* src = input.cell(static_cast<std::size_t>(iy),
                                      static_cast<std::size_t>(ix));
            std::copy(src, src + cin, row + (ky * k.kernel_w + kx) * cin);
          }
        }
      }
    }
    ConstMap cols(patches.data(), static_cast<Eigen::Index>(oh * ow),
                  static_cast<Eigen::Index>(kdim));
    result.noalias() = cols * weights;
  }
  const std::size_t oc = k.out_channels;
  for (std::size_t cell = 0; cell < oh * ow; ++cell) {
    T* v = out.data() + cell * oc;
    for (std::size_t o = 0; o < oc; ++o) {
      const T x = v[o] + k.bias[o];
      v[o] = relu ? std::max(x, T{}) : x;
    }
  }
  return out;
}

template <typename T>
FeatureMap<T> max_pool(const FeatureMap<T>& in, std::size_t size,
                       std::size_t stride) {
  const std::size_t oh = ConvOutputSize(in.rows(), size, stride, 0);
  const std::size_t ow = ConvOutputSize(in.cols(), size, stride, 0);
  FeatureMap<T> out(oh, ow, in.channels());
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      T* dst = out.cell(y, x);
      const T* first = in.cell(y * stride, x * stride);
      std::copy(first, first + in.channels(), dst);
      for (std::size_t dy = 0; dy < size; ++dy) {
        for (std::size_t dx = 0; dx < size; ++dx) {
          const T* src = in.cell(y * stride + dy, x * stride + dx);
          for (std::size_t c = 0; c < in.channels(); ++c) {
            dst[c] = std::max(dst[c], src[c]);
          }
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Anchors and box coding.

struct AnchorBox {
  double cx = 0;
  double cy = 0;
  double w = 0;
  double h = 0;
};

struct AnchorLevelConfig {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> scales;
  std::vector<double> aspect_ratios;
  // When set, adds one ratio-1 box of scale sqrt(scales[0] * next_scale).
  std::optional<double> next_scale;

  std::size_t boxes_per_cell() const {
    return scales.size() * aspect_ratios.size() + (next_scale ? 1 : 0);
  }
};

struct AnchorSet {
  std::vector<AnchorBox> boxes;  // level, then row-major cell, then box
  std::vector<std::size_t> level_counts;

  std::size_t size() const { return boxes.size(); }
};

inline AnchorSet generate_anchors(std::span<const AnchorLevelConfig> levels) {
  if (levels.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "anchor config has no levels");
  }
  AnchorSet set;
  for (const auto& level : levels) {
    if (level.rows == 0 || level.cols == 0 || level.scales.empty() ||
        level.aspect_ratios.empty()) {
      throw Error(ErrorKind::kInvalidArgument, "empty anchor level");
    }
    for (double s : level.scales) {
      if (!(s > 0 && s <= 1)) {
        throw Error(ErrorKind::kInvalidArgument, "anchor scale outside (0, 1]");
      }
    }
    for (double r : level.aspect_ratios) {
      if (!(r > 0)) {
        throw Error(ErrorKind::kInvalidArgument, "aspect ratio must be > 0");
      }
    }
    if (level.next_scale && !(*level.next_scale > 0)) {
      throw Error(ErrorKind::kInvalidArgument, "next scale must be > 0");
    }
    const std::size_t before = set.boxes.size();
    for (std::size_t i = 0; i < level.rows; ++i) {
      for (std::size_t j = 0; j < level.cols; ++j) {
        const double cx = (static_cast<double>(j) + 0.5) / level.cols;
        const double cy = (static_cast<double>(i) + 0.5) / level.rows;
        for (double s : level.scales) {
          for (double r : level.aspect_ratios) {
            const double sr = std::sqrt(r);
            set.boxes.push_back({cx, cy, s * sr, s / sr});
          }
        }
        if (level.next_scale) {
          const double s = std::sqrt(level.scales.front() * *level.next_scale);
          set.boxes.push_back({cx, cy, s, s});
        }
      }
    }
    set.level_counts.push_back(set.boxes.size() - before);
  }
  return set;
}

inline AnchorSet generate_anchors(const std::vector<AnchorLevelConfig>& levels) {
  return generate_anchors(std::span<const AnchorLevelConfig>(levels));
}

struct LocOffset {
  double tx = 0;
  double ty = 0;
  double tw = 0;
  double th = 0;
};

struct BoxVariances {
  double center = 0.1;
  double size = 0.2;
};

inline Box ClampUnit(Box b) {
  b.xmin = std::clamp(b.xmin, 0.0, 1.0);
  b.ymin = std::clamp(b.ymin, 0.0, 1.0);
  b.xmax = std::clamp(b.xmax, 0.0, 1.0);
  b.ymax = std::clamp(b.ymax, 0.0, 1.0);
  return b;
}

inline std::vector<Box> decode_boxes(std::span<const LocOffset> loc,
                                     const AnchorSet& anchors,
                                     BoxVariances var = {}) {
  if (loc.size() != anchors.size()) {
    throw Error(ErrorKind::kShapeMismatch,
                std::to_string(loc.size()) + " offsets for " +
                    std::to_string(anchors.size()) + " anchors");
  }
  std::vector<Box> out(loc.size());
  for (std::size_t i = 0; i < loc.size(); ++i) {
    const AnchorBox& a = anchors.boxes[i];
    const double cx = a.cx + loc[i].tx * var.center * a.w;
    const double cy = a.cy + loc[i].ty * var.center * a.h;
    const double w = a.w * std::exp(loc[i].tw * var.size);
    const double h = a.h * std::exp(loc[i].th * var.size);
    out[i] = ClampUnit({cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2});
  }
  return out;
}

// Greedy NMS: visit by descending score (ties: lower index first), drop any
// box whose IoU with an already kept box exceeds the threshold.
inline std::vector<std::size_t> nms(std::span<const Box> boxes,
                                    std::span<const double> scores,
                                    double iou_threshold = 0.45,
                                    std::size_t top_k = 200) {
  if (boxes.size() != scores.size()) {
    throw Error(ErrorKind::kShapeMismatch, "boxes and scores differ in length");
  }
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    if (kept.size() >= top_k) break;
    bool suppressed = false;
    for (std::size_t k : kept) {
      if (iou(boxes[idx], boxes[k]) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Network description.

enum class InputDomain { kFrequency, kPixel };
enum class LayerKind { kConv, kMaxPool };

template <typename T>
struct Layer {
  LayerKind kind = LayerKind::kConv;
  Kernel<T> kernel;  // conv only
  std::size_t stride = 1;
  std::size_t padding = 0;
  bool relu = true;
  std::size_t pool_size = 2;  // max pool only

  static Layer Conv(Kernel<T> k, std::size_t stride, std::size_t padding,
                    bool relu = true) {
    Layer l;
    l.kind = LayerKind::kConv;
    l.kernel = std::move(k);
    l.stride = stride;
    l.padding = padding;
    l.relu = relu;
    return l;
  }
  static Layer MaxPool(std::size_t size = 2, std::size_t stride = 2) {
    Layer l;
    l.kind = LayerKind::kMaxPool;
    l.pool_size = size;
    l.stride = stride;
    return l;
  }
};

struct AnchorSpec {
  std::vector<double> scales;
  std::vector<double> aspect_ratios;
  std::optional<double> next_scale;

  std::size_t boxes_per_cell() const {
    return scales.size() * aspect_ratios.size() + (next_scale ? 1 : 0);
  }
};

// Classification and localization convs (3x3, padding 1) on one layer output.
template <typename T>
struct DetectionHead {
  std::size_t source_layer = 0;
  AnchorSpec anchors;
  Kernel<T> classification;  // out = boxes * (classes + 1)
  Kernel<T> localization;    // out = boxes * 4
};

template <typename T>
struct NetworkWeights {
  InputDomain domain = InputDomain::kFrequency;
  std::size_t input_height = 0;  // pixels
  std::size_t input_width = 0;
  std::size_t num_classes = 0;  // foreground classes; background is class 0
  std::vector<Layer<T>> layers;
  std::vector<DetectionHead<T>> heads;
  BoxVariances variances;

  // Front-end of a frequency network: the first layer, an 8x8/s8 conv.
  const Kernel<T>& frontend() const { return layers.at(0).kernel; }
};

struct MapShape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t channels = 0;
};

// Output shape of every layer; throws on any channel or size inconsistency.
template <typename T>
std::vector<MapShape> infer_shapes(const NetworkWeights<T>& net) {
  if (net.layers.empty()) {
    throw Error(ErrorKind::kShapeMismatch, "network has no layers");
  }
  MapShape cur{net.input_height, net.input_width, 3};
  std::vector<MapShape> shapes;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto& l = net.layers[i];
    if (l.kind == LayerKind::kMaxPool) {
      cur = {ConvOutputSize(cur.rows, l.pool_size, l.stride, 0),
             ConvOutputSize(cur.cols, l.pool_size, l.stride, 0), cur.channels};
    } else {
      if (l.kernel.in_channels != cur.channels) {
        throw Error(ErrorKind::kShapeMismatch,
                    "layer " + std::to_string(i) + " expects " +
                        std::to_string(l.kernel.in_channels) +
                        " channels, previous layer gives " +
                        std::to_string(cur.channels));
      }
      if (l.kernel.weights.size() != l.kernel.out_channels *
                                         l.kernel.in_channels *
                                         l.kernel.slice_size() ||
          l.kernel.bias.size() != l.kernel.out_channels) {
        throw Error(ErrorKind::kShapeMismatch,
                    "layer " + std::to_string(i) + " weight count mismatch");
      }
      cur = {ConvOutputSize(cur.rows, l.kernel.kernel_h, l.stride, l.padding),
             ConvOutputSize(cur.cols, l.kernel.kernel_w, l.stride, l.padding),
             l.kernel.out_channels};
    }
    shapes.push_back(cur);
  }
  if (net.domain == InputDomain::kFrequency) {
    const auto& f = net.layers.front();
    if (f.kind != LayerKind::kConv || f.kernel.kernel_h != 8 ||
        f.kernel.kernel_w != 8 || f.stride != 8 || f.padding != 0) {
      throw Error(ErrorKind::kShapeMismatch,
                  "frequency network must start with an 8x8/stride-8 conv");
    }
  }
  for (const auto& h : net.heads) {
    if (h.source_layer >= shapes.size()) {
      throw Error(ErrorKind::kShapeMismatch, "head source layer out of range");
    }
    const std::size_t boxes = h.anchors.boxes_per_cell();
    const std::size_t ch = shapes[h.source_layer].channels;
    if (h.classification.in_channels != ch || h.localization.in_channels != ch ||
        h.classification.out_channels != boxes * (net.num_classes + 1) ||
        h.localization.out_channels != boxes * 4) {
      throw Error(ErrorKind::kShapeMismatch,
                  "head on layer " + std::to_string(h.source_layer) +
                      " has inconsistent channel counts");
    }
  }
  return shapes;
}

template <typename T>
AnchorSet network_anchors(const NetworkWeights<T>& net) {
  const auto shapes = infer_shapes(net);
  std::vector<AnchorLevelConfig> levels;
  for (const auto& h : net.heads) {
    const auto& s = shapes[h.source_layer];
    levels.push_back({s.rows, s.cols, h.anchors.scales, h.anchors.aspect_ratios,
                      h.anchors.next_scale});
  }
  return generate_anchors(levels);
}

// Desk-scale architecture: a stride-8 stem (the 8x8 block conv for the
// frequency variant, three conv + pool stages for the pixel variant) followed
// by stride-2 conv stages, with heads on the last three stage outputs.
struct DeskConfig {
  std::size_t input_size = 128;
  std::size_t num_classes = 3;
  std::size_t frontend_channels = 64;
  std::vector<std::size_t> pixel_stem_channels = {16, 32, 64};
  std::vector<std::size_t> stage_channels = {256, 256, 128, 128};
  std::size_t head_levels = 3;
  double min_scale = 0.2;
  double max_scale = 0.9;
  std::vector<double> aspect_ratios = {1.0, 2.0, 0.5};
};

namespace detail {

template <typename T>
void FillUniform(Kernel<T>& k, std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(k.in_channels * k.slice_size());
  const double limit = std::sqrt(6.0 / fan_in);
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& w : k.weights) w = static_cast<T>(dist(rng));
  std::uniform_real_distribution<double> bias(-0.05, 0.05);
  for (auto& b : k.bias) b = static_cast<T>(bias(rng));
}

}  // namespace detail

// Seeded uniform initialization; deterministic for a given seed.
template <typename T>
NetworkWeights<T> make_desk_network(InputDomain domain, const DeskConfig& cfg,
                                    std::uint64_t seed) {
  if (cfg.input_size % 8 != 0 || cfg.head_levels == 0 ||
      cfg.head_levels > cfg.stage_channels.size()) {
    throw Error(ErrorKind::kInvalidArgument, "bad desk network config");
  }
  std::mt19937_64 rng(seed);
  NetworkWeights<T> net;
  net.domain = domain;
  net.input_height = net.input_width = cfg.input_size;
  net.num_classes = cfg.num_classes;

  std::size_t channels = 3;
  if (domain == InputDomain::kFrequency) {
    Kernel<T> k(cfg.frontend_channels, 3, 8, 8);
    detail::FillUniform(k, rng);
    net.layers.push_back(Layer<T>::Conv(std::move(k), 8, 0));
    channels = cfg.frontend_channels;
  } else {
    if (cfg.pixel_stem_channels.size() != 3) {
      throw Error(ErrorKind::kInvalidArgument,
                  "pixel stem needs three stages to reach stride 8");
    }
    for (std::size_t width : cfg.pixel_stem_channels) {
      Kernel<T> k(width, channels, 3, 3);
      detail::FillUniform(k, rng);
      net.layers.push_back(Layer<T>::Conv(std::move(k), 1, 1));
      net.layers.push_back(Layer<T>::MaxPool(2, 2));
      channels = width;
    }
  }
  std::vector<std::size_t> stage_layers;
  for (std::size_t width : cfg.stage_channels) {
    Kernel<T> k(width, channels, 3, 3);
    detail::FillUniform(k, rng);
    net.layers.push_back(Layer<T>::Conv(std::move(k), 2, 1));
    stage_layers.push_back(net.layers.size() - 1);
    channels = width;
  }
  const std::size_t first = stage_layers.size() - cfg.head_levels;
  const std::size_t m = cfg.head_levels;
  for (std::size_t level = 0; level < m; ++level) {
    auto scale_at = [&](std::size_t k) {
      return m == 1 ? cfg.min_scale
                    : cfg.min_scale + (cfg.max_scale - cfg.min_scale) *
                                          static_cast<double>(k) /
                                          static_cast<double>(m - 1);
    };
    DetectionHead<T> head;
    head.source_layer = stage_layers[first + level];
    head.anchors.scales = {scale_at(level)};
    head.anchors.aspect_ratios = cfg.aspect_ratios;
    head.anchors.next_scale = level + 1 < m ? scale_at(level + 1) : 1.0;
    const std::size_t src_ch = cfg.stage_channels[first + level];
    const std::size_t boxes = head.anchors.boxes_per_cell();
    head.classification = Kernel<T>(boxes * (cfg.num_classes + 1), src_ch, 3, 3);
    head.localization = Kernel<T>(boxes * 4, src_ch, 3, 3);
    detail::FillUniform(head.classification, rng);
    detail::FillUniform(head.localization, rng);
    net.heads.push_back(std::move(head));
  }
  infer_shapes(net);
  return net;
}

// ---------------------------------------------------------------------------
// Forward pass.

struct Detection {
  std::size_t class_id = 0;  // 0-based foreground class
  double confidence = 0;
  Box box;  // normalized [0, 1]
};

struct ForwardOptions {
  double conf_threshold = 0.01;
  double nms_iou = 0.45;
  std::size_t top_k = 200;
};

template <typename T>
struct RawDetections {
  std::size_t num_classes = 0;  // including background
  std::vector<T> probabilities;  // anchor-major, softmax per anchor
  std::vector<LocOffset> offsets;
  AnchorSet anchors;

  std::size_t anchor_count() const { return offsets.size(); }
};

// Network with GEMM-packed kernels and anchors, ready for repeated forwards.
template <typename T>
class PreparedNetwork {
 public:
  explicit PreparedNetwork(NetworkWeights<T> net)
      : net_(std::move(net)), shapes_(infer_shapes(net_)),
        anchors_(network_anchors(net_)) {
    for (const auto& l : net_.layers) {
      packed_.push_back(l.kind == LayerKind::kConv ? PackKernel(l.kernel)
                                                   : PackedKernel<T>{});
    }
    for (const auto& h : net_.heads) {
      head_cls_.push_back(PackKernel(h.classification));
      head_loc_.push_back(PackKernel(h.localization));
    }
    if (net_.domain == InputDomain::kFrequency) {
      const auto& k = net_.layers.front().kernel;
      const std::size_t ch = k.in_channels * kBlockSize;
      pointwise_.resize(ch * k.out_channels);
      for (std::size_t o = 0; o < k.out_channels; ++o) {
        for (std::size_t i = 0; i < ch; ++i) {
          pointwise_[i * k.out_channels + o] = k.weights[o * ch + i];
        }
      }
    }
  }

  const NetworkWeights<T>& weights() const { return net_; }
  const AnchorSet& anchors() const { return anchors_; }
  const std::vector<MapShape>& shapes() const { return shapes_; }

  // Accepts pixel planes (h, w, 3) for pixel networks, and either coefficient
  // planes (h, w, 3) or a DCT tensor (h/8, w/8, 192) for frequency networks.
  RawDetections<T> forward_raw(const Tensor3<T>& input) const {
    FeatureMap<T> x = RunFrontend(input);
    std::vector<FeatureMap<T>> outputs;
    outputs.reserve(net_.layers.size());
    outputs.push_back(std::move(x));
    for (std::size_t i = 1; i < net_.layers.size(); ++i) {
      outputs.push_back(RunLayer(i, outputs.back()));
    }
    RawDetections<T> raw;
    raw.num_classes = net_.num_classes + 1;
    raw.anchors = anchors_;
    const std::size_t nc = raw.num_classes;
    raw.probabilities.reserve(anchors_.size() * nc);
    raw.offsets.reserve(anchors_.size());
    for (std::size_t h = 0; h < net_.heads.size(); ++h) {
      const auto& head = net_.heads[h];
      const auto& src = outputs[head.source_layer];
      const FeatureMap<T> cls =
          conv2d(src, head.classification, head_cls_[h], 1, 1, false);
      const FeatureMap<T> loc =
          conv2d(src, head.localization, head_loc_[h], 1, 1, false);
      const std::size_t boxes = head.anchors.boxes_per_cell();
      for (std::size_t cell = 0; cell < cls.rows() * cls.cols(); ++cell) {
        const T* logits = cls.data() + cell * cls.channels();
        const T* l = loc.data() + cell * loc.channels();
        for (std::size_t b = 0; b < boxes; ++b) {
          const T* z = logits + b * nc;
          const T zmax = *std::max_element(z, z + nc);
          double sum = 0;
          std::vector<double> e(nc);
          for (std::size_t c = 0; c < nc; ++c) {
            e[c] = std::exp(static_cast<double>(z[c] - zmax));
            sum += e[c];
          }
          for (std::size_t c = 0; c < nc; ++c) {
            raw.probabilities.push_back(static_cast<T>(e[c] / sum));
          }
          raw.offsets.push_back({static_cast<double>(l[b * 4 + 0]),
                                 static_cast<double>(l[b * 4 + 1]),
                                 static_cast<double>(l[b * 4 + 2]),
                                 static_cast<double>(l[b * 4 + 3])});
        }
      }
    }
    if (raw.offsets.size() != anchors_.size()) {
      throw Error(ErrorKind::kShapeMismatch, "head outputs do not match anchors");
    }
    return raw;
  }

  std::vector<Detection> forward(const Tensor3<T>& input,
                                 const ForwardOptions& opts = {}) const {
    return postprocess(forward_raw(input), opts);
  }

  std::vector<Detection> postprocess(const RawDetections<T>& raw,
                                     const ForwardOptions& opts) const {
    const std::vector<Box> boxes =
        decode_boxes(raw.offsets, raw.anchors, net_.variances);
    std::vector<Detection> all;
    const std::size_t nc = raw.num_classes;
    for (std::size_t cls = 1; cls < nc; ++cls) {
      std::vector<Box> cand_boxes;
      std::vector<double> cand_scores;
      for (std::size_t a = 0; a < boxes.size(); ++a) {
        const double p = static_cast<double>(raw.probabilities[a * nc + cls]);
        if (p > opts.conf_threshold && boxes[a].valid()) {
          cand_boxes.push_back(boxes[a]);
          cand_scores.push_back(p);
        }
      }
      for (std::size_t k : nms(cand_boxes, cand_scores, opts.nms_iou, opts.top_k)) {
        all.push_back({cls - 1, cand_scores[k], cand_boxes[k]});
      }
    }
    std::stable_sort(all.begin(), all.end(),
                     [](const Detection& a, const Detection& b) {
                       return a.confidence > b.confidence;
                     });
    if (all.size() > opts.top_k) all.resize(opts.top_k);
    return all;
  }

 private:
  FeatureMap<T> RunFrontend(const Tensor3<T>& input) const {
    const auto& first = net_.layers.front();
    if (net_.domain == InputDomain::kFrequency &&
        input.channels() == 3 * kBlockSize) {
      if (input.rows() * 8 != net_.input_height ||
          input.cols() * 8 != net_.input_width) {
        throw Error(ErrorKind::kShapeMismatch,
                    "DCT tensor does not match the network input size");
      }
      // 8x8/s8 conv on planes == 1x1 conv on the flattened tensor; the
      // packed weight rows are reordered to (c, y, x).
      FeatureMap<T> out(input.rows(), input.cols(), first.kernel.out_channels);
      using ConstMap = Eigen::Map<const RowMajorMatrix<T>>;
      ConstMap in(input.data(), static_cast<Eigen::Index>(input.rows() * input.cols()),
                  static_cast<Eigen::Index>(input.channels()));
      ConstMap w(frontend_pointwise().data(),
                 static_cast<Eigen::Index>(input.channels()),
                 static_cast<Eigen::Index>(first.kernel.out_channels));
      Eigen::Map<RowMajorMatrix<T>> res(
          out.data(), static_cast<Eigen::Index>(input.rows() * input.cols()),
          static_cast<Eigen::Index>(first.kernel.out_channels));
      res.noalias() = in * w;
      const std::size_t oc = first.kernel.out_channels;
      for (std::size_t cell = 0; cell < out.rows() * out.cols(); ++cell) {
        T* v = out.data() + cell * oc;
        for (std::size_t o = 0; o < oc; ++o) {
          const T x = v[o] + first.kernel.bias[o];
          v[o] = first.relu ? std::max(x, T{}) : x;
        }
      }
      return out;
    }
    if (input.channels() != 3 || input.rows() != net_.input_height ||
        input.cols() != net_.input_width) {
      throw Error(ErrorKind::kShapeMismatch,
                  "input is " + std::to_string(input.rows()) + "x" +
                      std::to_string(input.cols()) + "x" +
                      std::to_string(input.channels()) + ", network expects " +
                      std::to_string(net_.input_height) + "x" +
                      std::to_string(net_.input_width) + "x3");
    }
    return RunLayer(0, input);
  }

  FeatureMap<T> RunLayer(std::size_t i, const FeatureMap<T>& x) const {
    const auto& l = net_.layers[i];
    if (l.kind == LayerKind::kMaxPool) return max_pool(x, l.pool_size, l.stride);
    return conv2d(x, l.kernel, packed_[i], l.stride, l.padding, l.relu);
  }

  const std::vector<T>& frontend_pointwise() const { return pointwise_; }

  NetworkWeights<T> net_;
  std::vector<MapShape> shapes_;
  AnchorSet anchors_;
  std::vector<PackedKernel<T>> packed_;
  std::vector<PackedKernel<T>> head_cls_;
  std::vector<PackedKernel<T>> head_loc_;
  // Front-end weights as a (64 * in, out) matrix for DCT-tensor input.
  std::vector<T> pointwise_;
};

template <typename T>
std::vector<Detection> forward(const Tensor3<T>& input,
                               const NetworkWeights<T>& net,
                               const ForwardOptions& opts = {}) {
  return PreparedNetwork<T>(net).forward(input, opts);
}

// Runs independent inputs on `workers` threads; output order follows input
// order regardless of the worker count.
template <typename T>
std::vector<std::vector<Detection>> forward_batch(
    std::span<const Tensor3<T>> inputs, const PreparedNetwork<T>& net,
    const ForwardOptions& opts = {}, std::size_t workers = 1) {
  std::vector<std::vector<Detection>> out(inputs.size());
  workers = std::max<std::size_t>(1, std::min(workers, inputs.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      out[i] = net.forward(inputs[i], opts);
    }
    return out;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < inputs.size(); i += workers) {
          out[i] = net.forward(inputs[i], opts);
        }
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace freqdet

#endif  // FREQDET_FREQ_FRONTEND_HPP_
