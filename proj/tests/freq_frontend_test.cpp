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

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "freqdet/freq_frontend.hpp"
#include "freqdet/pipeline.hpp"
#include "freqdet/reference/libjpeg.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "support/properties.hpp"

namespace freqdet {
namespace {

using testing::Rng;

TEST(BlockConv8, PaperShape) {
  Tensor3<float> in(304, 304, 3, 1.0f);
  Kernel<float> k(128, 3, 8, 8);
  const auto out = block_conv8(in, k);
  EXPECT_EQ(out.rows(), 38u);
  EXPECT_EQ(out.cols(), 38u);
  EXPECT_EQ(out.channels(), 128u);
}

TEST(BlockConv8, DeltaKernelSelectsDc) {
  Rng rng(51);
  const auto planes = testing::RandomPlanes(rng, 3, 2);
  const auto coeffs = coefficient_planes<double>(planes);
  Kernel<double> k(3, 3, 8, 8);
  for (std::size_t c = 0; c < 3; ++c) k.w(c, c, 0, 0) = 1.0;
  const auto out = block_conv8(coeffs, k);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.at(i, j, c), planes[c].grid.at(i, j)[0]);
    }
  }
}

TEST(BlockConv8, PointwiseOnTensorMatchesPlanes) {
  Rng rng(52);
  const auto planes = testing::RandomPlanes(rng, 4, 5);
  const auto k = testing::RandomKernel<double>(rng, 7, 3, 8, 8);
  const auto a = block_conv8(coefficient_planes<double>(planes), k);
  const auto b = pointwise_block_conv(assemble_dct_tensor<double>(planes), k);
  ASSERT_TRUE(a.same_shape(b));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.values()[i], b.values()[i], 1e-6);
}

TEST(BlockConv8, RejectsBadShapes) {
  Kernel<float> k(4, 3, 8, 8);
  EXPECT_THROW(block_conv8(Tensor3<float>(12, 8, 3), k), Error);
  EXPECT_THROW(block_conv8(Tensor3<float>(8, 8, 2), k), Error);
  EXPECT_THROW(block_conv8(Tensor3<float>(8, 8, 3), Kernel<float>(4, 3, 3, 3)), Error);
  EXPECT_THROW(pointwise_block_conv(Tensor3<float>(1, 1, 191), k), Error);
}

TEST(PixelToFreqWeights, ZeroKernelStaysZero) {
  Kernel<double> k(2, 3, 8, 8);
  k.bias = {0.5, -1};
  const auto f = pixel_to_freq_weights(k);
  for (double w : f.weights) EXPECT_EQ(w, 0.0);
  EXPECT_EQ(f.bias, k.bias);
}

TEST(PixelToFreqWeights, BasisFunctionBecomesDelta) {
  for (auto [u0, v0] : {std::pair{0, 0}, {3, 1}, {7, 7}, {2, 5}}) {
    Kernel<double> k(1, 1, 8, 8);
    DctBlock delta;
    delta.at(v0, u0) = 1.0;
    const PixelBlock basis = testing::NaiveIdct(delta);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) k.w(0, 0, y, x) = basis.at(y, x);
    }
    const auto f = pixel_to_freq_weights(k);
    for (int v = 0; v < 8; ++v) {
      for (int u = 0; u < 8; ++u) {
        EXPECT_NEAR(f.w(0, 0, v, u), u == u0 && v == v0 ? 1.0 : 0.0, 1e-12);
      }
    }
  }
}

TEST(PixelToFreqWeights, RejectsNon8x8) {
  EXPECT_THROW(pixel_to_freq_weights(Kernel<double>(1, 3, 3, 3)), Error);
}

TEST(PixelToFreqWeights, EquivalentOnRandomPairs) {
  Rng rng(53);
  for (int i = 0; i < 100; ++i) {
    const auto c = testing::FrontendEquivalenceCase<double>(rng);
    EXPECT_TRUE(c.dims_ok);
    EXPECT_LE(c.max_abs_diff, 1e-5);
  }
}

// Decoded coefficients against their own unrounded IDCT samples.
TEST(PixelToFreqWeights, EquivalentOnDecodedImage) {
  const auto bytes = reference::encode(testing::SyntheticImage(32, 24, 1, 54),
                                       reference::OptionsGray(90));
  const DecodedJpeg d = decode_coefficients(bytes);
  const auto planes = dequantize_planes(d.structure, d.grids);
  Tensor3<double> y_coeffs(24, 32, 1), y_pixels(24, 32, 1);
  const SpatialPlane s = idct_plane(planes[0].grid);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      for (std::size_t v = 0; v < 8; ++v) {
        for (std::size_t u = 0; u < 8; ++u) y_coeffs.at(r * 8 + v, c * 8 + u, 0) = planes[0].grid.at(r, c).at(v, u);
      }
    }
  }
  for (std::size_t y = 0; y < 24; ++y) {
    for (std::size_t x = 0; x < 32; ++x) y_pixels.at(y, x, 0) = s.at(y, x);
  }
  Rng rng(55);
  const auto k = testing::RandomKernel<double>(rng, 5, 1, 8, 8);
  const auto a = block_conv8(y_pixels, k);
  const auto b = block_conv8(y_coeffs, pixel_to_freq_weights(k));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.values()[i], b.values()[i], 1e-9);
}

TEST(Conv2d, MatchesNaiveOracle) {
  Rng rng(56);
  for (auto [stride, pad] : {std::pair{1, 1}, {2, 1}, {1, 0}, {3, 2}}) {
    const auto x = testing::RandomTensor<double>(rng, 9, 11, 4);
    const auto k = testing::RandomKernel<double>(rng, 5, 4, 3, 3);
    const auto got = conv2d(x, k, PackKernel(k), stride, pad, true);
    const auto want = testing::NaiveConv2d(x, k, stride, pad, true);
    ASSERT_TRUE(got.same_shape(want));
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got.values()[i], want.values()[i], 1e-12);
  }
}

TEST(MaxPool, TakesWindowMaximum) {
  Tensor3<float> x(4, 4, 1);
  for (std::size_t i = 0; i < 16; ++i) x.data()[i] = float((i * 7) % 16);
  const auto y = max_pool(x, 2, 2);
  ASSERT_EQ(y.rows(), 2u);
  EXPECT_EQ(y.at(0, 0, 0), 12.0f);
  EXPECT_EQ(y.at(1, 1, 0), 13.0f);
}

TEST(Anchors, SingleBox) {
  const AnchorSet a = generate_anchors({AnchorLevelConfig{1, 1, {0.5}, {1.0}, std::nullopt}});
  ASSERT_EQ(a.size(), 1u);
  EXPECT_DOUBLE_EQ(a.boxes[0].cx, 0.5);
  EXPECT_DOUBLE_EQ(a.boxes[0].cy, 0.5);
  EXPECT_DOUBLE_EQ(a.boxes[0].w, 0.5);
  EXPECT_DOUBLE_EQ(a.boxes[0].h, 0.5);
}

TEST(Anchors, CountOn38By38) {
  const AnchorSet a = generate_anchors({AnchorLevelConfig{38, 38, {0.1}, {1.0, 2.0, 0.5}, 0.2}});
  EXPECT_EQ(a.size(), 5776u);
  EXPECT_EQ(a.level_counts, std::vector<std::size_t>{5776});
  EXPECT_NEAR(a.boxes[3].w, std::sqrt(0.1 * 0.2), 1e-15);
}

TEST(Anchors, AspectRatioTwo) {
  const AnchorSet a = generate_anchors({AnchorLevelConfig{3, 3, {0.4}, {2.0}, std::nullopt}});
  ASSERT_EQ(a.size(), 9u);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_NEAR(a.boxes[i].w, 0.4 * std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(a.boxes[i].h, 0.4 / std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(a.boxes[i].cx, (double(i % 3) + 0.5) / 3, 1e-12);
    EXPECT_NEAR(a.boxes[i].cy, (double(i / 3) + 0.5) / 3, 1e-12);
  }
  EXPECT_NEAR(a.boxes[0].w, 0.5657, 1e-4);
  EXPECT_NEAR(a.boxes[0].h, 0.2828, 1e-4);
}

TEST(Anchors, RejectsBadConfig) {
  EXPECT_THROW(generate_anchors(std::vector<AnchorLevelConfig>{}), Error);
  EXPECT_THROW(generate_anchors({AnchorLevelConfig{1, 1, {1.5}, {1.0}, std::nullopt}}), Error);
  EXPECT_THROW(generate_anchors({AnchorLevelConfig{1, 1, {0.5}, {0.0}, std::nullopt}}), Error);
}

TEST(DecodeBoxes, ZeroOffsetsGiveAnchors) {
  const AnchorSet a = generate_anchors({AnchorLevelConfig{2, 2, {0.3}, {1.0, 2.0}, std::nullopt}});
  const std::vector<LocOffset> loc(a.size());
  const auto boxes = decode_boxes(loc, a);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& b = a.boxes[i];
    EXPECT_NEAR(boxes[i].xmin, b.cx - b.w / 2, 1e-15);
    EXPECT_NEAR(boxes[i].ymax, b.cy + b.h / 2, 1e-15);
  }
  EXPECT_THROW(decode_boxes(std::vector<LocOffset>(3), a), Error);
}

TEST(DecodeBoxes, WidthDoubles) {
  const AnchorSet a = generate_anchors({AnchorLevelConfig{1, 1, {0.2}, {1.0}, std::nullopt}});
  const std::vector<LocOffset> loc = {{0, 0, std::log(2.0) / 0.2, 0}};
  const Box b = decode_boxes(loc, a)[0];
  EXPECT_NEAR(b.xmax - b.xmin, 0.4, 1e-12);
  EXPECT_NEAR(b.ymax - b.ymin, 0.2, 1e-12);
}

TEST(DecodeBoxes, MatchesFormula) {
  Rng rng(57);
  const AnchorSet a = generate_anchors({AnchorLevelConfig{4, 4, {0.3}, {1.0, 3.0}, 0.5}});
  std::vector<LocOffset> loc(a.size());
  for (auto& l : loc) l = {testing::UniformReal(rng, -2, 2), testing::UniformReal(rng, -2, 2),
                           testing::UniformReal(rng, -2, 2), testing::UniformReal(rng, -2, 2)};
  const auto boxes = decode_boxes(loc, a, {0.1, 0.2});
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& an = a.boxes[i];
    const double cx = an.cx + loc[i].tx * 0.1 * an.w, cy = an.cy + loc[i].ty * 0.1 * an.h;
    const double w = an.w * std::exp(loc[i].tw * 0.2), h = an.h * std::exp(loc[i].th * 0.2);
    EXPECT_NEAR(boxes[i].xmin, std::clamp(cx - w / 2, 0.0, 1.0), 1e-9);
    EXPECT_NEAR(boxes[i].ymin, std::clamp(cy - h / 2, 0.0, 1.0), 1e-9);
    EXPECT_NEAR(boxes[i].xmax, std::clamp(cx + w / 2, 0.0, 1.0), 1e-9);
    EXPECT_NEAR(boxes[i].ymax, std::clamp(cy + h / 2, 0.0, 1.0), 1e-9);
  }
}

TEST(Nms, SingleAndDuplicate) {
  const std::vector<Box> one = {{0, 0, 1, 1}};
  EXPECT_EQ(nms(one, std::vector<double>{0.3}), std::vector<std::size_t>{0});
  const std::vector<Box> two = {{0, 0, 1, 1}, {0, 0, 1, 1}};
  EXPECT_EQ(nms(two, std::vector<double>{0.8, 0.9}, 0.5), std::vector<std::size_t>{1});
  EXPECT_TRUE(nms({}, {}).empty());
  EXPECT_THROW(nms(two, std::vector<double>{0.8}), Error);
}

TEST(Nms, TiesKeepLowerIndexAndTopK) {
  const std::vector<Box> b = {{0, 0, 1, 1}, {0, 0, 1, 1}, {5, 5, 6, 6}, {8, 8, 9, 9}};
  EXPECT_EQ(nms(b, std::vector<double>{0.5, 0.5, 0.5, 0.4}), (std::vector<std::size_t>{0, 2, 3}));
  EXPECT_EQ(nms(b, std::vector<double>{0.5, 0.5, 0.5, 0.4}, 0.45, 2), (std::vector<std::size_t>{0, 2}));
}

TEST(Nms, ThresholdIsStrict) {
  // IoU exactly 0.5: not suppressed at threshold 0.5.
  const std::vector<Box> b = {{0, 0, 2, 1}, {0, 0, 1, 1}};
  EXPECT_DOUBLE_EQ(iou(b[0], b[1]), 0.5);
  EXPECT_EQ(nms(b, std::vector<double>{0.9, 0.8}, 0.5).size(), 2u);
  EXPECT_EQ(nms(b, std::vector<double>{0.9, 0.8}, 0.49).size(), 1u);
}

TEST(Nms, MatchesPairwiseOracle) {
  Rng rng(58);
  for (int t = 0; t < 200; ++t) {
    std::vector<Box> boxes;
    std::vector<double> scores;
    for (int i = 0; i < 20; ++i) {
      boxes.push_back(testing::RandomBox(rng, 40, 5, 30));
      scores.push_back(testing::UniformReal(rng, 0, 1));
    }
    EXPECT_EQ(nms(boxes, scores, 0.45, 200), testing::NaiveNms(boxes, scores, 0.45, 200));
  }
}

NetworkWeights<float> Desk(InputDomain d, std::uint64_t seed = 7) {
  DeskConfig cfg;
  cfg.input_size = 64;
  cfg.frontend_channels = 16;
  cfg.stage_channels = {32, 32, 16};
  cfg.head_levels = 2;
  return make_desk_network<float>(d, cfg, seed);
}

DctTensor DeskInput(std::size_t size, std::uint64_t seed) {
  const auto bytes = reference::encode(testing::SyntheticImage(size, size, 3, seed),
                                       reference::Options420(80));
  return extract_dct_tensor(bytes);
}

TEST(Forward, RawOutputCoversEveryAnchor) {
  const PreparedNetwork<float> net(Desk(InputDomain::kFrequency));
  const auto raw = net.forward_raw(DeskInput(64, 59));
  EXPECT_EQ(raw.anchor_count(), net.anchors().size());
  EXPECT_EQ(raw.probabilities.size(), raw.anchor_count() * 4);
  // stages 64/8=8 -> 4 -> 2 -> 1; heads on the 2x2 and 1x1 maps, 4 boxes each.
  EXPECT_EQ(raw.anchor_count(), (4u + 1u) * 4u);
  for (std::size_t a = 0; a < raw.anchor_count(); ++a) {
    double s = 0;
    for (std::size_t c = 0; c < 4; ++c) s += raw.probabilities[a * 4 + c];
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Forward, ThresholdOneGivesNothing) {
  const auto net = Desk(InputDomain::kFrequency);
  ForwardOptions o;
  o.conf_threshold = 1.0;
  EXPECT_TRUE(forward(DeskInput(64, 60), net, o).empty());
  o.conf_threshold = 0.0;
  EXPECT_FALSE(forward(DeskInput(64, 60), net, o).empty());
}

TEST(Forward, TensorAndPlanesAgree) {
  const PreparedNetwork<float> net(Desk(InputDomain::kFrequency));
  const auto bytes = reference::encode(testing::SyntheticImage(64, 64, 3, 61),
                                       reference::Options444(80));
  const DecodedJpeg d = decode_coefficients(bytes);
  const auto planes = to_444_planes(dequantize_planes(d.structure, d.grids));
  const auto a = net.forward_raw(assemble_dct_tensor<float>(planes));
  const auto b = net.forward_raw(coefficient_planes<float>(planes));
  ASSERT_EQ(a.probabilities.size(), b.probabilities.size());
  for (std::size_t i = 0; i < a.probabilities.size(); ++i) {
    EXPECT_NEAR(a.probabilities[i], b.probabilities[i], 1e-4);
  }
}

TEST(Forward, DeterministicAcrossRunsAndWorkers) {
  const PreparedNetwork<float> net(Desk(InputDomain::kFrequency, 9));
  std::vector<DctTensor> inputs;
  for (int i = 0; i < 6; ++i) inputs.push_back(DeskInput(64, 70 + i));
  ForwardOptions o;
  o.conf_threshold = 0.2;
  const auto one = forward_batch<float>(inputs, net, o, 1);
  const auto three = forward_batch<float>(inputs, net, o, 3);
  const auto again = forward_batch<float>(inputs, net, o, 1);
  ASSERT_EQ(one.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    ASSERT_EQ(one[i].size(), three[i].size());
    ASSERT_EQ(one[i].size(), again[i].size());
    for (std::size_t j = 0; j < one[i].size(); ++j) {
      EXPECT_EQ(one[i][j].class_id, three[i][j].class_id);
      EXPECT_EQ(one[i][j].confidence, three[i][j].confidence);
      EXPECT_EQ(one[i][j].box, three[i][j].box);
      EXPECT_EQ(one[i][j].box, again[i][j].box);
    }
  }
}

TEST(Forward, PixelNetworkRuns) {
  const PreparedNetwork<float> net(Desk(InputDomain::kPixel));
  const auto raw = net.forward_raw(Tensor3<float>(64, 64, 3, 0.1f));
  EXPECT_EQ(raw.anchor_count(), net.anchors().size());
  EXPECT_THROW(net.forward_raw(Tensor3<float>(32, 32, 3)), Error);
}

TEST(Forward, RejectsMismatchedInput) {
  const PreparedNetwork<float> net(Desk(InputDomain::kFrequency));
  EXPECT_THROW(net.forward_raw(DeskInput(128, 62)), Error);
}

TEST(InferShapes, DetectsChannelMismatch) {
  auto net = Desk(InputDomain::kFrequency);
  net.layers[1].kernel = Kernel<float>(32, 99, 3, 3);
  EXPECT_THROW(infer_shapes(net), Error);
  net = Desk(InputDomain::kFrequency);
  net.heads[0].classification = Kernel<float>(5, net.heads[0].classification.in_channels, 3, 3);
  EXPECT_THROW(infer_shapes(net), Error);
  net = Desk(InputDomain::kFrequency);
  net.layers[0].stride = 4;
  EXPECT_THROW(infer_shapes(net), Error);
}

}  // namespace
}  // namespace freqdet
