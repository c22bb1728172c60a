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

// Synthetic images and the JPEG fixture corpus, encoded by libjpeg.

#ifndef FREQDET_TESTS_SUPPORT_FIXTURES_HPP_
#define FREQDET_TESTS_SUPPORT_FIXTURES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "freqdet/dct_core.hpp"
#include "freqdet/reference/libjpeg.hpp"

namespace freqdet::testing {

// Smooth gradients, a few soft discs and mild noise: compresses like a photo
// rather than like white noise.
inline Image8 SyntheticImage(std::size_t width, std::size_t height,
                             std::size_t channels, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 6.0);
  struct Disc {
    double cx, cy, r, value[3];
  };
  std::vector<Disc> discs(3 + rng() % 4);
  for (auto& d : discs) {
    d.cx = u(rng) * static_cast<double>(width);
    d.cy = u(rng) * static_cast<double>(height);
    d.r = (0.1 + 0.3 * u(rng)) * static_cast<double>(std::max(width, height));
    for (double& v : d.value) v = 255.0 * u(rng);
  }
  double gx[3], gy[3], base[3];
  for (int c = 0; c < 3; ++c) {
    gx[c] = 200.0 * (u(rng) - 0.5);
    gy[c] = 200.0 * (u(rng) - 0.5);
    base[c] = 64.0 + 128.0 * u(rng);
  }
  Image8 img{width, height, channels, {}};
  img.data.resize(width * height * channels);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      const double fx = static_cast<double>(x) / static_cast<double>(std::max<std::size_t>(width, 2) - 1);
      const double fy = static_cast<double>(y) / static_cast<double>(std::max<std::size_t>(height, 2) - 1);
      for (std::size_t c = 0; c < channels; ++c) {
        double v = base[c] + gx[c] * (fx - 0.5) + gy[c] * (fy - 0.5);
        for (const auto& d : discs) {
          const double dist = std::hypot(static_cast<double>(x) - d.cx,
                                         static_cast<double>(y) - d.cy);
          const double w = 1.0 / (1.0 + std::exp((dist - d.r) / 3.0));
          v = v * (1 - w) + d.value[c] * w;
        }
        v += noise(rng);
        img.at(y, x, c) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return img;
}

inline Image8 ConstantImage(std::size_t width, std::size_t height,
                            std::size_t channels, std::uint8_t value) {
  Image8 img{width, height, channels, {}};
  img.data.assign(width * height * channels, value);
  return img;
}

struct Fixture {
  std::string name;
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 3;
  reference::EncodeOptions options;
  std::vector<std::uint8_t> bytes;
};

inline Fixture MakeFixture(std::string name, std::size_t w, std::size_t h,
                           std::size_t channels, reference::EncodeOptions opts,
                           std::uint64_t seed) {
  Fixture f{std::move(name), w, h, channels, opts, {}};
  f.bytes = reference::encode(SyntheticImage(w, h, channels, seed), opts);
  return f;
}

// Baseline conformance corpus: 4:4:4 and 4:2:0 (plus 4:2:2 and grayscale),
// with and without restart intervals, aligned and odd sizes.
inline std::vector<Fixture> ConformanceCorpus() {
  using reference::EncodeOptions;
  std::vector<Fixture> out;
  std::uint64_t seed = 100;
  const struct {
    std::size_t w, h;
  } sizes[] = {{64, 64}, {97, 61}, {128, 96}, {33, 17}, {8, 8}};
  const int qualities[] = {95, 75, 50, 90, 85};
  for (std::size_t i = 0; i < std::size(sizes); ++i) {
    for (bool restart : {false, true}) {
      for (bool sub : {false, true}) {
        EncodeOptions o = sub ? reference::Options420(qualities[i])
                              : reference::Options444(qualities[i]);
        o.restart_interval = restart ? 1 + static_cast<unsigned>(i) : 0;
        o.optimize_coding = (i % 2) == 1;
        out.push_back(MakeFixture(std::string(sub ? "420" : "444") + "_" +
                                      std::to_string(sizes[i].w) + "x" +
                                      std::to_string(sizes[i].h) +
                                      (restart ? "_rst" : ""),
                                  sizes[i].w, sizes[i].h, 3, o, seed++));
      }
    }
  }
  EncodeOptions o422 = reference::Options444(80);
  o422.sampling = {{2, 1}, {1, 1}, {1, 1}};
  out.push_back(MakeFixture("422_77x45", 77, 45, 3, o422, seed++));
  o422.restart_interval = 3;
  out.push_back(MakeFixture("422_64x40_rst", 64, 40, 3, o422, seed++));
  out.push_back(MakeFixture("gray_50x30", 50, 30, 1, reference::OptionsGray(85), seed++));
  EncodeOptions gray_rst = reference::OptionsGray(70);
  gray_rst.restart_interval = 2;
  out.push_back(MakeFixture("gray_64x64_rst", 64, 64, 1, gray_rst, seed++));
  return out;
}

inline std::vector<std::uint8_t> ProgressiveJpeg() {
  auto o = reference::Options444(80);
  o.progressive = true;
  return reference::encode(SyntheticImage(32, 32, 3, 7), o);
}

inline std::vector<std::uint8_t> ArithmeticJpeg() {
  auto o = reference::Options444(80);
  o.arithmetic = true;
  return reference::encode(SyntheticImage(32, 32, 3, 8), o);
}

inline std::size_t FindMarker(const std::vector<std::uint8_t>& bytes, std::uint8_t code) {
  for (std::size_t i = 0; i + 1 < bytes.size(); ++i) {
    if (bytes[i] == 0xFF && bytes[i + 1] == code) return i;
  }
  return bytes.size();
}

// A baseline stream with its SOF precision byte rewritten to 12.
inline std::vector<std::uint8_t> TwelveBitJpeg() {
  auto bytes = reference::encode(SyntheticImage(16, 16, 3, 9), reference::Options444(80));
  bytes[FindMarker(bytes, marker::kSOF0) + 4] = 12;
  return bytes;
}

struct SampleDiff {
  std::size_t samples = 0;
  std::size_t within_one = 0;
  int max_abs = 0;
  double mean_abs = 0;

  double within_fraction() const {
    return samples == 0 ? 1.0 : static_cast<double>(within_one) / static_cast<double>(samples);
  }
};

inline SampleDiff CompareImages(const Image8& a, const Image8& b) {
  SampleDiff d;
  if (a.width != b.width || a.height != b.height || a.channels != b.channels) {
    d.samples = 1;
    d.max_abs = 256;
    return d;
  }
  long long total = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const int e = std::abs(int{a.data[i]} - int{b.data[i]});
    d.max_abs = std::max(d.max_abs, e);
    d.within_one += e <= 1 ? 1 : 0;
    total += e;
  }
  d.samples = a.data.size();
  d.mean_abs = d.samples == 0 ? 0.0 : static_cast<double>(total) / static_cast<double>(d.samples);
  return d;
}

}  // namespace freqdet::testing

#endif  // FREQDET_TESTS_SUPPORT_FIXTURES_HPP_
