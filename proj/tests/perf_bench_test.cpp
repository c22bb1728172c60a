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

#include <filesystem>

#include <gtest/gtest.h>

#include "freqdet/perf_bench.hpp"
#include "freqdet/reference/libjpeg.hpp"
#include "freqdet/weights_io.hpp"
#include "support/fixtures.hpp"

namespace freqdet {
namespace {

template <typename Fn>
ErrorKind KindOf(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::kIo;
}

TEST(EstimateFlops, SingleConvBothConventions) {
  ArchSpec a;
  a.input_h = a.input_w = 10;
  a.input_channels = 1;
  a.add(ConvLayer("c", 3, 1, 1, 1));
  EXPECT_EQ(estimate_flops(a, FlopsConvention::kMultiplyAddAsTwo), 1800u);
  EXPECT_EQ(estimate_flops(a), 900u);
}

TEST(EstimateFlops, DenseAndPoolingAndActivations) {
  ArchSpec a;
  a.input_h = a.input_w = 4;
  a.input_channels = 2;
  a.add(PoolLayer("p", 2, 2));
  a.add(DenseLayer("fc", 10));
  const auto b = flops_breakdown(a);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0].flops, 0u);
  EXPECT_EQ(b[0].output.rows, 2u);
  EXPECT_EQ(b[1].flops, 2u * 2u * 2u * 10u);
}

TEST(EstimateFlops, CeilModePooling) {
  ArchSpec a;
  a.input_h = a.input_w = 75;
  a.add(PoolLayer("p", 2, 2, 0, true));
  EXPECT_EQ(flops_breakdown(a)[0].output.rows, 38u);
  a.layers[0].ceil_mode = false;
  EXPECT_EQ(flops_breakdown(a)[0].output.rows, 37u);
}

TEST(EstimateFlops, Ssd300AndFreqVariant) {
  const double base = double(estimate_flops(ssd300_spec())) / 1e9;
  const double freq = double(estimate_flops(ssd_freq_spec())) / 1e9;
  EXPECT_GE(base, 26.0);
  EXPECT_LE(base, 36.0);
  EXPECT_GE(freq, 11.0);
  EXPECT_LE(freq, 17.0);
  EXPECT_GE(base / freq, 1.9);
  EXPECT_LE(base / freq, 2.5);
  const auto shapes = flops_breakdown(ssd300_spec());
  auto find = [&](const std::string& n) {
    for (const auto& l : shapes) {
      if (l.name == n) return l.output;
    }
    ADD_FAILURE() << n;
    return MapShape{};
  };
  EXPECT_EQ(find("conv4_3").rows, 38u);
  EXPECT_EQ(find("fc7").rows, 19u);
  EXPECT_EQ(find("fc7").channels, 1024u);
  EXPECT_EQ(find("conv9_2").rows, 1u);
}

TEST(EstimateFlops, FreqVariantFeedsConv4At38) {
  const auto shapes = flops_breakdown(ssd_freq_spec());
  EXPECT_EQ(shapes.front().output.rows, 38u);
  EXPECT_EQ(shapes.front().output.channels, 256u);
}

TEST(EstimateFlops, InconsistentSpecThrows) {
  ArchSpec a;
  a.input_h = a.input_w = 4;
  a.add(ConvLayer("big", 7, 4));
  EXPECT_EQ(KindOf([&] { estimate_flops(a); }), ErrorKind::kShapeMismatch);
  ArchSpec b;
  b.input_h = b.input_w = 8;
  ArchLayer c = ConvLayer("c", 3, 4, 1, 1);
  c.in_channels = 5;
  b.add(c);
  EXPECT_EQ(KindOf([&] { estimate_flops(b); }), ErrorKind::kShapeMismatch);
  ArchSpec d;
  d.input_h = d.input_w = 8;
  d.add(From(ConvLayer("c", 3, 4), 3));
  EXPECT_EQ(KindOf([&] { estimate_flops(d); }), ErrorKind::kShapeMismatch);
}

TEST(EstimateFlops, JsonSpecMatchesBuilder) {
  const auto j = nlohmann::json::parse(R"({"name": "tiny", "input": [10, 10, 1],
      "layers": [{"type": "conv", "kernel": 3, "out": 1, "padding": 1}]})");
  const ArchSpec a = arch_from_json(j);
  EXPECT_EQ(a.name, "tiny");
  EXPECT_EQ(estimate_flops(a), 900u);
  EXPECT_EQ(KindOf([] { arch_from_json(nlohmann::json::parse(R"({"input": [1, 1], "layers": [{"type": "fft"}]})")); }),
            ErrorKind::kFormat);
  EXPECT_EQ(KindOf([] { arch_from_json(nlohmann::json::object()); }), ErrorKind::kFormat);
}

TEST(EstimateFlops, NetworkArchMatchesLayers) {
  const auto net = make_desk_network<float>(InputDomain::kFrequency, DeskConfig{}, 1);
  const ArchSpec a = arch_from_network(net);
  // Front-end: 16x16 cells, 64 out, 3*8*8 in.
  EXPECT_EQ(flops_breakdown(a).front().flops, 16u * 16u * 64u * 192u);
  const auto pixel = make_desk_network<float>(InputDomain::kPixel, DeskConfig{}, 1);
  EXPECT_GT(estimate_flops(arch_from_network(pixel)), estimate_flops(a));
}

TEST(BenchDecode, RepetitionsAndModes) {
  std::vector<CorpusItem> corpus;
  for (int i = 0; i < 3; ++i) {
    corpus.push_back({"img" + std::to_string(i),
                      reference::encode(testing::SyntheticImage(32, 32, 3, 90 + i),
                                        reference::Options420(80))});
  }
  const BenchReport r = bench_decode(corpus, DecodeMode::kPartial, 10);
  EXPECT_EQ(r.mode, "decode_partial");
  EXPECT_EQ(r.repetitions, 10u);
  EXPECT_EQ(r.items_per_sec.size(), 10u);
  EXPECT_GT(r.items_per_sec_mean, 0);
  EXPECT_GE(r.items_per_sec_std, 0);
  const BenchReport f = bench_decode(corpus, DecodeMode::kFull, 1, 2);
  EXPECT_EQ(f.mode, "decode_full");
  EXPECT_EQ(f.items_per_sec_std, 0.0);
  EXPECT_EQ(f.workers, 2u);
  const auto j = to_json(f);
  for (const char* key : {"mode", "items_per_sec_mean", "items_per_sec_std", "repetitions",
                          "batch_size", "batch_count", "flops_convention", "env"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
}

TEST(BenchDecode, EmptyCorpusAndBadFile) {
  EXPECT_EQ(KindOf([] { bench_decode({}, DecodeMode::kPartial); }), ErrorKind::kEmptyCorpus);
  std::vector<CorpusItem> corpus = {{"broken.jpg", {0xFF, 0xD8, 0xFF, 0xD9}}};
  try {
    bench_decode(corpus, DecodeMode::kFull, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMissingFrame);
    EXPECT_EQ(std::string(e.what()).rfind("MissingFrame: broken.jpg: ", 0), 0u) << e.what();
  }
}

TEST(BenchForward, ProtocolShape) {
  DeskConfig cfg;
  cfg.input_size = 32;
  cfg.stage_channels = {16, 16, 8};
  cfg.head_levels = 2;
  const auto net = make_desk_network<float>(InputDomain::kFrequency, cfg, 3);
  const BenchReport r = bench_forward(net, 2, 3, 2);
  EXPECT_EQ(r.mode, "forward_freq");
  EXPECT_EQ(r.batch_size, 2u);
  EXPECT_EQ(r.batch_count, 3u);
  EXPECT_EQ(r.repetitions, 2u);
  EXPECT_EQ(KindOf([&] { bench_forward(net, 8, 0, 1); }), ErrorKind::kInvalidArgument);
  EXPECT_EQ(KindOf([&] { bench_forward(net, 8, 1, 0); }), ErrorKind::kInvalidArgument);
  const auto pixel = make_desk_network<float>(InputDomain::kPixel, cfg, 3);
  EXPECT_EQ(bench_forward(pixel, 1, 1, 1).mode, "forward_pixel");
}

TEST(WeightsIo, SerializeRoundTrip) {
  DeskConfig cfg;
  cfg.input_size = 32;
  cfg.stage_channels = {16, 16, 8};
  cfg.head_levels = 2;
  const auto net = make_desk_network<float>(InputDomain::kFrequency, cfg, 4);
  const SerializedWeights s = serialize_weights(net);
  EXPECT_EQ(s.manifest["format"], "freqdet-weights");
  EXPECT_EQ(s.manifest["domain"], "frequency");
  const auto& k0 = s.manifest["layers"][0]["kernel"];
  EXPECT_EQ(k0["weights"]["offset"], 0);
  EXPECT_EQ(k0["weights"]["length"], 64 * 3 * 64 * 4);
  const auto back = deserialize_weights<float>(s.manifest, s.blob);
  ASSERT_EQ(back.layers.size(), net.layers.size());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    EXPECT_EQ(back.layers[i].kernel.weights, net.layers[i].kernel.weights);
    EXPECT_EQ(back.layers[i].kernel.bias, net.layers[i].kernel.bias);
    EXPECT_EQ(back.layers[i].stride, net.layers[i].stride);
  }
  ASSERT_EQ(back.heads.size(), net.heads.size());
  EXPECT_EQ(back.heads[1].localization.weights, net.heads[1].localization.weights);
  EXPECT_EQ(back.heads[0].anchors.next_scale, net.heads[0].anchors.next_scale);
}

TEST(WeightsIo, RejectsCorruptManifest) {
  DeskConfig cfg;
  cfg.input_size = 32;
  cfg.stage_channels = {16, 16, 8};
  cfg.head_levels = 2;
  const auto net = make_desk_network<float>(InputDomain::kPixel, cfg, 5);
  const SerializedWeights s = serialize_weights(net);
  auto short_blob = s.blob;
  short_blob.resize(short_blob.size() - 4);
  EXPECT_EQ(KindOf([&] { deserialize_weights<float>(s.manifest, short_blob); }), ErrorKind::kFormat);
  auto m = s.manifest;
  m["layers"][0]["kernel"]["in_channels"] = 4;
  EXPECT_NE(KindOf([&] { deserialize_weights<float>(m, s.blob); }), ErrorKind::kIo);
  m = s.manifest;
  m["format"] = "other";
  EXPECT_EQ(KindOf([&] { deserialize_weights<float>(m, s.blob); }), ErrorKind::kFormat);
}

TEST(WeightsIo, SaveAndLoadFiles) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "freqdet_weights_test";
  fs::create_directories(dir);
  DeskConfig cfg;
  cfg.input_size = 32;
  cfg.stage_channels = {16, 16, 8};
  cfg.head_levels = 2;
  const auto net = make_desk_network<float>(InputDomain::kFrequency, cfg, 6);
  save_weights((dir / "net.json").string(), net);
  EXPECT_TRUE(fs::exists(dir / "net.bin"));
  const auto back = load_weights<float>((dir / "net.json").string());
  EXPECT_EQ(back.layers[0].kernel.weights, net.layers[0].kernel.weights);
  fs::remove_all(dir);
  EXPECT_EQ(KindOf([&] { load_weights<float>((dir / "net.json").string()); }), ErrorKind::kIo);
}

}  // namespace
}  // namespace freqdet
