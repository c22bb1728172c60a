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

// NetworkWeights on disk: a JSON manifest describing layers and heads, and a
// flat little-endian float32 blob. Each kernel in the manifest references its
// weights and bias by byte offset and byte length into the blob.

#ifndef FREQDET_WEIGHTS_IO_HPP_
#define FREQDET_WEIGHTS_IO_HPP_

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "freqdet/error.hpp"
#include "freqdet/freq_frontend.hpp"
#include "freqdet/tensor_assembly.hpp"

namespace freqdet {

struct SerializedWeights {
  nlohmann::json manifest;
  std::vector<std::uint8_t> blob;
};

namespace detail {

class BlobWriter {
 public:
  template <typename T>
  nlohmann::json append(const std::vector<T>& values) {
    const std::size_t offset = bytes_.size();
    for (T v : values) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
      for (int s = 0; s < 32; s += 8) {
        bytes_.push_back(static_cast<std::uint8_t>(bits >> s));
      }
    }
    return {{"offset", offset}, {"length", bytes_.size() - offset}};
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

template <typename T>
nlohmann::json KernelToJson(const Kernel<T>& k, BlobWriter& blob) {
  return {{"out_channels", k.out_channels},
          {"in_channels", k.in_channels},
          {"kernel_h", k.kernel_h},
          {"kernel_w", k.kernel_w},
          {"weights", blob.append(k.weights)},
          {"bias", blob.append(k.bias)}};
}

template <typename T>
std::vector<T> ReadBlobRange(const nlohmann::json& ref,
                             std::span<const std::uint8_t> blob,
                             std::size_t expected_count,
                             const std::string& where) {
  const std::size_t offset = ref.at("offset").get<std::size_t>();
  const std::size_t length = ref.at("length").get<std::size_t>();
  if (length != expected_count * 4) {
    throw Error(ErrorKind::kFormat, where + ": expected " +
                                        std::to_string(expected_count * 4) +
                                        " bytes, manifest says " +
                                        std::to_string(length));
  }
  if (offset > blob.size() || length > blob.size() - offset) {
    throw Error(ErrorKind::kFormat, where + ": range exceeds the weight blob");
  }
  std::vector<T> out(expected_count);
  const std::uint8_t* p = blob.data() + offset;
  for (std::size_t i = 0; i < expected_count; ++i, p += 4) {
    const std::uint32_t bits = std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 |
                               std::uint32_t{p[2]} << 16 |
                               std::uint32_t{p[3]} << 24;
    const float f = std::bit_cast<float>(bits);
    if (!std::isfinite(f)) {
      throw Error(ErrorKind::kFormat, where + ": non-finite weight");
    }
    out[i] = static_cast<T>(f);
  }
  return out;
}

template <typename T>
Kernel<T> KernelFromJson(const nlohmann::json& j,
                         std::span<const std::uint8_t> blob,
                         const std::string& where) {
  Kernel<T> k(j.at("out_channels").get<std::size_t>(),
              j.at("in_channels").get<std::size_t>(),
              j.at("kernel_h").get<std::size_t>(),
              j.at("kernel_w").get<std::size_t>());
  k.weights = ReadBlobRange<T>(j.at("weights"), blob, k.weights.size(),
                               where + " weights");
  k.bias = ReadBlobRange<T>(j.at("bias"), blob, k.bias.size(), where + " bias");
  return k;
}

}  // namespace detail

template <typename T>
SerializedWeights serialize_weights(const NetworkWeights<T>& net) {
  detail::BlobWriter blob;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers) {
    if (l.kind == LayerKind::kMaxPool) {
      layers.push_back(
          {{"type", "max_pool"}, {"size", l.pool_size}, {"stride", l.stride}});
    } else {
      layers.push_back({{"type", "conv"},
                        {"stride", l.stride},
                        {"padding", l.padding},
                        {"relu", l.relu},
                        {"kernel", detail::KernelToJson(l.kernel, blob)}});
    }
  }
  nlohmann::json heads = nlohmann::json::array();
  for (const auto& h : net.heads) {
    heads.push_back(
        {{"source_layer", h.source_layer},
         {"scales", h.anchors.scales},
         {"aspect_ratios", h.anchors.aspect_ratios},
         {"next_scale", h.anchors.next_scale ? nlohmann::json(*h.anchors.next_scale)
                                             : nlohmann::json()},
         {"classification", detail::KernelToJson(h.classification, blob)},
         {"localization", detail::KernelToJson(h.localization, blob)}});
  }
  SerializedWeights out;
  out.manifest = {
      {"format", "freqdet-weights"},
      {"version", 1},
      {"domain", net.domain == InputDomain::kFrequency ? "frequency" : "pixel"},
      {"input_height", net.input_height},
      {"input_width", net.input_width},
      {"num_classes", net.num_classes},
      {"variances", {net.variances.center, net.variances.size}},
      {"layers", layers},
      {"heads", heads}};
  out.blob = blob.take();
  return out;
}

template <typename T>
NetworkWeights<T> deserialize_weights(const nlohmann::json& m,
                                      std::span<const std::uint8_t> blob) {
  NetworkWeights<T> net;
  try {
    if (m.value("format", std::string()) != "freqdet-weights") {
      throw Error(ErrorKind::kFormat, "not a freqdet weights manifest");
    }
    const std::string domain = m.at("domain").get<std::string>();
    if (domain == "frequency") {
      net.domain = InputDomain::kFrequency;
    } else if (domain == "pixel") {
      net.domain = InputDomain::kPixel;
    } else {
      throw Error(ErrorKind::kFormat, "unknown domain '" + domain + "'");
    }
    net.input_height = m.at("input_height").get<std::size_t>();
    net.input_width = m.at("input_width").get<std::size_t>();
    net.num_classes = m.at("num_classes").get<std::size_t>();
    if (m.contains("variances")) {
      net.variances.center = m["variances"].at(0).get<double>();
      net.variances.size = m["variances"].at(1).get<double>();
    }
    const auto& layers = m.at("layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      const std::string where = "layer " + std::to_string(i);
      const std::string type = l.at("type").get<std::string>();
      if (type == "max_pool") {
        net.layers.push_back(Layer<T>::MaxPool(l.at("size").get<std::size_t>(),
                                               l.at("stride").get<std::size_t>()));
      } else if (type == "conv") {
        net.layers.push_back(Layer<T>::Conv(
            detail::KernelFromJson<T>(l.at("kernel"), blob, where),
            l.at("stride").get<std::size_t>(), l.at("padding").get<std::size_t>(),
            l.value("relu", true)));
      } else {
        throw Error(ErrorKind::kFormat, where + ": unknown type '" + type + "'");
      }
    }
    const auto& heads = m.at("heads");
    for (std::size_t i = 0; i < heads.size(); ++i) {
      const auto& h = heads[i];
      const std::string where = "head " + std::to_string(i);
      DetectionHead<T> head;
      head.source_layer = h.at("source_layer").get<std::size_t>();
      head.anchors.scales = h.at("scales").get<std::vector<double>>();
      head.anchors.aspect_ratios = h.at("aspect_ratios").get<std::vector<double>>();
      if (h.contains("next_scale") && !h["next_scale"].is_null()) {
        head.anchors.next_scale = h["next_scale"].get<double>();
      }
      head.classification = detail::KernelFromJson<T>(
          h.at("classification"), blob, where + " classification");
      head.localization = detail::KernelFromJson<T>(
          h.at("localization"), blob, where + " localization");
      net.heads.push_back(std::move(head));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("weights manifest: ") + e.what());
  }
  infer_shapes(net);
  return net;
}

// Blob path defaults to the manifest path with extension ".bin"; the
// manifest stores it relative to its own directory.
template <typename T>
void save_weights(const std::string& manifest_path, const NetworkWeights<T>& net) {
  namespace fs = std::filesystem;
  SerializedWeights s = serialize_weights(net);
  fs::path blob_path = fs::path(manifest_path).replace_extension(".bin");
  s.manifest["blob"] = blob_path.filename().string();
  WriteFileBytes(blob_path.string(), s.blob);
  const std::string text = s.manifest.dump(2);
  WriteFileBytes(manifest_path,
                 std::span(reinterpret_cast<const std::uint8_t*>(text.data()),
                           text.size()));
}

template <typename T>
NetworkWeights<T> load_weights(const std::string& manifest_path) {
  namespace fs = std::filesystem;
  const auto text = ReadFileBytes(manifest_path);
  nlohmann::json m = nlohmann::json::parse(text.begin(), text.end(), nullptr,
                                           /*allow_exceptions=*/false);
  if (m.is_discarded()) {
    throw Error(ErrorKind::kFormat, manifest_path + ": invalid JSON");
  }
  if (!m.contains("blob") || !m["blob"].is_string()) {
    throw Error(ErrorKind::kFormat, manifest_path + ": missing blob path");
  }
  const fs::path blob_path =
      fs::path(manifest_path).parent_path() / m["blob"].get<std::string>();
  return deserialize_weights<T>(m, ReadFileBytes(blob_path.string()));
}

}  // namespace freqdet

#endif  // FREQDET_WEIGHTS_IO_HPP_
