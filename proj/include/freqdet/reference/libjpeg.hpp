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

// Thin adapter over the system libjpeg, used as an independent encoder for
// fixtures and as the reference decoder in conformance checks. Not part of
// the core library; link freqdet::reference to use it.

#ifndef FREQDET_REFERENCE_LIBJPEG_HPP_
#define FREQDET_REFERENCE_LIBJPEG_HPP_

#include <csetjmp>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include <jpeglib.h>

#include "freqdet/dct_core.hpp"
#include "freqdet/error.hpp"

namespace freqdet::reference {

struct EncodeOptions {
  int quality = 85;
  // Per component (h, v) sampling factors; size 1 for grayscale input.
  std::vector<std::pair<int, int>> sampling = {{1, 1}, {1, 1}, {1, 1}};
  unsigned restart_interval = 0;  // MCUs, 0 = none
  bool optimize_coding = false;
  bool progressive = false;
  bool arithmetic = false;
};

inline EncodeOptions Options444(int quality = 85) {
  EncodeOptions o;
  o.quality = quality;
  return o;
}

inline EncodeOptions Options420(int quality = 85) {
  EncodeOptions o;
  o.quality = quality;
  o.sampling = {{2, 2}, {1, 1}, {1, 1}};
  return o;
}

inline EncodeOptions OptionsGray(int quality = 85) {
  EncodeOptions o;
  o.quality = quality;
  o.sampling = {{1, 1}};
  return o;
}

namespace detail {

struct ErrorManager {
  jpeg_error_mgr pub;
  std::jmp_buf jump;
  char message[JMSG_LENGTH_MAX];
};

extern "C" inline void OnLibjpegError(j_common_ptr cinfo) {
  auto* err = reinterpret_cast<ErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->message);
  std::longjmp(err->jump, 1);
}

extern "C" inline void OnLibjpegMessage(j_common_ptr, int) {}

inline void Install(ErrorManager& err, jpeg_error_mgr** slot) {
  *slot = jpeg_std_error(&err.pub);
  err.pub.error_exit = OnLibjpegError;
  err.pub.emit_message = OnLibjpegMessage;
  err.message[0] = '\0';
}

}  // namespace detail

// Encodes interleaved 8-bit RGB (channels == 3) or grayscale samples.
inline std::vector<std::uint8_t> encode(const Image8& img,
                                        const EncodeOptions& opts = {}) {
  if ((img.channels != 1 && img.channels != 3) ||
      opts.sampling.size() != img.channels) {
    throw Error(ErrorKind::kInvalidArgument, "sampling factors must match channels");
  }
  jpeg_compress_struct cinfo;
  detail::ErrorManager err;
  detail::Install(err, &cinfo.err);
  unsigned char* buffer = nullptr;
  unsigned long size = 0;
  std::vector<std::uint8_t> out;
  if (setjmp(err.jump)) {
    jpeg_destroy_compress(&cinfo);
    std::free(buffer);
    throw Error(ErrorKind::kCorruptData, std::string("libjpeg encode: ") + err.message);
  }
  jpeg_create_compress(&cinfo);
  jpeg_mem_dest(&cinfo, &buffer, &size);
  cinfo.image_width = static_cast<JDIMENSION>(img.width);
  cinfo.image_height = static_cast<JDIMENSION>(img.height);
  cinfo.input_components = static_cast<int>(img.channels);
  cinfo.in_color_space = img.channels == 3 ? JCS_RGB : JCS_GRAYSCALE;
  jpeg_set_defaults(&cinfo);
  jpeg_set_quality(&cinfo, opts.quality, TRUE);
  for (std::size_t c = 0; c < img.channels; ++c) {
    cinfo.comp_info[c].h_samp_factor = opts.sampling[c].first;
    cinfo.comp_info[c].v_samp_factor = opts.sampling[c].second;
  }
  cinfo.restart_interval = opts.restart_interval;
  cinfo.optimize_coding = opts.optimize_coding ? TRUE : FALSE;
  cinfo.arith_code = opts.arithmetic ? TRUE : FALSE;
  if (opts.progressive) jpeg_simple_progression(&cinfo);
  jpeg_start_compress(&cinfo, TRUE);
  const std::size_t stride = img.width * img.channels;
  while (cinfo.next_scanline < cinfo.image_height) {
    JSAMPROW row = const_cast<JSAMPROW>(img.data.data() + cinfo.next_scanline * stride);
    jpeg_write_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_compress(&cinfo);
  jpeg_destroy_compress(&cinfo);
  out.assign(buffer, buffer + size);
  std::free(buffer);
  return out;
}

enum class OutputSpace { kRgb, kYCbCr, kGray };

// Float IDCT and non-fancy (replicating) chroma upsampling.
inline Image8 decode(std::span<const std::uint8_t> bytes,
                     OutputSpace space = OutputSpace::kRgb) {
  jpeg_decompress_struct cinfo;
  detail::ErrorManager err;
  detail::Install(err, &cinfo.err);
  Image8 img;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorKind::kCorruptData, std::string("libjpeg decode: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.dct_method = JDCT_FLOAT;
  cinfo.do_fancy_upsampling = FALSE;
  cinfo.out_color_space = space == OutputSpace::kRgb     ? JCS_RGB
                          : space == OutputSpace::kYCbCr ? JCS_YCbCr
                                                         : JCS_GRAYSCALE;
  if (cinfo.num_components == 1 && space == OutputSpace::kYCbCr) {
    cinfo.out_color_space = JCS_GRAYSCALE;
  }
  jpeg_start_decompress(&cinfo);
  img.width = cinfo.output_width;
  img.height = cinfo.output_height;
  img.channels = static_cast<std::size_t>(cinfo.output_components);
  img.data.resize(img.width * img.height * img.channels);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row = img.data.data() + cinfo.output_scanline * img.width * img.channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return img;
}

// Quantized coefficients in natural order, one grid per component, cropped
// to ceil(component size / 8) blocks.
struct CoefficientDump {
  struct Component {
    int id = 0;
    int h_sampling = 1;
    int v_sampling = 1;
    std::size_t block_rows = 0;
    std::size_t block_cols = 0;
    std::vector<std::int16_t> coefficients;  // [row][col][64] natural order
    std::uint16_t quant[64] = {};               // natural order

    const std::int16_t* block(std::size_t r, std::size_t c) const {
      return coefficients.data() + (r * block_cols + c) * 64;
    }
  };
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<Component> components;
};

inline CoefficientDump read_coefficients(std::span<const std::uint8_t> bytes) {
  jpeg_decompress_struct cinfo;
  detail::ErrorManager err;
  detail::Install(err, &cinfo.err);
  CoefficientDump dump;
  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    throw Error(ErrorKind::kCorruptData, std::string("libjpeg coefficients: ") + err.message);
  }
  jpeg_create_decompress(&cinfo);
  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  jvirt_barray_ptr* arrays = jpeg_read_coefficients(&cinfo);
  dump.width = cinfo.image_width;
  dump.height = cinfo.image_height;
  dump.components.resize(static_cast<std::size_t>(cinfo.num_components));
  for (int ci = 0; ci < cinfo.num_components; ++ci) {
    const jpeg_component_info& comp = cinfo.comp_info[ci];
    auto& out = dump.components[static_cast<std::size_t>(ci)];
    out.id = comp.component_id;
    out.h_sampling = comp.h_samp_factor;
    out.v_sampling = comp.v_samp_factor;
    const std::size_t comp_w =
        (cinfo.image_width * static_cast<std::size_t>(comp.h_samp_factor) +
         static_cast<std::size_t>(cinfo.max_h_samp_factor) - 1) /
        static_cast<std::size_t>(cinfo.max_h_samp_factor);
    const std::size_t comp_h =
        (cinfo.image_height * static_cast<std::size_t>(comp.v_samp_factor) +
         static_cast<std::size_t>(cinfo.max_v_samp_factor) - 1) /
        static_cast<std::size_t>(cinfo.max_v_samp_factor);
    out.block_cols = (comp_w + 7) / 8;
    out.block_rows = (comp_h + 7) / 8;
    out.coefficients.resize(out.block_rows * out.block_cols * 64);
    for (int k = 0; k < 64; ++k) out.quant[k] = comp.quant_table->quantval[k];
    for (std::size_t r = 0; r < out.block_rows; ++r) {
      JBLOCKARRAY row = (*cinfo.mem->access_virt_barray)(
          reinterpret_cast<j_common_ptr>(&cinfo), arrays[ci],
          static_cast<JDIMENSION>(r), 1, FALSE);
      for (std::size_t c = 0; c < out.block_cols; ++c) {
        for (int k = 0; k < 64; ++k) {
          out.coefficients[(r * out.block_cols + c) * 64 + static_cast<std::size_t>(k)] =
              row[0][c][k];
        }
      }
    }
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return dump;
}

}  // namespace freqdet::reference

#endif  // FREQDET_REFERENCE_LIBJPEG_HPP_
