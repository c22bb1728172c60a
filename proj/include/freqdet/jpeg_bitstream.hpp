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

// Baseline JPEG (ITU-T T.81 sequential Huffman, 8-bit) parsing and entropy
// decoding down to quantized coefficient blocks. Nothing here dequantizes or
// transforms; the output is what sits between the entropy decoder and the
// dequantizer.

#ifndef FREQDET_JPEG_BITSTREAM_HPP_
#define FREQDET_JPEG_BITSTREAM_HPP_

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "freqdet/block.hpp"
#include "freqdet/error.hpp"

namespace freqdet {

namespace marker {
inline constexpr std::uint8_t kSOF0 = 0xC0;
inline constexpr std::uint8_t kSOF1 = 0xC1;
inline constexpr std::uint8_t kSOF2 = 0xC2;
inline constexpr std::uint8_t kDHT = 0xC4;
inline constexpr std::uint8_t kDAC = 0xCC;
inline constexpr std::uint8_t kRST0 = 0xD0;
inline constexpr std::uint8_t kRST7 = 0xD7;
inline constexpr std::uint8_t kSOI = 0xD8;
inline constexpr std::uint8_t kEOI = 0xD9;
inline constexpr std::uint8_t kSOS = 0xDA;
inline constexpr std::uint8_t kDQT = 0xDB;
inline constexpr std::uint8_t kDNL = 0xDC;
inline constexpr std::uint8_t kDRI = 0xDD;
inline constexpr std::uint8_t kAPP0 = 0xE0;
inline constexpr std::uint8_t kAPP15 = 0xEF;
inline constexpr std::uint8_t kCOM = 0xFE;
inline constexpr std::uint8_t kTEM = 0x01;
}  // namespace marker

inline std::string MarkerName(std::uint8_t code);

struct QuantTable {
  std::uint8_t id = 0;
  // As stored in DQT, i.e. zigzag order.
  std::array<std::uint16_t, kBlockSize> zigzag{};

  std::array<std::uint16_t, kBlockSize> natural() const {
    std::array<std::uint16_t, kBlockSize> out{};
    for (std::size_t k = 0; k < kBlockSize; ++k) {
      out[kZigzagToNatural[k]] = zigzag[k];
    }
    return out;
  }
};

enum class HuffmanClass : std::uint8_t { kDc = 0, kAc = 1 };

struct HuffmanTableSpec {
  HuffmanClass table_class = HuffmanClass::kDc;
  std::uint8_t id = 0;
  // counts[i] = number of codes of length i + 1.
  std::array<std::uint8_t, 16> counts{};
  std::vector<std::uint8_t> symbols;
};

struct FrameComponent {
  std::uint8_t id = 0;
  std::uint8_t h_sampling = 1;
  std::uint8_t v_sampling = 1;
  std::uint8_t quant_table_id = 0;
};

struct FrameHeader {
  std::uint8_t sof_marker = marker::kSOF0;
  std::uint8_t precision = 8;
  std::uint16_t height = 0;
  std::uint16_t width = 0;
  std::vector<FrameComponent> components;

  std::uint8_t max_h() const {
    std::uint8_t m = 1;
    for (const auto& c : components) m = std::max(m, c.h_sampling);
    return m;
  }
  std::uint8_t max_v() const {
    std::uint8_t m = 1;
    for (const auto& c : components) m = std::max(m, c.v_sampling);
    return m;
  }
  std::optional<std::size_t> index_of(std::uint8_t component_id) const {
    for (std::size_t i = 0; i < components.size(); ++i) {
      if (components[i].id == component_id) return i;
    }
    return std::nullopt;
  }
};

struct ScanComponent {
  std::uint8_t component_id = 0;
  std::uint8_t dc_table_id = 0;
  std::uint8_t ac_table_id = 0;
};

struct ScanHeader {
  std::vector<ScanComponent> components;
  std::uint8_t spectral_start = 0;
  std::uint8_t spectral_end = 63;
  std::uint8_t approx_high = 0;
  std::uint8_t approx_low = 0;
  std::uint16_t restart_interval = 0;
  // Huffman tables in force when the scan started, parallel to components.
  std::vector<HuffmanTableSpec> dc_tables;
  std::vector<HuffmanTableSpec> ac_tables;
  std::size_t header_offset = 0;
  // Entropy-coded bytes are [data_begin, data_end), RST markers included.
  std::size_t data_begin = 0;
  std::size_t data_end = 0;
};

struct MarkerRecord {
  std::uint8_t code = 0;
  std::size_t offset = 0;
  std::size_t length = 0;  // segment length field, 0 for standalone markers
};

struct JpegStructure {
  FrameHeader frame;
  // Tables as in force at the first scan.
  std::map<std::uint8_t, QuantTable> quant_tables;
  // Final state of every Huffman table slot, keyed by (class, id).
  std::map<std::pair<HuffmanClass, std::uint8_t>, HuffmanTableSpec>
      huffman_tables;
  std::uint16_t restart_interval = 0;
  std::vector<ScanHeader> scans;
  std::vector<MarkerRecord> markers;
  bool has_eoi = false;

  const QuantTable& quant_table_for(std::size_t component_index) const {
    const auto id = frame.components.at(component_index).quant_table_id;
    auto it = quant_tables.find(id);
    if (it == quant_tables.end()) {
      throw Error(ErrorKind::kMissingTable,
                  "quantization table " + std::to_string(id) + " not defined");
    }
    return it->second;
  }
};

// Sampled size and block layout of one frame component.
struct ComponentGeometry {
  std::size_t width = 0;   // samples, ceil(X * h / h_max)
  std::size_t height = 0;  // samples, ceil(Y * v / v_max)
  std::size_t block_cols = 0;
  std::size_t block_rows = 0;
  // Blocks covered by interleaved MCUs (>= block_cols / block_rows).
  std::size_t padded_cols = 0;
  std::size_t padded_rows = 0;
};

inline std::size_t CeilDiv(std::size_t a, std::size_t b) {
  return (a + b - 1) / b;
}

inline ComponentGeometry component_geometry(const FrameHeader& frame,
                                            std::size_t component_index) {
  const auto& c = frame.components.at(component_index);
  const std::size_t hmax = frame.max_h();
  const std::size_t vmax = frame.max_v();
  ComponentGeometry g;
  g.width = CeilDiv(std::size_t{frame.width} * c.h_sampling, hmax);
  g.height = CeilDiv(std::size_t{frame.height} * c.v_sampling, vmax);
  g.block_cols = CeilDiv(g.width, kBlockSide);
  g.block_rows = CeilDiv(g.height, kBlockSide);
  const std::size_t mcus_x = CeilDiv(frame.width, kBlockSide * hmax);
  const std::size_t mcus_y = CeilDiv(frame.height, kBlockSide * vmax);
  g.padded_cols = std::max(g.block_cols, mcus_x * c.h_sampling);
  g.padded_rows = std::max(g.block_rows, mcus_y * c.v_sampling);
  return g;
}

// ---------------------------------------------------------------------------
// Bit reader over entropy-coded data.

// Reads MSB-first bits, removing 0xFF00 stuffing. Stops supplying bits at
// any other marker; consuming past that point is a HuffmanOverrun. Peeks past
// the end are padded with 1-bits, as an encoder pads the final byte.
class BitReader {
 public:
  BitReader(std::span<const std::uint8_t> bytes, std::size_t begin,
            std::size_t end)
      : bytes_(bytes), pos_(begin), end_(std::min(end, bytes.size())) {}

  explicit BitReader(std::span<const std::uint8_t> bytes)
      : BitReader(bytes, 0, bytes.size()) {}

  // Next `count` bits (count <= 16) without consuming them.
  std::uint32_t peek(unsigned count) {
    if (bits_ < count) Fill();
    if (bits_ >= count) {
      return static_cast<std::uint32_t>(acc_ >> (bits_ - count)) &
             ((1u << count) - 1);
    }
    const unsigned missing = count - bits_;
    const std::uint32_t have =
        bits_ == 0 ? 0u
                   : static_cast<std::uint32_t>(acc_) & ((1u << bits_) - 1);
    return (have << missing) | ((1u << missing) - 1);
  }

  void skip(unsigned count) {
    if (bits_ < count) Fill();
    if (bits_ < count) {
      throw Error(ErrorKind::kHuffmanOverrun,
                  "entropy-coded data exhausted mid-symbol", pos_);
    }
    bits_ -= count;
  }

  std::uint32_t read(unsigned count) {
    if (count == 0) return 0;
    const std::uint32_t v = peek(count);
    skip(count);
    return v;
  }

  // Bits still available before the next marker (or end of data).
  std::size_t available_bits() {
    Fill();
    return bits_;
  }

  // Drops the partial byte and consumes the expected RSTn marker.
  void restart(unsigned expected_index) {
    acc_ = 0;
    bits_ = 0;
    marker_hit_ = false;
    std::size_t p = pos_;
    while (p + 1 < end_ && bytes_[p] == 0xFF && bytes_[p + 1] == 0xFF) ++p;
    const std::uint8_t want =
        static_cast<std::uint8_t>(marker::kRST0 + (expected_index & 7));
    if (p + 1 >= end_ || bytes_[p] != 0xFF || bytes_[p + 1] != want) {
      std::string found = "end of data";
      if (p + 1 < end_ && bytes_[p] == 0xFF) {
        found = MarkerName(bytes_[p + 1]);
      } else if (p < end_) {
        found = "entropy data";
      }
      throw Error(ErrorKind::kBadRestartMarker,
                  "expected " + MarkerName(want) + ", found " + found, p);
    }
    pos_ = p + 2;
  }

  std::size_t position() const { return pos_; }

 private:
  void Fill() {
    while (bits_ <= 56 && !marker_hit_ && pos_ < end_) {
      std::uint8_t byte = bytes_[pos_];
      if (byte == 0xFF) {
        if (pos_ + 1 < end_ && bytes_[pos_ + 1] == 0x00) {
          pos_ += 2;
        } else {
          marker_hit_ = true;
          break;
        }
      } else {
        ++pos_;
      }
      acc_ = (acc_ << 8) | byte;
      bits_ += 8;
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
  std::size_t end_;
  std::uint64_t acc_ = 0;
  unsigned bits_ = 0;
  bool marker_hit_ = false;
};

// ---------------------------------------------------------------------------
// Huffman decoding.

class HuffmanDecoder {
 public:
  static constexpr unsigned kLookupBits = 9;

  explicit HuffmanDecoder(const HuffmanTableSpec& spec) {
    std::size_t total = 0;
    for (auto c : spec.counts) total += c;
    if (total > 256) {
      throw Error(ErrorKind::kInvalidCodeCounts,
                  "table declares " + std::to_string(total) +
                      " symbols (max 256)");
    }
    if (total != spec.symbols.size()) {
      throw Error(ErrorKind::kInvalidCodeCounts,
                  "table declares " + std::to_string(total) + " codes but " +
                      std::to_string(spec.symbols.size()) + " symbols");
    }
    symbols_ = spec.symbols;
    lookup_.fill(0);
    // Canonical code assignment: codes of each length are consecutive, and
    // moving to the next length appends a zero bit.
    std::uint32_t code = 0;
    std::size_t k = 0;
    for (unsigned len = 1; len <= 16; ++len) {
      const unsigned count = spec.counts[len - 1];
      value_offset_[len] = static_cast<int>(k) - static_cast<int>(code);
      if (code + count > (1u << len)) {
        throw Error(ErrorKind::kInvalidCodeCounts,
                    "code tree over-subscribed at length " +
                        std::to_string(len));
      }
      for (unsigned i = 0; i < count; ++i, ++code, ++k) {
        if (len <= kLookupBits) {
          const unsigned shift = kLookupBits - len;
          const std::uint32_t first = code << shift;
          for (std::uint32_t fill = 0; fill < (1u << shift); ++fill) {
            lookup_[first | fill] = static_cast<std::uint16_t>(
                (len << 8) | symbols_[k]);
          }
        }
      }
      max_code_[len] = count == 0 ? -1 : static_cast<int>(code) - 1;
      code <<= 1;
    }
  }

  std::uint8_t decode(BitReader& reader) const {
    const std::uint32_t peek16 = reader.peek(16);
    const std::uint16_t entry = lookup_[peek16 >> (16 - kLookupBits)];
    if (entry != 0) {
      reader.skip(entry >> 8);
      return static_cast<std::uint8_t>(entry & 0xFF);
    }
    for (unsigned len = kLookupBits + 1; len <= 16; ++len) {
      const int code = static_cast<int>(peek16 >> (16 - len));
      if (code <= max_code_[len]) {
        reader.skip(len);
        return symbols_[static_cast<std::size_t>(code + value_offset_[len])];
      }
    }
    // All remaining bits may be padding; report exhaustion in that case.
    if (reader.available_bits() < 16) {
      throw Error(ErrorKind::kHuffmanOverrun,
                  "entropy-coded data exhausted mid-symbol",
                  reader.position());
    }
    throw Error(ErrorKind::kCorruptData, "invalid Huffman code",
                reader.position());
  }

 private:
  // (length << 8) | symbol for codes up to kLookupBits long; 0 = miss.
  std::array<std::uint16_t, 1u << kLookupBits> lookup_{};
  std::array<int, 17> max_code_{};
  std::array<int, 17> value_offset_{};
  std::vector<std::uint8_t> symbols_;
};

inline HuffmanDecoder build_huffman_decoder(const HuffmanTableSpec& spec) {
  return HuffmanDecoder(spec);
}

// ---------------------------------------------------------------------------
// Marker parsing.

inline std::string MarkerName(std::uint8_t code) {
  static constexpr const char* kHex = "0123456789ABCDEF";
  auto hex = [](std::uint8_t c) {
    return std::string{"0x"} + kHex[c >> 4] + kHex[c & 15];
  };
  switch (code) {
    case marker::kSOI: return "SOI";
    case marker::kEOI: return "EOI";
    case marker::kSOS: return "SOS";
    case marker::kDQT: return "DQT";
    case marker::kDHT: return "DHT";
    case marker::kDRI: return "DRI";
    case marker::kDNL: return "DNL";
    case marker::kDAC: return "DAC";
    case marker::kCOM: return "COM";
    case marker::kTEM: return "TEM";
    default: break;
  }
  if (code >= marker::kRST0 && code <= marker::kRST7) {
    return "RST" + std::to_string(code - marker::kRST0);
  }
  if (code >= marker::kAPP0 && code <= marker::kAPP15) {
    return "APP" + std::to_string(code - marker::kAPP0);
  }
  if (code >= 0xC0 && code <= 0xCF) {
    return "SOF" + std::to_string(code - 0xC0);
  }
  return "marker " + hex(code);
}

namespace detail {

class SegmentReader {
 public:
  SegmentReader(std::span<const std::uint8_t> bytes, std::size_t begin,
                std::size_t end)
      : bytes_(bytes), pos_(begin), end_(end) {}

  std::uint8_t u8() {
    if (pos_ >= end_) {
      throw Error(ErrorKind::kTruncatedSegment, "segment body too short",
                  pos_);
    }
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    const std::uint16_t hi = u8();
    return static_cast<std::uint16_t>((hi << 8) | u8());
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return end_ - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_;
  std::size_t end_;
};

inline const char* UnsupportedSofDescription(std::uint8_t code) {
  switch (code) {
    case 0xC2: return "progressive DCT (SOF2)";
    case 0xC3: return "lossless (SOF3)";
    case 0xC5: return "differential sequential (SOF5)";
    case 0xC6: return "differential progressive (SOF6)";
    case 0xC7: return "differential lossless (SOF7)";
    case 0xC9: return "arithmetic sequential (SOF9)";
    case 0xCA: return "arithmetic progressive (SOF10)";
    case 0xCB: return "arithmetic lossless (SOF11)";
    case 0xCD: return "arithmetic differential sequential (SOF13)";
    case 0xCE: return "arithmetic differential progressive (SOF14)";
    case 0xCF: return "arithmetic differential lossless (SOF15)";
    default: return "unsupported frame type";
  }
}

inline void ParseFrame(SegmentReader& r, std::uint8_t code,
                       std::size_t offset, JpegStructure& s) {
  FrameHeader f;
  f.sof_marker = code;
  f.precision = r.u8();
  f.height = r.u16();
  f.width = r.u16();
  const std::uint8_t count = r.u8();
  if (f.precision != 8) {
    throw Error(ErrorKind::kUnsupportedMode,
                std::to_string(f.precision) +
                    "-bit sample precision (baseline requires 8)",
                offset);
  }
  if (f.height == 0) {
    throw Error(ErrorKind::kUnsupportedMode,
                "frame height defined by DNL is not supported", offset);
  }
  if (f.width == 0) {
    throw Error(ErrorKind::kCorruptData, "frame width is zero", offset);
  }
  if (count < 1 || count > 3) {
    throw Error(ErrorKind::kUnsupportedMode,
                std::to_string(count) + " components (supported: 1 to 3)",
                offset);
  }
  for (std::uint8_t i = 0; i < count; ++i) {
    FrameComponent c;
    c.id = r.u8();
    const std::uint8_t hv = r.u8();
    c.h_sampling = hv >> 4;
    c.v_sampling = hv & 15;
    c.quant_table_id = r.u8();
    if (c.h_sampling < 1 || c.h_sampling > 2 || c.v_sampling < 1 ||
        c.v_sampling > 2) {
      throw Error(ErrorKind::kUnsupportedMode,
                  "sampling factor " + std::to_string(c.h_sampling) + "x" +
                      std::to_string(c.v_sampling) +
                      " (supported: 1 or 2)",
                  offset);
    }
    if (c.quant_table_id > 3) {
      throw Error(ErrorKind::kCorruptData, "quantization table id > 3",
                  offset);
    }
    if (f.index_of(c.id)) {
      throw Error(ErrorKind::kCorruptData, "duplicate component id", offset);
    }
    f.components.push_back(c);
  }
  s.frame = std::move(f);
}

inline void ParseQuantTables(SegmentReader& r, std::size_t offset,
                             std::map<std::uint8_t, QuantTable>& tables) {
  while (r.remaining() > 0) {
    const std::uint8_t pq_tq = r.u8();
    const std::uint8_t precision = pq_tq >> 4;
    QuantTable t;
    t.id = pq_tq & 15;
    if (precision > 1 || t.id > 3) {
      throw Error(ErrorKind::kCorruptData, "bad DQT table header", offset);
    }
    for (std::size_t k = 0; k < kBlockSize; ++k) {
      t.zigzag[k] = precision == 0 ? r.u8() : r.u16();
      if (t.zigzag[k] == 0) {
        throw Error(ErrorKind::kCorruptData,
                    "quantization table entry is zero", offset);
      }
    }
    tables[t.id] = t;
  }
}

inline void ParseHuffmanTables(SegmentReader& r, std::size_t offset,
                               JpegStructure& s) {
  while (r.remaining() > 0) {
    const std::uint8_t tc_th = r.u8();
    HuffmanTableSpec spec;
    const std::uint8_t tc = tc_th >> 4;
    spec.id = tc_th & 15;
    if (tc > 1 || spec.id > 3) {
      throw Error(ErrorKind::kCorruptData, "bad DHT table header", offset);
    }
    spec.table_class = tc == 0 ? HuffmanClass::kDc : HuffmanClass::kAc;
    std::size_t total = 0;
    for (auto& c : spec.counts) {
      c = r.u8();
      total += c;
    }
    if (total > 256) {
      throw Error(ErrorKind::kInvalidCodeCounts,
                  "DHT declares more than 256 symbols", offset);
    }
    spec.symbols.resize(total);
    for (auto& sym : spec.symbols) sym = r.u8();
    // Validates the code tree.
    (void)HuffmanDecoder(spec);
    s.huffman_tables[{spec.table_class, spec.id}] = std::move(spec);
  }
}

}  // namespace detail

// Walks the marker structure of a baseline JPEG. Entropy-coded segments are
// located but not decoded.
inline JpegStructure parse_stream(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 0xFF || bytes[1] != marker::kSOI) {
    throw Error(ErrorKind::kMissingSOI, "stream does not start with SOI", 0);
  }
  JpegStructure s;
  s.markers.push_back({marker::kSOI, 0, 0});
  bool have_frame = false;
  bool tables_frozen = false;
  std::map<std::uint8_t, QuantTable> quant_tables;
  std::size_t pos = 2;

  while (true) {
    if (pos >= bytes.size()) {
      break;
    }
    if (bytes[pos] != 0xFF) {
      throw Error(ErrorKind::kCorruptData, "expected a marker", pos);
    }
    while (pos < bytes.size() && bytes[pos] == 0xFF) ++pos;  // fill bytes
    if (pos >= bytes.size()) {
      throw Error(ErrorKind::kTruncatedSegment, "stream ends inside a marker",
                  pos);
    }
    const std::size_t marker_offset = pos - 1;
    const std::uint8_t code = bytes[pos++];

    if (code == marker::kEOI) {
      s.markers.push_back({code, marker_offset, 0});
      s.has_eoi = true;
      break;
    }
    if (code == marker::kTEM || (code >= marker::kRST0 && code <= marker::kRST7)) {
      s.markers.push_back({code, marker_offset, 0});
      continue;
    }
    if (code == marker::kSOI) {
      throw Error(ErrorKind::kCorruptData, "unexpected second SOI",
                  marker_offset);
    }
    if (pos + 2 > bytes.size()) {
      throw Error(ErrorKind::kTruncatedSegment,
                  MarkerName(code) + " segment length missing", pos);
    }
    const std::size_t length =
        (std::size_t{bytes[pos]} << 8) | std::size_t{bytes[pos + 1]};
    if (length < 2) {
      throw Error(ErrorKind::kCorruptData,
                  MarkerName(code) + " segment length < 2", pos);
    }
    if (pos + length > bytes.size()) {
      throw Error(ErrorKind::kTruncatedSegment,
                  MarkerName(code) + " declares " + std::to_string(length) +
                      " bytes but only " +
                      std::to_string(bytes.size() - pos) + " remain",
                  pos);
    }
    s.markers.push_back({code, marker_offset, length});
    const std::size_t body = pos + 2;
    const std::size_t next = pos + length;
    detail::SegmentReader r(bytes, body, next);

    if (code == marker::kSOF0 || code == marker::kSOF1) {
      if (have_frame) {
        throw Error(ErrorKind::kCorruptData, "multiple frame headers",
                    marker_offset);
      }
      detail::ParseFrame(r, code, marker_offset, s);
      have_frame = true;
    } else if ((code >= 0xC2 && code <= 0xCF && code != marker::kDHT &&
                code != 0xC8 && code != marker::kDAC)) {
      throw Error(ErrorKind::kUnsupportedMode,
                  detail::UnsupportedSofDescription(code), marker_offset);
    } else if (code == marker::kDAC) {
      throw Error(ErrorKind::kUnsupportedMode, "arithmetic coding (DAC)",
                  marker_offset);
    } else if (code == marker::kDNL || code == 0xDE || code == 0xDF) {
      throw Error(ErrorKind::kUnsupportedMode,
                  MarkerName(code) + " (hierarchical/DNL) not supported",
                  marker_offset);
    } else if (code == marker::kDQT) {
      detail::ParseQuantTables(r, marker_offset, quant_tables);
      if (!tables_frozen) s.quant_tables = quant_tables;
    } else if (code == marker::kDHT) {
      detail::ParseHuffmanTables(r, marker_offset, s);
    } else if (code == marker::kDRI) {
      s.restart_interval = r.u16();
    } else if (code == marker::kSOS) {
      if (!have_frame) {
        throw Error(ErrorKind::kMissingFrame, "SOS before frame header",
                    marker_offset);
      }
      ScanHeader scan;
      scan.header_offset = marker_offset;
      const std::uint8_t ns = r.u8();
      if (ns < 1 || ns > s.frame.components.size()) {
        throw Error(ErrorKind::kCorruptData,
                    "scan component count " + std::to_string(ns),
                    marker_offset);
      }
      std::size_t blocks_per_mcu = 0;
      for (std::uint8_t i = 0; i < ns; ++i) {
        ScanComponent sc;
        sc.component_id = r.u8();
        const std::uint8_t tables = r.u8();
        sc.dc_table_id = tables >> 4;
        sc.ac_table_id = tables & 15;
        const auto idx = s.frame.index_of(sc.component_id);
        if (!idx) {
          throw Error(ErrorKind::kCorruptData,
                      "scan references unknown component " +
                          std::to_string(sc.component_id),
                      marker_offset);
        }
        const auto& fc = s.frame.components[*idx];
        blocks_per_mcu += std::size_t{fc.h_sampling} * fc.v_sampling;
        if (!s.quant_tables.count(fc.quant_table_id)) {
          throw Error(ErrorKind::kMissingTable,
                      "quantization table " +
                          std::to_string(fc.quant_table_id) +
                          " not defined before scan",
                      marker_offset);
        }
        auto dc = s.huffman_tables.find({HuffmanClass::kDc, sc.dc_table_id});
        auto ac = s.huffman_tables.find({HuffmanClass::kAc, sc.ac_table_id});
        if (dc == s.huffman_tables.end() || ac == s.huffman_tables.end()) {
          throw Error(ErrorKind::kMissingTable,
                      "Huffman table for component " +
                          std::to_string(sc.component_id) +
                          " not defined before scan",
                      marker_offset);
        }
        scan.dc_tables.push_back(dc->second);
        scan.ac_tables.push_back(ac->second);
        scan.components.push_back(sc);
      }
      if (ns > 1 && blocks_per_mcu > 10) {
        throw Error(ErrorKind::kCorruptData, "more than 10 blocks per MCU",
                    marker_offset);
      }
      scan.spectral_start = r.u8();
      scan.spectral_end = r.u8();
      const std::uint8_t a = r.u8();
      scan.approx_high = a >> 4;
      scan.approx_low = a & 15;
      if (scan.spectral_start != 0 || scan.spectral_end != 63 ||
          scan.approx_high != 0 || scan.approx_low != 0) {
        throw Error(ErrorKind::kUnsupportedMode,
                    "spectral selection / successive approximation in a "
                    "sequential frame",
                    marker_offset);
      }
      scan.restart_interval = s.restart_interval;
      tables_frozen = true;

      // Locate the end of the entropy-coded segment.
      std::size_t p = next;
      scan.data_begin = p;
      while (p < bytes.size()) {
        if (bytes[p] != 0xFF) {
          ++p;
          continue;
        }
        if (p + 1 >= bytes.size()) {
          ++p;
          break;
        }
        const std::uint8_t m = bytes[p + 1];
        if (m == 0x00 || (m >= marker::kRST0 && m <= marker::kRST7)) {
          p += 2;
        } else if (m == 0xFF) {
          ++p;
        } else {
          break;
        }
      }
      scan.data_end = std::min(p, bytes.size());
      s.scans.push_back(std::move(scan));
      pos = s.scans.back().data_end;
      continue;
    }
    // APPn, COM and anything else with a length: skipped.
    pos = next;
  }

  if (!have_frame) {
    throw Error(ErrorKind::kMissingFrame, "no frame header (SOF) in stream",
                pos);
  }
  if (s.scans.empty()) {
    throw Error(ErrorKind::kMissingFrame, "no scan (SOS) in stream", pos);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Scan decoding.

// Quantized coefficient grid per frame component id.
using QuantizedGrids = std::map<std::uint8_t, BlockGrid<QuantizedBlock>>;

namespace detail {

struct ScanUnit {
  std::size_t frame_index = 0;
  const HuffmanDecoder* dc = nullptr;
  const HuffmanDecoder* ac = nullptr;
  int predictor = 0;
  BlockGrid<QuantizedBlock>* grid = nullptr;
};

inline int Extend(std::uint32_t bits, unsigned size) {
  const int v = static_cast<int>(bits);
  return v < (1 << (size - 1)) ? v - (1 << size) + 1 : v;
}

inline void DecodeBlock(BitReader& reader, ScanUnit& unit,
                        QuantizedBlock& block) {
  const unsigned dc_size = unit.dc->decode(reader);
  if (dc_size > 11) {
    throw Error(ErrorKind::kCorruptData,
                "DC difference category " + std::to_string(dc_size),
                reader.position());
  }
  const int diff = dc_size == 0 ? 0 : Extend(reader.read(dc_size), dc_size);
  unit.predictor += diff;
  if (unit.predictor < std::numeric_limits<std::int16_t>::min() ||
      unit.predictor > std::numeric_limits<std::int16_t>::max()) {
    throw Error(ErrorKind::kCorruptData, "DC coefficient out of 16-bit range",
                reader.position());
  }
  block.values.fill(0);
  block[0] = static_cast<std::int16_t>(unit.predictor);
  for (std::size_t k = 1; k < kBlockSize;) {
    const unsigned rs = unit.ac->decode(reader);
    const unsigned run = rs >> 4;
    const unsigned size = rs & 15;
    if (size == 0) {
      if (run == 15) {  // ZRL
        k += 16;
        continue;
      }
      break;  // EOB
    }
    k += run;
    if (k >= kBlockSize || size > 15) {
      throw Error(ErrorKind::kCorruptData,
                  "AC run exceeds block", reader.position());
    }
    block[kZigzagToNatural[k]] =
        static_cast<std::int16_t>(Extend(reader.read(size), size));
    ++k;
  }
}

}  // namespace detail

// Entropy-decodes every scan of the frame. Grids have
// ceil(height_c / 8) x ceil(width_c / 8) blocks in natural coefficient order
// with absolute DC values.
inline QuantizedGrids decode_scan(const JpegStructure& structure,
                                  std::span<const std::uint8_t> bytes) {
  const FrameHeader& frame = structure.frame;
  const std::size_t ncomp = frame.components.size();
  std::vector<ComponentGeometry> geometry(ncomp);
  std::vector<BlockGrid<QuantizedBlock>> padded(ncomp);
  std::vector<bool> seen(ncomp, false);
  for (std::size_t i = 0; i < ncomp; ++i) {
    geometry[i] = component_geometry(frame, i);
    padded[i] = BlockGrid<QuantizedBlock>(geometry[i].padded_rows,
                                          geometry[i].padded_cols);
  }

  for (const ScanHeader& scan : structure.scans) {
    if (scan.data_end > bytes.size()) {
      throw Error(ErrorKind::kTruncatedSegment,
                  "scan data extends past the buffer", bytes.size());
    }
    std::vector<HuffmanDecoder> decoders;
    decoders.reserve(2 * scan.components.size());
    std::vector<detail::ScanUnit> units(scan.components.size());
    for (std::size_t i = 0; i < scan.components.size(); ++i) {
      decoders.emplace_back(scan.dc_tables[i]);
      decoders.emplace_back(scan.ac_tables[i]);
    }
    for (std::size_t i = 0; i < scan.components.size(); ++i) {
      const auto idx = *frame.index_of(scan.components[i].component_id);
      units[i].frame_index = idx;
      units[i].dc = &decoders[2 * i];
      units[i].ac = &decoders[2 * i + 1];
      units[i].grid = &padded[idx];
      seen[idx] = true;
    }

    BitReader reader(bytes, scan.data_begin, scan.data_end);
    const std::size_t restart = scan.restart_interval;
    unsigned next_rst = 0;
    std::size_t mcus_left = restart;
    auto before_mcu = [&](std::size_t mcu_index) {
      if (restart == 0 || mcu_index == 0) return;
      if (mcus_left == 0) {
        reader.restart(next_rst);
        next_rst = (next_rst + 1) & 7;
        for (auto& u : units) u.predictor = 0;
        mcus_left = restart;
      }
    };

    if (units.size() == 1) {
      // Non-interleaved: MCU is one block, raster over the component's own
      // block grid without MCU padding.
      auto& u = units[0];
      const auto& g = geometry[u.frame_index];
      std::size_t mcu = 0;
      for (std::size_t r = 0; r < g.block_rows; ++r) {
        for (std::size_t c = 0; c < g.block_cols; ++c, ++mcu) {
          before_mcu(mcu);
          detail::DecodeBlock(reader, u, u.grid->at(r, c));
          if (restart) --mcus_left;
        }
      }
    } else {
      const std::size_t mcus_x =
          CeilDiv(frame.width, kBlockSide * frame.max_h());
      const std::size_t mcus_y =
          CeilDiv(frame.height, kBlockSide * frame.max_v());
      std::size_t mcu = 0;
      for (std::size_t my = 0; my < mcus_y; ++my) {
        for (std::size_t mx = 0; mx < mcus_x; ++mx, ++mcu) {
          before_mcu(mcu);
          for (auto& u : units) {
            const auto& fc = frame.components[u.frame_index];
            for (std::size_t by = 0; by < fc.v_sampling; ++by) {
              for (std::size_t bx = 0; bx < fc.h_sampling; ++bx) {
                detail::DecodeBlock(
                    reader, u,
                    u.grid->at(my * fc.v_sampling + by,
                               mx * fc.h_sampling + bx));
              }
            }
          }
          if (restart) --mcus_left;
        }
      }
    }
  }

  QuantizedGrids out;
  for (std::size_t i = 0; i < ncomp; ++i) {
    if (!seen[i]) {
      throw Error(ErrorKind::kCorruptData,
                  "component " + std::to_string(frame.components[i].id) +
                      " is not covered by any scan");
    }
    const auto& g = geometry[i];
    BlockGrid<QuantizedBlock> grid(g.block_rows, g.block_cols);
    for (std::size_t r = 0; r < g.block_rows; ++r) {
      for (std::size_t c = 0; c < g.block_cols; ++c) {
        grid.at(r, c) = padded[i].at(r, c);
      }
    }
    out.emplace(frame.components[i].id, std::move(grid));
  }
  return out;
}

struct DecodedJpeg {
  JpegStructure structure;
  QuantizedGrids grids;
};

inline DecodedJpeg decode_coefficients(std::span<const std::uint8_t> bytes) {
  DecodedJpeg d;
  d.structure = parse_stream(bytes);
  d.grids = decode_scan(d.structure, bytes);
  return d;
}

}  // namespace freqdet

#endif  // FREQDET_JPEG_BITSTREAM_HPP_
