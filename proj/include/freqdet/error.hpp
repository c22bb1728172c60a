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

#ifndef FREQDET_ERROR_HPP_
#define FREQDET_ERROR_HPP_

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace freqdet {

enum class ErrorKind {
  // Bitstream.
  kMissingSOI,
  kUnsupportedMode,
  kTruncatedSegment,
  kMissingFrame,
  kMissingTable,
  kInvalidCodeCounts,
  kHuffmanOverrun,
  kBadRestartMarker,
  kCorruptData,
  // Array and model plumbing.
  kShapeMismatch,
  kInvalidArgument,
  kEmptyCorpus,
  kNoPositives,
  kFormat,
  kIo,
};

constexpr std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kMissingSOI: return "MissingSOI";
    case ErrorKind::kUnsupportedMode: return "UnsupportedMode";
    case ErrorKind::kTruncatedSegment: return "TruncatedSegment";
    case ErrorKind::kMissingFrame: return "MissingFrame";
    case ErrorKind::kMissingTable: return "MissingTable";
    case ErrorKind::kInvalidCodeCounts: return "InvalidCodeCounts";
    case ErrorKind::kHuffmanOverrun: return "HuffmanOverrun";
    case ErrorKind::kBadRestartMarker: return "BadRestartMarker";
    case ErrorKind::kCorruptData: return "CorruptData";
    case ErrorKind::kShapeMismatch: return "ShapeMismatch";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kEmptyCorpus: return "EmptyCorpus";
    case ErrorKind::kNoPositives: return "NoPositives";
    case ErrorKind::kFormat: return "Format";
    case ErrorKind::kIo: return "Io";
  }
  return "Unknown";
}

// All library failures are reported with this exception. Bitstream errors
// carry the byte offset at which the problem was detected.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message,
        std::optional<std::size_t> offset = std::nullopt)
      : std::runtime_error(Format(kind, message, offset)),
        kind_(kind),
        offset_(offset) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> offset() const noexcept { return offset_; }

 private:
  static std::string Format(ErrorKind kind, const std::string& message,
                            std::optional<std::size_t> offset) {
    std::string out(ErrorKindName(kind));
    out += ": ";
    out += message;
    if (offset) {
      out += " (at byte offset " + std::to_string(*offset) + ")";
    }
    return out;
  }

  ErrorKind kind_;
  std::optional<std::size_t> offset_;
};

}  // namespace freqdet

#endif  // FREQDET_ERROR_HPP_
