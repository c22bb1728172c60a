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

#ifndef FREQDET_BOX_HPP_
#define FREQDET_BOX_HPP_

#include <algorithm>

namespace freqdet {

// Axis-aligned box by corners.
struct Box {
  double xmin = 0;
  double ymin = 0;
  double xmax = 0;
  double ymax = 0;

  bool valid() const { return xmin < xmax && ymin < ymax; }
  friend bool operator==(const Box&, const Box&) = default;
};

enum class AreaConvention {
  kContinuous,  // area = (xmax - xmin) * (ymax - ymin)
  kLegacyPlusOne,  // pixel-inclusive corners: (xmax - xmin + 1) * (...)
};

inline double BoxArea(const Box& b,
                      AreaConvention c = AreaConvention::kContinuous) {
  const double pad = c == AreaConvention::kLegacyPlusOne ? 1.0 : 0.0;
  return std::max(0.0, b.xmax - b.xmin + pad) *
         std::max(0.0, b.ymax - b.ymin + pad);
}

inline double iou(const Box& a, const Box& b,
                  AreaConvention c = AreaConvention::kContinuous) {
  const double pad = c == AreaConvention::kLegacyPlusOne ? 1.0 : 0.0;
  const double iw =
      std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin) + pad;
  const double ih =
      std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin) + pad;
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = BoxArea(a, c) + BoxArea(b, c) - inter;
  return uni > 0 ? inter / uni : 0.0;
}

}  // namespace freqdet

#endif  // FREQDET_BOX_HPP_
