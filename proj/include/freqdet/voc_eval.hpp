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

// PASCAL VOC style detection evaluation: greedy matching, 11-point
// interpolated AP, mAP and the per-size matched/unmatched report.

#ifndef FREQDET_VOC_EVAL_HPP_
#define FREQDET_VOC_EVAL_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "freqdet/box.hpp"
#include "freqdet/error.hpp"

namespace freqdet {

struct GroundTruthRecord {
  std::string image_id;
  std::string class_name;
  Box box;  // pixels
  bool difficult = false;
};

struct DetectionRecord {
  std::string image_id;
  std::string class_name;
  double score = 0;
  Box box;  // pixels
};

enum class MatchOutcome { kTruePositive, kFalsePositive, kIgnored };

struct MatchOptions {
  double iou_threshold = 0.5;
  AreaConvention area = AreaConvention::kContinuous;
};

struct MatchResult {
  std::vector<MatchOutcome> detections;  // parallel to the detection input
  std::vector<bool> gt_matched;          // parallel to the ground-truth input
};

// Detections are visited by descending score, ties in input order. A
// detection is a true positive when the best-overlapping still unmatched,
// non-difficult ground truth of the same image and class reaches the IoU
// threshold; that ground truth is then consumed. Otherwise, overlapping a
// difficult ground truth at the threshold makes it ignored; anything else is
// a false positive.
inline MatchResult match_detections(std::span<const DetectionRecord> dets,
                                    std::span<const GroundTruthRecord> gts,
                                    const MatchOptions& opts = {}) {
  MatchResult out;
  out.detections.assign(dets.size(), MatchOutcome::kFalsePositive);
  out.gt_matched.assign(gts.size(), false);

  using Key = std::pair<std::string, std::string>;
  std::map<Key, std::vector<std::size_t>> gt_groups;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    gt_groups[{gts[i].image_id, gts[i].class_name}].push_back(i);
  }
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });

  for (std::size_t d : order) {
    auto it = gt_groups.find({dets[d].image_id, dets[d].class_name});
    if (it == gt_groups.end()) continue;
    double best = -1;
    std::optional<std::size_t> best_gt;
    double best_difficult = -1;
    for (std::size_t g : it->second) {
      const double o = iou(dets[d].box, gts[g].box, opts.area);
      if (gts[g].difficult) {
        best_difficult = std::max(best_difficult, o);
      } else if (!out.gt_matched[g] && o > best) {
        best = o;
        best_gt = g;
      }
    }
    if (best_gt && best >= opts.iou_threshold) {
      out.detections[d] = MatchOutcome::kTruePositive;
      out.gt_matched[*best_gt] = true;
    } else if (best_difficult >= opts.iou_threshold) {
      out.detections[d] = MatchOutcome::kIgnored;
    }
  }
  return out;
}

// Cumulative counts after each ranked (non-ignored) detection.
struct PrecisionRecallCurve {
  std::vector<std::uint32_t> true_positives;
  std::vector<std::uint32_t> false_positives;
  std::vector<double> precision;
  std::vector<double> recall;
  std::uint32_t total_positives = 0;
};

// `ranked` must already be in descending confidence order.
inline PrecisionRecallCurve build_curve(std::span<const MatchOutcome> ranked,
                                        std::uint32_t total_positives) {
  PrecisionRecallCurve c;
  c.total_positives = total_positives;
  std::uint32_t tp = 0, fp = 0;
  for (MatchOutcome m : ranked) {
    if (m == MatchOutcome::kIgnored) continue;
    (m == MatchOutcome::kTruePositive ? tp : fp) += 1;
    c.true_positives.push_back(tp);
    c.false_positives.push_back(fp);
    c.precision.push_back(static_cast<double>(tp) / (tp + fp));
    c.recall.push_back(total_positives == 0
                           ? 0.0
                           : static_cast<double>(tp) / total_positives);
  }
  return c;
}

enum class ApMethod {
  kElevenPoint,  // VOC2007: mean of interpolated precision at r = 0, 0.1, ..., 1
  kContinuous,   // VOC2010+: area under the monotone precision envelope
};

namespace detail {

// Exact sum of fractions, falling back to long double if the common
// denominator would overflow.
class FractionSum {
 public:
  void add(std::uint64_t num, std::uint64_t den) {
    if (den == 0) return;
    approx_ += static_cast<long double>(num) / den;
    if (!exact_) return;
    const __int128 g = Gcd(den_, den);
    const __int128 scale_self = den / g;
    const __int128 scale_other = den_ / g;
    __int128 new_den, a, b, new_num;
    if (__builtin_mul_overflow(den_, scale_self, &new_den) ||
        __builtin_mul_overflow(num_, scale_self, &a) ||
        __builtin_mul_overflow(static_cast<__int128>(num), scale_other, &b) ||
        __builtin_add_overflow(a, b, &new_num)) {
      exact_ = false;
      return;
    }
    const __int128 r = Gcd(new_num, new_den);
    num_ = new_num / r;
    den_ = new_den / r;
  }

  // Correctly rounded sum / divisor when the exact fraction fits a double.
  double divided_by(std::uint64_t divisor) const {
    if (exact_) {
      __int128 den;
      if (!__builtin_mul_overflow(den_, static_cast<__int128>(divisor), &den)) {
        constexpr __int128 kExact = __int128{1} << 53;
        if (num_ < kExact && den < kExact) {
          return static_cast<double>(num_) / static_cast<double>(den);
        }
        return static_cast<double>(static_cast<long double>(num_) /
                                   static_cast<long double>(den));
      }
    }
    return static_cast<double>(approx_ / divisor);
  }

 private:
  static __int128 Gcd(__int128 a, __int128 b) {
    while (b != 0) {
      const __int128 t = a % b;
      a = b;
      b = t;
    }
    return a == 0 ? 1 : a;
  }

  __int128 num_ = 0;
  __int128 den_ = 1;
  long double approx_ = 0;
  bool exact_ = true;
};

}  // namespace detail

// p_interp(r) = max precision over points with recall >= r (0 if none).
// Recall levels are compared exactly in integer arithmetic.
inline double interpolated_ap(const PrecisionRecallCurve& c,
                              ApMethod method = ApMethod::kElevenPoint) {
  if (c.total_positives == 0) {
    throw Error(ErrorKind::kNoPositives, "class has no ground truth");
  }
  const std::size_t n = c.true_positives.size();
  if (method == ApMethod::kContinuous) {
    std::vector<double> mrec{0.0}, mpre{0.0};
    mrec.insert(mrec.end(), c.recall.begin(), c.recall.end());
    mpre.insert(mpre.end(), c.precision.begin(), c.precision.end());
    mrec.push_back(1.0);
    mpre.push_back(0.0);
    for (std::size_t i = mpre.size() - 1; i > 0; --i) {
      mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
    }
    double ap = 0;
    for (std::size_t i = 1; i < mrec.size(); ++i) {
      ap += (mrec[i] - mrec[i - 1]) * mpre[i];
    }
    return ap;
  }
  detail::FractionSum sum;
  const std::uint64_t npos = c.total_positives;
  for (std::uint64_t level = 0; level <= 10; ++level) {
    std::uint64_t best_num = 0, best_den = 1;
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t tp = c.true_positives[i];
      if (tp * 10 < level * npos) continue;
      const std::uint64_t den = tp + c.false_positives[i];
      if (tp * best_den > best_num * den) {
        best_num = tp;
        best_den = den;
      }
    }
    sum.add(best_num, best_den);
  }
  return sum.divided_by(11);
}

// ---------------------------------------------------------------------------
// Size buckets.

inline const std::vector<double> kDefaultBucketEdges = {45, 85, 135, 250};

struct SizeBucket {
  double lo = 0;
  std::optional<double> hi;  // unbounded for the last bucket
  std::size_t total = 0;
  std::size_t matched = 0;
  std::size_t unmatched = 0;
};

// Buckets by sqrt(area) of each non-difficult ground truth: [0, e0), [e0, e1),
// ..., [e_last, inf).
inline std::vector<SizeBucket> size_bucket_report(
    std::span<const GroundTruthRecord> gts, const std::vector<bool>& matched,
    std::span<const double> edges = kDefaultBucketEdges,
    AreaConvention area = AreaConvention::kContinuous) {
  if (matched.size() != gts.size()) {
    throw Error(ErrorKind::kShapeMismatch, "match flags do not cover the ground truth");
  }
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (!(edges[i] > 0) || (i > 0 && !(edges[i] > edges[i - 1]))) {
      throw Error(ErrorKind::kInvalidArgument,
                  "bucket edges must be positive and strictly increasing");
    }
  }
  std::vector<SizeBucket> buckets(edges.size() + 1);
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    buckets[b].lo = b == 0 ? 0.0 : edges[b - 1];
    if (b < edges.size()) buckets[b].hi = edges[b];
  }
  for (std::size_t i = 0; i < gts.size(); ++i) {
    if (gts[i].difficult) continue;
    const double side = std::sqrt(BoxArea(gts[i].box, area));
    const std::size_t b = static_cast<std::size_t>(
        std::upper_bound(edges.begin(), edges.end(), side) - edges.begin());
    ++buckets[b].total;
    ++(matched[i] ? buckets[b].matched : buckets[b].unmatched);
  }
  return buckets;
}

// ---------------------------------------------------------------------------
// Full evaluation.

struct EvalOptions {
  MatchOptions match;
  ApMethod method = ApMethod::kElevenPoint;
  std::vector<double> bucket_edges = kDefaultBucketEdges;
};

struct ApResult {
  std::map<std::string, double> per_class_ap;
  double map = 0;
  std::vector<SizeBucket> buckets;
};

inline double class_ap(std::span<const DetectionRecord> dets,
                       std::span<const GroundTruthRecord> gts,
                       const MatchResult& match, const std::string& cls,
                       ApMethod method) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].class_name == cls) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score > dets[b].score;
  });
  std::vector<MatchOutcome> ranked;
  ranked.reserve(order.size());
  for (std::size_t i : order) ranked.push_back(match.detections[i]);
  std::uint32_t npos = 0;
  for (const auto& g : gts) {
    if (g.class_name == cls && !g.difficult) ++npos;
  }
  return interpolated_ap(build_curve(ranked, npos), method);
}

inline ApResult evaluate(std::span<const GroundTruthRecord> gts,
                         std::span<const DetectionRecord> dets,
                         const EvalOptions& opts = {}) {
  const MatchResult match = match_detections(dets, gts, opts.match);
  std::map<std::string, std::uint32_t> positives;
  for (const auto& g : gts) {
    if (!g.difficult) ++positives[g.class_name];
  }
  ApResult r;
  double sum = 0;
  for (const auto& [cls, npos] : positives) {
    const double ap = class_ap(dets, gts, match, cls, opts.method);
    r.per_class_ap[cls] = ap;
    sum += ap;
  }
  r.map = positives.empty() ? 0.0 : sum / static_cast<double>(positives.size());
  r.buckets = size_bucket_report(gts, match.gt_matched, opts.bucket_edges,
                                 opts.match.area);
  return r;
}

// ---------------------------------------------------------------------------
// JSON records.

namespace detail {

inline Box ParseBBox(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 4) {
    throw Error(ErrorKind::kFormat, where + ": bbox must be [xmin, ymin, xmax, ymax]");
  }
  Box b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
        j[3].get<double>()};
  if (!b.valid()) {
    throw Error(ErrorKind::kFormat, where + ": bbox needs xmin < xmax and ymin < ymax");
  }
  return b;
}

}  // namespace detail

inline std::vector<GroundTruthRecord> ground_truth_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorKind::kFormat, "ground truth must be a JSON array");
  std::vector<GroundTruthRecord> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string where = "ground truth record " + std::to_string(i);
    try {
      const auto& r = j[i];
      GroundTruthRecord g;
      g.image_id = r.at("image_id").get<std::string>();
      g.class_name = r.at("class").get<std::string>();
      g.box = detail::ParseBBox(r.at("bbox"), where);
      g.difficult = r.value("difficult", false);
      out.push_back(std::move(g));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kFormat, where + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<DetectionRecord> detections_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(ErrorKind::kFormat, "detections must be a JSON array");
  std::vector<DetectionRecord> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string where = "detection record " + std::to_string(i);
    try {
      const auto& r = j[i];
      DetectionRecord d;
      d.image_id = r.at("image_id").get<std::string>();
      d.class_name = r.at("class").get<std::string>();
      d.box = detail::ParseBBox(r.at("bbox"), where);
      d.score = r.at("score").get<double>();
      if (!std::isfinite(d.score)) {
        throw Error(ErrorKind::kFormat, where + ": score must be finite");
      }
      out.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::kFormat, where + ": " + e.what());
    }
  }
  return out;
}

inline nlohmann::json to_json(const ApResult& r) {
  nlohmann::json buckets = nlohmann::json::array();
  for (const auto& b : r.buckets) {
    buckets.push_back({{"lo", b.lo},
                       {"hi", b.hi ? nlohmann::json(*b.hi) : nlohmann::json()},
                       {"total", b.total},
                       {"matched", b.matched},
                       {"unmatched", b.unmatched}});
  }
  return {{"per_class_ap", r.per_class_ap}, {"map", r.map}, {"buckets", buckets}};
}

}  // namespace freqdet

#endif  // FREQDET_VOC_EVAL_HPP_
