// Copyright 2026 The Tandem Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Composite verifiable reward:
//   total = λ_len·r_len + λ_fmt·r_fmt + λ_c·r_cls + λ_τ·r_iou + λ_z·r_tgt
// Every term lies in [0, 1] and is a deterministic function of the parsed
// prediction and the chunk's ground truth.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tandem/error.hpp"
#include "tandem/interval.hpp"
#include "tandem/structured_output.hpp"

namespace tandem {

inline constexpr std::size_t kDefaultSummaryWordLimit = 60;
inline constexpr double kFormatPenaltyPerViolation = 0.2;

struct RewardWeights {
  double len = 1.0;
  double fmt = 1.0;
  double cls = 1.0;
  double tau = 1.0;
  double z = 1.0;

  void validate() const {
    for (double w : {len, fmt, cls, tau, z}) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw Error(ErrorCode::kInvalidArgument, "reward weights must be finite and >= 0");
    }
    if (len + fmt + cls + tau + z <= 0.0) throw Error(ErrorCode::kInvalidArgument, "at least one reward weight must be positive");
  }

  /// Presets in [λ_len, λ_fmt, λ_c, λ_τ, λ_z] order: cfg-a, cfg-b, cfg-c.
  static RewardWeights preset(std::string_view name) {
    if (name == "cfg-a" || name == "cfg-b") return {1.0, 1.0, 1.0, 1.0, 1.0};
    if (name == "cfg-c") return {0.15, 0.15, 0.3, 0.2, 0.2};
    throw Error(ErrorCode::kInvalidArgument, "unknown weight preset '" + std::string(name) + "'");
  }

  friend bool operator==(const RewardWeights&, const RewardWeights&) = default;
};

/// Ground truth for one scored unit (a chunk, or a single-chunk video).
struct GroundTruth {
  std::string label;
  std::vector<Interval> segments;  // same time frame as the prediction
  std::set<std::string> targets;

  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct RewardBreakdown {
  double r_cls = 0.0;
  double r_iou = 0.0;
  double r_tgt = 0.0;
  double r_len = 0.0;
  double r_fmt = 0.0;
  double total = 0.0;
};

enum class ClassificationRewardMode {
  kIndicator,                // 1[ĉ = c*]
  kNegativeNormalizedCE,     // max(0, 1 - CE / log K), needs a label distribution
};

inline double classification_reward(std::string_view predicted, std::string_view truth,
                                    const LabelTaxonomy& taxonomy) {
  if (!taxonomy.contains(predicted)) throw Error(ErrorCode::kUnknownLabel, "'" + std::string(predicted) + "'");
  if (!taxonomy.contains(truth)) throw Error(ErrorCode::kUnknownLabel, "'" + std::string(truth) + "'");
  return predicted == truth ? 1.0 : 0.0;
}

/// Cross-entropy form for policies that expose a distribution over
/// `taxonomy.labels()` (same order). Uniform scores 0, certainty scores 1.
inline double classification_ce_reward(std::span<const double> label_probs, std::string_view truth,
                                       const LabelTaxonomy& taxonomy) {
  if (label_probs.size() != taxonomy.labels().size()) {
    throw Error(ErrorCode::kShapeMismatch, "label distribution size differs from taxonomy");
  }
  const double p = label_probs[taxonomy.severity(truth)];
  const double k = static_cast<double>(label_probs.size());
  if (!(p > 0.0)) return 0.0;
  const double ce = -std::log(std::min(p, 1.0));
  return std::clamp(1.0 - ce / std::log(k), 0.0, 1.0);
}

/// Mean over predicted intervals of the best IoU against any ground-truth
/// interval. Both empty scores 1 (correct negative); exactly one empty scores 0.
inline double interval_iou(std::span<const Interval> pred, std::span<const Interval> truth) {
  for (const auto& s : pred) {
    if (!s.well_formed()) throw Error(ErrorCode::kMalformedInterval, "predicted interval has start >= end");
  }
  for (const auto& s : truth) {
    if (!s.well_formed()) throw Error(ErrorCode::kMalformedInterval, "ground-truth interval has start >= end");
  }
  if (pred.empty() && truth.empty()) return 1.0;
  if (pred.empty() || truth.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& p : pred) {
    double best = 0.0;
    for (const auto& t : truth) best = std::max(best, iou(p, t));
    sum += best;
  }
  return sum / static_cast<double>(pred.size());
}

inline double target_f1(const std::set<std::string>& pred, const std::set<std::string>& truth) {
  if (pred.empty() && truth.empty()) return 1.0;
  if (pred.empty() || truth.empty()) return 0.0;
  std::size_t tp = 0;
  for (const auto& name : pred) tp += truth.count(name);
  return 2.0 * static_cast<double>(tp) / static_cast<double>(pred.size() + truth.size());
}

/// 1 inside [1, limit], 0 for an empty summary, linear decay to 0 at 2·limit.
inline double length_reward(std::size_t word_count, std::size_t limit = kDefaultSummaryWordLimit) {
  if (limit == 0) throw Error(ErrorCode::kInvalidArgument, "length limit must be positive");
  if (word_count == 0) return 0.0;
  if (word_count <= limit) return 1.0;
  const double excess = static_cast<double>(word_count - limit) / static_cast<double>(limit);
  return std::max(0.0, 1.0 - excess);
}

inline double format_reward(const ParseOutcome& outcome) {
  return std::max(0.0, 1.0 - kFormatPenaltyPerViolation * static_cast<double>(outcome.violations.size()));
}

inline double weighted_total(const RewardWeights& w, const RewardBreakdown& b) {
  return w.len * b.r_len + w.fmt * b.r_fmt + w.cls * b.r_cls + w.tau * b.r_iou + w.z * b.r_tgt;
}

struct CompositeOptions {
  std::size_t length_limit = kDefaultSummaryWordLimit;
  ClassificationRewardMode classification_mode = ClassificationRewardMode::kIndicator;
  std::optional<std::vector<double>> label_probs;  // required for the CE mode
};

/// Scores one parse outcome. An unrecoverable outcome earns only its format term.
inline RewardBreakdown composite(const ParseOutcome& outcome, const GroundTruth& truth,
                                 const RewardWeights& weights, const LabelTaxonomy& taxonomy,
                                 const CompositeOptions& options = {}) {
  weights.validate();
  if (!taxonomy.contains(truth.label)) throw Error(ErrorCode::kUnknownLabel, "'" + truth.label + "'");
  RewardBreakdown b;
  b.r_fmt = format_reward(outcome);
  if (outcome.prediction) {
    const StructuredPrediction& pred = *outcome.prediction;
    if (options.classification_mode == ClassificationRewardMode::kNegativeNormalizedCE) {
      if (!options.label_probs) throw Error(ErrorCode::kInvalidArgument, "CE reward needs label probabilities");
      b.r_cls = classification_ce_reward(*options.label_probs, truth.label, taxonomy);
    } else {
      b.r_cls = classification_reward(pred.classification, truth.label, taxonomy);
    }
    b.r_iou = interval_iou(pred.timestamps, truth.segments);
    b.r_tgt = target_f1(pred.targets, truth.targets);
    b.r_len = length_reward(summary_word_count(pred), options.length_limit);
  }
  b.total = weighted_total(weights, b);
  return b;
}

/// Convenience overload for an already-typed prediction with a clean parse.
inline RewardBreakdown composite(const StructuredPrediction& pred, const GroundTruth& truth,
                                 const RewardWeights& weights, const LabelTaxonomy& taxonomy,
                                 const CompositeOptions& options = {}) {
  ParseOutcome clean;
  clean.prediction = pred;
  return composite(clean, truth, weights, taxonomy, options);
}

inline void to_json(nlohmann::json& j, const RewardBreakdown& b) {
  j = nlohmann::json{{"r_cls", b.r_cls}, {"r_iou", b.r_iou}, {"r_tgt", b.r_tgt},
                     {"r_len", b.r_len}, {"r_fmt", b.r_fmt}, {"total", b.total}};
}

inline void to_json(nlohmann::json& j, const RewardWeights& w) {
  j = nlohmann::json::array({w.len, w.fmt, w.cls, w.tau, w.z});
}

inline void from_json(const nlohmann::json& j, RewardWeights& w) {
  if (j.is_string()) {
    w = RewardWeights::preset(j.get<std::string>());
    return;
  }
  if (!j.is_array() || j.size() != 5) throw Error(ErrorCode::kParseError, "weights must be a preset name or 5 numbers");
  w = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>(), j[4].get<double>()};
  w.validate();
}

inline void to_json(nlohmann::json& j, const GroundTruth& g) {
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& s : g.segments) spans.push_back({s.start, s.end});
  j = nlohmann::json{{"label", g.label}, {"segments", spans}, {"targets", g.targets}};
}

inline void from_json(const nlohmann::json& j, GroundTruth& g) {
  g.label = j.at("label").get<std::string>();
  g.segments.clear();
  const char* key = j.contains("segments") ? "segments" : "hate_segments";
  for (const auto& s : j.value(key, nlohmann::json::array())) {
    g.segments.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
  }
  g.targets = j.value("targets", std::set<std::string>{});
}

}  // namespace tandem
