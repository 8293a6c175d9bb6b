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


// Video-level evaluation: chunk predictions are aggregated per video, then
// scored for classification (all videos) and for localisation and targets
// (positive videos only).

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tandem/error.hpp"
#include "tandem/interval.hpp"
#include "tandem/media_chunker.hpp"
#include "tandem/reward_engine.hpp"
#include "tandem/structured_output.hpp"

namespace tandem {

struct VideoAnnotation {
  std::string video_id;
  std::string label;
  std::vector<Interval> hate_segments;  // video-absolute seconds
  std::set<std::string> targets;

  friend bool operator==(const VideoAnnotation&, const VideoAnnotation&) = default;
};

struct VideoPrediction {
  std::string video_id;
  std::vector<std::pair<std::size_t, StructuredPrediction>> per_chunk;
  std::optional<std::string> aggregated_label;  // absent when no chunk was recoverable
  std::vector<Interval> aggregated_segments;    // absolute, coalesced
  std::set<std::string> aggregated_targets;
};

inline void validate(const VideoAnnotation& a, const LabelTaxonomy& tax) {
  if (!tax.contains(a.label)) throw Error(ErrorCode::kTaxonomyMismatch, "label '" + a.label + "' for " + a.video_id);
  if (!tax.is_hate_bearing(a.label) && (!a.hate_segments.empty() || !a.targets.empty())) {
    throw Error(ErrorCode::kInvalidArgument, "negative video " + a.video_id + " carries segments or targets");
  }
  for (const auto& s : a.hate_segments) {
    if (!s.well_formed() || s.start < 0.0) throw Error(ErrorCode::kMalformedInterval, "segment in " + a.video_id);
  }
}

/// Binary: any hate-bearing chunk makes the video hateful. Multiclass: the
/// most severe chunk label wins. Chunk spans are clipped to the chunk, shifted
/// by its start, and coalesced; targets are unioned.
inline VideoPrediction aggregate(std::string video_id,
                                 std::vector<std::pair<std::size_t, StructuredPrediction>> per_chunk,
                                 const LabelTaxonomy& taxonomy, double chunk_seconds = kChunkSeconds) {
  VideoPrediction out;
  out.video_id = std::move(video_id);
  std::sort(per_chunk.begin(), per_chunk.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  for (std::size_t i = 1; i < per_chunk.size(); ++i) {
    if (per_chunk[i].first == per_chunk[i - 1].first) {
      throw Error(ErrorCode::kDuplicateChunk,
                  "chunk " + std::to_string(per_chunk[i].first) + " repeated in " + out.video_id);
    }
  }
  std::optional<std::size_t> worst;
  std::vector<Interval> spans;
  for (const auto& [index, pred] : per_chunk) {
    const std::size_t sev = taxonomy.severity(pred.classification);
    if (!worst || sev > *worst) worst = sev;
    const double offset = static_cast<double>(index) * chunk_seconds;
    for (Interval span : pred.timestamps) {
      if (!clip(span, 0.0, chunk_seconds)) continue;
      spans.push_back({span.start + offset, span.end + offset});
    }
    out.aggregated_targets.insert(pred.targets.begin(), pred.targets.end());
  }
  if (worst) out.aggregated_label = taxonomy.labels()[*worst];
  out.aggregated_segments = coalesce(std::move(spans));
  out.per_chunk = std::move(per_chunk);
  return out;
}

namespace detail {

struct Ratio {
  unsigned __int128 num = 0;
  unsigned __int128 den = 1;

  Ratio() = default;
  Ratio(unsigned __int128 n, unsigned __int128 d) : num(n), den(d) { reduce(); }

  static unsigned __int128 gcd(unsigned __int128 a, unsigned __int128 b) {
    while (b) {
      const auto t = a % b;
      a = b;
      b = t;
    }
    return a;
  }
  void reduce() {
    const auto g = gcd(num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  Ratio& operator+=(const Ratio& o) {
    const auto g = gcd(den, o.den);
    *this = Ratio(num * (o.den / g) + o.num * (den / g), den / g * o.den);
    return *this;
  }
  Ratio divided_by(std::uint64_t k) const { return Ratio(num, den * k); }
  // Correctly rounded while both parts fit a double's mantissa.
  double to_double() const {
    constexpr unsigned __int128 exact = static_cast<unsigned __int128>(1) << 53;
    if (num < exact && den < exact) return static_cast<double>(num) / static_cast<double>(den);
    return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den));
  }
};

}  // namespace detail

struct ClassMetrics {
  std::string label;
  std::size_t support = 0;    // ground-truth count
  std::size_t predicted = 0;
  std::size_t true_positive = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ClassificationMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::vector<ClassMetrics> per_class;
};

/// Classes scored are those present in ground truth or predictions; a
/// predicted class with no support gets F1 = 0. A missing prediction is a miss.
inline ClassificationMetrics classification_metrics(const std::vector<std::optional<std::string>>& predicted,
                                                    const std::vector<std::string>& truth,
                                                    const LabelTaxonomy& taxonomy) {
  if (predicted.size() != truth.size()) throw Error(ErrorCode::kShapeMismatch, "predictions and labels differ in length");
  if (truth.empty()) throw Error(ErrorCode::kInvalidArgument, "classification metrics need at least one video");
  ClassificationMetrics m;
  std::size_t correct = 0;
  for (const auto& label : taxonomy.labels()) {
    ClassMetrics c;
    c.label = label;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const bool is_truth = truth[i] == label;
      const bool is_pred = predicted[i] && *predicted[i] == label;
      c.support += is_truth;
      c.predicted += is_pred;
      c.true_positive += is_truth && is_pred;
    }
    if (c.support == 0 && c.predicted == 0) continue;
    c.precision = c.predicted ? static_cast<double>(c.true_positive) / static_cast<double>(c.predicted) : 0.0;
    c.recall = c.support ? static_cast<double>(c.true_positive) / static_cast<double>(c.support) : 0.0;
    c.f1 = c.support + c.predicted
               ? 2.0 * static_cast<double>(c.true_positive) / static_cast<double>(c.support + c.predicted)
               : 0.0;
    correct += c.true_positive;
    m.per_class.push_back(std::move(c));
  }
  const auto n = static_cast<std::uint64_t>(truth.size());
  m.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  // Means are summed as fractions and rounded once.
  detail::Ratio macro, weighted;
  for (const auto& c : m.per_class) {
    macro += detail::Ratio(2 * c.true_positive, c.support + c.predicted);
    weighted += detail::Ratio(2 * c.true_positive * c.support, c.support + c.predicted);
  }
  m.macro_f1 = m.per_class.empty() ? 0.0 : macro.divided_by(m.per_class.size()).to_double();
  m.weighted_f1 = weighted.divided_by(n).to_double();
  return m;
}

struct LocalizationMetrics {
  double avg_iou = 0.0;
  double acc_at_05 = 0.0;  // fraction with IoU strictly above 0.5
  std::size_t denominator = 0;
  std::vector<double> per_video_iou;
};

/// Inputs are positive videos only: predicted vs annotated absolute spans.
inline LocalizationMetrics localization_metrics(const std::vector<std::vector<Interval>>& predicted,
                                                const std::vector<std::vector<Interval>>& truth) {
  if (predicted.size() != truth.size()) throw Error(ErrorCode::kShapeMismatch, "span lists differ in length");
  LocalizationMetrics m;
  m.denominator = truth.size();
  if (truth.empty()) return m;
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double v = interval_iou(coalesce(predicted[i]), coalesce(truth[i]));
    m.per_video_iou.push_back(v);
    sum += v;
    hits += v > 0.5;
  }
  m.avg_iou = sum / static_cast<double>(truth.size());
  m.acc_at_05 = static_cast<double>(hits) / static_cast<double>(truth.size());
  return m;
}

struct TargetMetrics {
  double avg_f1 = 0.0;
  double exact_match = 0.0;
  std::size_t denominator = 0;
};

/// Inputs are positive videos only.
inline TargetMetrics target_metrics(const std::vector<std::set<std::string>>& predicted,
                                    const std::vector<std::set<std::string>>& truth) {
  if (predicted.size() != truth.size()) throw Error(ErrorCode::kShapeMismatch, "target lists differ in length");
  TargetMetrics m;
  m.denominator = truth.size();
  if (truth.empty()) return m;
  double sum = 0.0;
  std::size_t exact = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    sum += target_f1(predicted[i], truth[i]);
    exact += predicted[i] == truth[i];
  }
  m.avg_f1 = sum / static_cast<double>(truth.size());
  m.exact_match = static_cast<double>(exact) / static_cast<double>(truth.size());
  return m;
}

struct MetricsReport {
  bool valid = false;  // false for an empty run
  std::size_t videos = 0;
  std::size_t positives = 0;  // denominator for localisation and target metrics
  std::size_t unpredicted_annotations = 0;
  TaxonomyMode mode = TaxonomyMode::kBinary;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::optional<double> weighted_f1;  // multiclass only
  std::optional<double> avg_iou;
  std::optional<double> acc_at_05;
  std::optional<double> target_avg_f1;
  std::optional<double> target_exact_match;
  std::vector<ClassMetrics> per_class;
};

struct EvaluationOptions {
  bool localization = true;  // suppress for runs without timestamp output
  bool targets = true;
  double chunk_seconds = kChunkSeconds;
};

/// Order-independent: videos are scored in video_id order.
inline MetricsReport evaluate_run(std::vector<VideoPrediction> predictions,
                                  const std::vector<VideoAnnotation>& annotations,
                                  const LabelTaxonomy& taxonomy, const EvaluationOptions& options = {}) {
  std::map<std::string, const VideoAnnotation*> by_id;
  for (const auto& a : annotations) by_id[a.video_id] = &a;
  std::sort(predictions.begin(), predictions.end(),
            [](const VideoPrediction& a, const VideoPrediction& b) { return a.video_id < b.video_id; });
  for (std::size_t i = 1; i < predictions.size(); ++i) {
    if (predictions[i].video_id == predictions[i - 1].video_id) {
      throw Error(ErrorCode::kInvalidArgument, "video " + predictions[i].video_id + " predicted twice");
    }
  }

  MetricsReport report;
  report.mode = taxonomy.mode();
  std::vector<std::optional<std::string>> labels_pred;
  std::vector<std::string> labels_true;
  std::vector<std::vector<Interval>> spans_pred, spans_true;
  std::vector<std::set<std::string>> targets_pred, targets_true;
  for (const auto& p : predictions) {
    auto it = by_id.find(p.video_id);
    if (it == by_id.end()) throw Error(ErrorCode::kMissingAnnotation, "no annotation for " + p.video_id);
    const VideoAnnotation& gt = *it->second;
    labels_pred.push_back(p.aggregated_label);
    labels_true.push_back(gt.label);
    if (taxonomy.is_hate_bearing(gt.label)) {
      spans_pred.push_back(p.aggregated_segments);
      spans_true.push_back(gt.hate_segments);
      targets_pred.push_back(p.aggregated_targets);
      targets_true.push_back(gt.targets);
    }
  }
  report.videos = predictions.size();
  report.unpredicted_annotations = annotations.size() > predictions.size() ? annotations.size() - predictions.size() : 0;
  if (predictions.empty()) return report;
  report.valid = true;

  const auto cls = classification_metrics(labels_pred, labels_true, taxonomy);
  report.accuracy = cls.accuracy;
  report.macro_f1 = cls.macro_f1;
  if (taxonomy.mode() == TaxonomyMode::kMulticlass3) report.weighted_f1 = cls.weighted_f1;
  report.per_class = cls.per_class;
  report.positives = spans_true.size();
  if (report.positives > 0) {
    if (options.localization) {
      const auto loc = localization_metrics(spans_pred, spans_true);
      report.avg_iou = loc.avg_iou;
      report.acc_at_05 = loc.acc_at_05;
    }
    if (options.targets) {
      const auto tgt = target_metrics(targets_pred, targets_true);
      report.target_avg_f1 = tgt.avg_f1;
      report.target_exact_match = tgt.exact_match;
    }
  }
  return report;
}

// ---- records ----

inline void to_json(nlohmann::json& j, const VideoAnnotation& a) {
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& s : a.hate_segments) spans.push_back({s.start, s.end});
  j = nlohmann::json{{"video_id", a.video_id}, {"label", a.label}, {"hate_segments", spans}, {"targets", a.targets}};
}

inline void from_json(const nlohmann::json& j, VideoAnnotation& a) {
  a.video_id = j.at("video_id").get<std::string>();
  a.label = j.at("label").get<std::string>();
  a.hate_segments.clear();
  for (const auto& s : j.value("hate_segments", nlohmann::json::array())) {
    a.hate_segments.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
  }
  a.targets = j.value("targets", std::set<std::string>{});
}

inline nlohmann::json report_to_json(const MetricsReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : r.per_class) {
    classes.push_back({{"label", c.label}, {"support", c.support}, {"predicted", c.predicted},
                       {"true_positive", c.true_positive}, {"precision", c.precision},
                       {"recall", c.recall}, {"f1", c.f1}});
  }
  return nlohmann::json{{"valid", r.valid},
                        {"videos", r.videos},
                        {"positives", r.positives},
                        {"unpredicted_annotations", r.unpredicted_annotations},
                        {"accuracy", r.accuracy},
                        {"macro_f1", r.macro_f1},
                        {"weighted_f1", opt(r.weighted_f1)},
                        {"avg_iou", opt(r.avg_iou)},
                        {"acc_at_0.5", opt(r.acc_at_05)},
                        {"target_avg_f1", opt(r.target_avg_f1)},
                        {"target_exact_match", opt(r.target_exact_match)},
                        {"per_class", classes}};
}

inline std::string report_to_table(const MetricsReport& r) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  auto row = [&](const std::string& name, const std::optional<double>& v, const std::string& denom) {
    os << std::left << std::setw(22) << name;
    if (v) {
      os << std::right << std::setw(8) << *v;
    } else {
      os << std::right << std::setw(8) << "--";
    }
    os << "  " << denom << "\n";
  };
  const std::string all = "n=" + std::to_string(r.videos);
  const std::string pos = "positives=" + std::to_string(r.positives);
  if (!r.valid) os << "(empty run: no predictions)\n";
  row("Accuracy", r.accuracy, all);
  row("Macro F1", r.macro_f1, all);
  row("Weighted F1", r.weighted_f1, all);
  row("Avg IoU", r.avg_iou, pos);
  row("Acc@0.5", r.acc_at_05, pos);
  row("Target Avg F1", r.target_avg_f1, pos);
  row("Target Exact Match", r.target_exact_match, pos);
  return os.str();
}

/// Parses each chunk's XML and aggregates. Unrecoverable chunks are dropped.
inline VideoPrediction prediction_from_record(const nlohmann::json& record, const DatasetTaxonomy& tax,
                                              double chunk_seconds = kChunkSeconds) {
  std::vector<std::pair<std::size_t, StructuredPrediction>> chunks;
  for (const auto& c : record.at("chunks")) {
    auto outcome = parse(c.at("xml").get<std::string>(), tax.labels, tax.targets, chunk_seconds);
    if (outcome.prediction) chunks.emplace_back(c.at("chunk_index").get<std::size_t>(), std::move(*outcome.prediction));
  }
  return aggregate(record.at("video_id").get<std::string>(), std::move(chunks), tax.labels, chunk_seconds);
}

}  // namespace tandem
