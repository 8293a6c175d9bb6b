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


// The five-tag XML schema emitted per chunk:
//   <reasoning>, <classification>, <timestamps>, <targets>, <summary>
// parse() is total: every defect becomes a Violation, and a prediction is
// recovered whenever <classification> names a known label.

#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tandem/error.hpp"
#include "tandem/interval.hpp"
#include "tandem/util.hpp"

namespace tandem {

inline constexpr std::string_view kNoHateTimestamps = "No hate timestamps";
inline constexpr std::string_view kNoneTarget = "None";

enum class TaxonomyMode { kBinary, kMulticlass3 };

/// Ordered label set, least severe first. The order doubles as the severity
/// order used when aggregating chunk labels to a video label.
class LabelTaxonomy {
 public:
  LabelTaxonomy() = default;
  LabelTaxonomy(TaxonomyMode mode, std::vector<std::string> labels, std::set<std::string> hate_bearing)
      : mode_(mode), labels_(std::move(labels)), hate_bearing_(std::move(hate_bearing)) {
    const std::size_t expected = mode_ == TaxonomyMode::kBinary ? 2 : 3;
    if (labels_.size() != expected) {
      throw Error(ErrorCode::kInvalidArgument, "label count does not match taxonomy mode");
    }
    std::set<std::string> unique(labels_.begin(), labels_.end());
    if (unique.size() != labels_.size()) throw Error(ErrorCode::kInvalidArgument, "duplicate label");
    for (const auto& l : labels_) {
      if (trim(l) != l || l.empty()) throw Error(ErrorCode::kInvalidArgument, "label must be trimmed text");
    }
    if (hate_bearing_.empty() || hate_bearing_.size() >= labels_.size()) {
      throw Error(ErrorCode::kInvalidArgument, "hate-bearing labels must be a non-empty proper subset");
    }
    for (const auto& h : hate_bearing_) {
      if (!unique.count(h)) throw Error(ErrorCode::kInvalidArgument, "hate-bearing label '" + h + "' not in labels");
    }
  }

  TaxonomyMode mode() const { return mode_; }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::set<std::string>& hate_bearing() const { return hate_bearing_; }

  bool contains(std::string_view label) const {
    return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
  }
  bool is_hate_bearing(std::string_view label) const {
    return hate_bearing_.count(std::string(label)) > 0;
  }
  /// Position in the severity order; throws UnknownLabel.
  std::size_t severity(std::string_view label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw Error(ErrorCode::kUnknownLabel, "'" + std::string(label) + "'");
    return static_cast<std::size_t>(it - labels_.begin());
  }
  /// Least severe non-hate-bearing label.
  const std::string& negative_label() const {
    for (const auto& l : labels_) {
      if (!is_hate_bearing(l)) return l;
    }
    return labels_.front();
  }

  static LabelTaxonomy hatemm() {
    return {TaxonomyMode::kBinary, {"Non Hate", "Hate"}, {"Hate"}};
  }
  static LabelTaxonomy multihateclip() {
    return {TaxonomyMode::kMulticlass3, {"Normal", "Offensive", "Hateful"}, {"Offensive", "Hateful"}};
  }
  static LabelTaxonomy multihateclip_binary() {
    return {TaxonomyMode::kBinary, {"Normal", "Offensive"}, {"Offensive"}};
  }
  static LabelTaxonomy implihatevid() {
    return {TaxonomyMode::kMulticlass3,
            {"Non-hate", "Implicit Hate", "Explicit Hate"},
            {"Implicit Hate", "Explicit Hate"}};
  }

 private:
  TaxonomyMode mode_ = TaxonomyMode::kBinary;
  std::vector<std::string> labels_;
  std::set<std::string> hate_bearing_;
};

/// Closed set of target-group names. "None" is reserved for the empty set.
class TargetTaxonomy {
 public:
  TargetTaxonomy() = default;
  explicit TargetTaxonomy(std::vector<std::string> names) : names_(std::move(names)) {
    std::set<std::string> seen;
    for (const auto& n : names_) {
      if (n.empty() || trim(n) != n || n.find(',') != std::string::npos) {
        throw Error(ErrorCode::kInvalidArgument, "target name '" + n + "' must be trimmed, non-empty, comma-free");
      }
      if (to_lower(n) == to_lower(kNoneTarget)) {
        throw Error(ErrorCode::kInvalidArgument, "'None' is reserved");
      }
      if (!seen.insert(n).second) throw Error(ErrorCode::kInvalidArgument, "duplicate target '" + n + "'");
    }
  }

  const std::vector<std::string>& names() const { return names_; }
  bool contains(std::string_view name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
  }

  static TargetTaxonomy hatemm() {
    return TargetTaxonomy({"Blacks", "Jews", "Muslims", "LGBTQ", "Whites", "Asians", "Women", "Others"});
  }
  static TargetTaxonomy multihateclip() {
    return TargetTaxonomy({"Woman", "Man", "LGBTQ", "White", "Christian", "Other"});
  }

 private:
  std::vector<std::string> names_;
};

/// Per-dataset pair of taxonomies, as loaded from a taxonomy config file.
struct DatasetTaxonomy {
  LabelTaxonomy labels;
  TargetTaxonomy targets;
};

struct StructuredPrediction {
  std::string reasoning;
  std::string classification;
  std::vector<Interval> timestamps;  // chunk-relative; empty == placeholder
  std::set<std::string> targets;     // empty == "None"
  std::string summary;

  friend bool operator==(const StructuredPrediction&, const StructuredPrediction&) = default;
};

enum class ViolationKind {
  kMissingTag,
  kMalformedTimestamp,
  kUnknownLabel,
  kUnknownTarget,
  kOrderViolation,
  kInconsistentNegative,
};

inline const char* to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::kMissingTag: return "missing-tag";
    case ViolationKind::kMalformedTimestamp: return "malformed-timestamp";
    case ViolationKind::kUnknownLabel: return "unknown-label";
    case ViolationKind::kUnknownTarget: return "unknown-target";
    case ViolationKind::kOrderViolation: return "order-violation";
    case ViolationKind::kInconsistentNegative: return "inconsistent-negative";
  }
  return "unknown";
}

struct Violation {
  ViolationKind kind;
  std::string detail;  // offending tag or text

  friend bool operator==(const Violation&, const Violation&) = default;
  friend auto operator<=>(const Violation&, const Violation&) = default;
};

struct ParseOutcome {
  std::optional<StructuredPrediction> prediction;
  std::vector<Violation> violations;

  bool recoverable() const { return prediction.has_value(); }
  std::size_t count(ViolationKind kind) const {
    return static_cast<std::size_t>(std::count_if(
        violations.begin(), violations.end(), [kind](const Violation& v) { return v.kind == kind; }));
  }
};

inline constexpr std::array<std::string_view, 5> kSchemaTags = {"reasoning", "classification",
                                                                  "timestamps", "targets", "summary"};

namespace detail {

inline std::string xml_escape(std::string_view text) {
  // Leading/trailing whitespace is written as character references so that
  // parse(), which trims raw whitespace, preserves it.
  std::size_t lead = 0;
  while (lead < text.size() && is_space(text[lead])) ++lead;
  std::size_t trail = text.size();
  while (trail > lead && is_space(text[trail - 1])) --trail;
  std::string out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (i < lead || i >= trail) {
      out += "&#" + std::to_string(static_cast<unsigned char>(c)) + ";";
    } else if (c == '&') {
      out += "&amp;";
    } else if (c == '<') {
      out += "&lt;";
    } else if (c == '>') {
      out += "&gt;";
    } else {
      out += c;
    }
  }
  return out;
}

inline std::string xml_unescape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '&') {
      out += text[i];
      continue;
    }
    const std::size_t semi = text.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out += text[i];
      continue;
    }
    const std::string_view entity = text.substr(i + 1, semi - i - 1);
    std::optional<char> decoded;
    if (entity == "amp") decoded = '&';
    else if (entity == "lt") decoded = '<';
    else if (entity == "gt") decoded = '>';
    else if (entity == "quot") decoded = '"';
    else if (entity == "apos") decoded = '\'';
    else if (entity.size() > 1 && entity[0] == '#') {
      unsigned value = 0;
      const bool hex = entity[1] == 'x' || entity[1] == 'X';
      const std::string_view digits = entity.substr(hex ? 2 : 1);
      auto res = std::from_chars(digits.data(), digits.data() + digits.size(), value, hex ? 16 : 10);
      if (res.ec == std::errc() && res.ptr == digits.data() + digits.size() && value < 128) {
        decoded = static_cast<char>(value);
      }
    }
    if (decoded) {
      out += *decoded;
      i = semi;
    } else {
      out += text[i];
    }
  }
  return out;
}

struct TagSpan {
  std::size_t open_pos;
  std::string_view body;
};

inline std::optional<TagSpan> find_tag(std::string_view text, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  const std::size_t a = text.find(open);
  if (a == std::string_view::npos) return std::nullopt;
  const std::size_t body_start = a + open.size();
  const std::size_t b = text.find(close, body_start);
  if (b == std::string_view::npos) return std::nullopt;
  return TagSpan{a, text.substr(body_start, b - body_start)};
}

inline bool is_placeholder(std::string_view body) {
  const std::string lowered = to_lower(trim(body));
  return lowered.empty() || lowered == to_lower(kNoHateTimestamps) || lowered == "none";
}

// One `S-E` pair; tolerates surrounding parentheses and multi-dash separators.
inline std::optional<Interval> parse_pair(std::string_view item) {
  item = trim(item);
  if (!item.empty() && item.front() == '(') item.remove_prefix(1);
  if (!item.empty() && item.back() == ')') item.remove_suffix(1);
  item = trim(item);
  // Separator is the first '-' that follows a digit, so a leading sign is not mistaken for it.
  std::size_t sep = std::string_view::npos;
  for (std::size_t i = 1; i < item.size(); ++i) {
    if (item[i] == '-' && (std::isdigit(static_cast<unsigned char>(item[i - 1])) || is_space(item[i - 1]) ||
                           item[i - 1] == '.')) {
      sep = i;
      break;
    }
  }
  if (sep == std::string_view::npos) return std::nullopt;
  std::size_t after = sep;
  while (after < item.size() && item[after] == '-') ++after;
  auto s = parse_double(item.substr(0, sep));
  auto e = parse_double(item.substr(after));
  if (!s || !e) return std::nullopt;
  return Interval{*s, *e};
}

}  // namespace detail

/// Parses model output against the schema. Never throws.
inline ParseOutcome parse(std::string_view raw_text, const LabelTaxonomy& label_tax,
                          const TargetTaxonomy& target_tax, double chunk_seconds = 30.0) {
  ParseOutcome out;
  std::array<std::optional<detail::TagSpan>, 5> spans;
  for (std::size_t i = 0; i < kSchemaTags.size(); ++i) {
    spans[i] = detail::find_tag(raw_text, kSchemaTags[i]);
    if (!spans[i]) out.violations.push_back({ViolationKind::kMissingTag, std::string(kSchemaTags[i])});
  }
  std::size_t last_pos = 0;
  for (const auto& span : spans) {
    if (!span) continue;
    if (span->open_pos < last_pos) {
      out.violations.push_back({ViolationKind::kOrderViolation, "tags out of canonical order"});
      break;
    }
    last_pos = span->open_pos;
  }

  auto text_of = [&](std::size_t idx) {
    return spans[idx] ? detail::xml_unescape(trim(spans[idx]->body)) : std::string();
  };

  StructuredPrediction pred;
  pred.reasoning = text_of(0);
  pred.classification = text_of(1);
  pred.summary = text_of(4);
  const bool label_known = spans[1] && label_tax.contains(pred.classification);
  if (spans[1] && !label_known) {
    out.violations.push_back({ViolationKind::kUnknownLabel, pred.classification});
  }

  bool negative_inconsistent = false;
  if (spans[2]) {
    const std::string body = detail::xml_unescape(trim(spans[2]->body));
    if (!detail::is_placeholder(body)) {
      std::string_view list = trim(body);
      if (!list.empty() && list.front() == '[') list.remove_prefix(1);
      if (!list.empty() && list.back() == ']') list.remove_suffix(1);
      for (std::string_view item : split(list, ',')) {
        auto span = detail::parse_pair(item);
        // Spans crossing the chunk end are truncated to it.
        if (span && span->start >= 0.0 && span->start < chunk_seconds && span->end > span->start &&
            std::isfinite(span->end)) {
          span->end = std::min(span->end, chunk_seconds);
          pred.timestamps.push_back(*span);
        } else {
          out.violations.push_back({ViolationKind::kMalformedTimestamp, std::string(trim(item))});
        }
      }
      negative_inconsistent = true;
    }
  }
  if (spans[3]) {
    const std::string body = detail::xml_unescape(trim(spans[3]->body));
    if (!detail::is_placeholder(body)) {
      for (std::string_view item : split(body, ',')) {
        const std::string name(trim(item));
        if (name.empty()) continue;
        if (target_tax.contains(name)) {
          pred.targets.insert(name);
        } else {
          out.violations.push_back({ViolationKind::kUnknownTarget, name});
        }
      }
      negative_inconsistent = true;
    }
  }

  if (!label_known) return out;
  if (!label_tax.is_hate_bearing(pred.classification) && negative_inconsistent) {
    out.violations.push_back({ViolationKind::kInconsistentNegative, pred.classification});
    pred.timestamps.clear();
    pred.targets.clear();
  }
  out.prediction = std::move(pred);
  return out;
}

inline void validate(const StructuredPrediction& pred, double chunk_seconds = 30.0) {
  if (trim(pred.classification).empty()) {
    throw Error(ErrorCode::kInvalidPrediction, "empty classification");
  }
  if (trim(pred.classification) != pred.classification) {
    throw Error(ErrorCode::kInvalidPrediction, "classification must be trimmed");
  }
  for (const Interval& t : pred.timestamps) {
    if (!t.well_formed() || t.start < 0.0 || t.end > chunk_seconds) {
      throw Error(ErrorCode::kInvalidPrediction,
                  "timestamp " + format_double(t.start) + "-" + format_double(t.end) + " outside chunk");
    }
  }
  for (const auto& name : pred.targets) {
    if (name.empty() || trim(name) != name || name.find(',') != std::string::npos ||
        to_lower(name) == to_lower(kNoneTarget)) {
      throw Error(ErrorCode::kInvalidPrediction, "target '" + name + "' cannot be serialized");
    }
  }
}

/// Canonical XML; parse(serialize(p)) == p for every valid p.
inline std::string serialize(const StructuredPrediction& pred, double chunk_seconds = 30.0) {
  validate(pred, chunk_seconds);
  std::string timestamps;
  if (pred.timestamps.empty()) {
    timestamps = kNoHateTimestamps;
  } else {
    for (std::size_t i = 0; i < pred.timestamps.size(); ++i) {
      if (i) timestamps += ", ";
      timestamps += format_double(pred.timestamps[i].start) + "-" + format_double(pred.timestamps[i].end);
    }
  }
  std::string targets;
  if (pred.targets.empty()) {
    targets = kNoneTarget;
  } else {
    for (const auto& name : pred.targets) {
      if (!targets.empty()) targets += ", ";
      targets += detail::xml_escape(name);
    }
  }
  std::string xml;
  xml += "<reasoning>" + detail::xml_escape(pred.reasoning) + "</reasoning>\n";
  xml += "<classification>" + detail::xml_escape(pred.classification) + "</classification>\n";
  xml += "<timestamps>" + timestamps + "</timestamps>\n";
  xml += "<targets>" + targets + "</targets>\n";
  xml += "<summary>" + detail::xml_escape(pred.summary) + "</summary>\n";
  return xml;
}

/// Additionally enforces negative consistency, which needs the taxonomy.
inline std::string serialize(const StructuredPrediction& pred, const LabelTaxonomy& label_tax,
                             double chunk_seconds = 30.0) {
  if (!label_tax.contains(pred.classification)) {
    throw Error(ErrorCode::kInvalidPrediction, "unknown label '" + pred.classification + "'");
  }
  if (!label_tax.is_hate_bearing(pred.classification) &&
      (!pred.timestamps.empty() || !pred.targets.empty())) {
    throw Error(ErrorCode::kInvalidPrediction, "non-hateful prediction carries timestamps or targets");
  }
  return serialize(pred, chunk_seconds);
}

inline std::size_t summary_word_count(const StructuredPrediction& pred) {
  std::size_t count = 0;
  bool in_word = false;
  for (char c : pred.summary) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++count;
    }
  }
  return count;
}

// ---- taxonomy config ----

inline DatasetTaxonomy taxonomy_from_json(const nlohmann::json& j) {
  const std::string mode = j.at("mode").get<std::string>();
  TaxonomyMode m;
  if (mode == "binary") {
    m = TaxonomyMode::kBinary;
  } else if (mode == "multiclass-3") {
    m = TaxonomyMode::kMulticlass3;
  } else {
    throw Error(ErrorCode::kParseError, "unknown taxonomy mode '" + mode + "'");
  }
  return DatasetTaxonomy{
      LabelTaxonomy(m, j.at("labels").get<std::vector<std::string>>(),
                    j.at("hate_bearing").get<std::set<std::string>>()),
      TargetTaxonomy(j.value("targets", std::vector<std::string>{}))};
}

inline nlohmann::json taxonomy_to_json(const DatasetTaxonomy& t) {
  return nlohmann::json{
      {"mode", t.labels.mode() == TaxonomyMode::kBinary ? "binary" : "multiclass-3"},
      {"labels", t.labels.labels()},
      {"hate_bearing", t.labels.hate_bearing()},
      {"targets", t.targets.names()}};
}

inline std::map<std::string, DatasetTaxonomy> builtin_taxonomies() {
  return {
      {"hatemm", {LabelTaxonomy::hatemm(), TargetTaxonomy::hatemm()}},
      {"mhc", {LabelTaxonomy::multihateclip(), TargetTaxonomy::multihateclip()}},
      {"mhc-binary", {LabelTaxonomy::multihateclip_binary(), TargetTaxonomy::multihateclip()}},
      {"ihv", {LabelTaxonomy::implihatevid(), TargetTaxonomy()}},
  };
}

/// Config file: {"<dataset>": {"mode", "labels", "hate_bearing", "targets"}, ...}
inline std::map<std::string, DatasetTaxonomy> load_taxonomies(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open taxonomy config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
  std::map<std::string, DatasetTaxonomy> out;
  for (auto it = j.begin(); it != j.end(); ++it) out.emplace(it.key(), taxonomy_from_json(it.value()));
  return out;
}

inline void to_json(nlohmann::json& j, const StructuredPrediction& p) {
  nlohmann::json spans = nlohmann::json::array();
  for (const auto& t : p.timestamps) spans.push_back({t.start, t.end});
  j = nlohmann::json{{"reasoning", p.reasoning}, {"classification", p.classification},
                     {"timestamps", spans},      {"targets", p.targets},
                     {"summary", p.summary}};
}

inline void from_json(const nlohmann::json& j, StructuredPrediction& p) {
  p.reasoning = j.value("reasoning", std::string());
  p.classification = j.at("classification").get<std::string>();
  p.timestamps.clear();
  for (const auto& s : j.value("timestamps", nlohmann::json::array())) {
    p.timestamps.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
  }
  p.targets = j.value("targets", std::set<std::string>{});
  p.summary = j.value("summary", std::string());
}

inline void to_json(nlohmann::json& j, const Violation& v) {
  j = nlohmann::json{{"kind", to_string(v.kind)}, {"detail", v.detail}};
}

}  // namespace tandem
