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


// Dataset manifests, the silver-label SFT filter, and run directories.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tandem/error.hpp"
#include "tandem/evaluation.hpp"
#include "tandem/media_chunker.hpp"
#include "tandem/structured_output.hpp"
#include "tandem/training_log.hpp"
#include "tandem/util.hpp"

namespace tandem {

inline constexpr std::array<std::string_view, 3> kSplits = {"train", "val", "test"};

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;

  std::size_t& at(std::string_view split) {
    if (split == "train") return train;
    if (split == "val") return val;
    if (split == "test") return test;
    throw Error(ErrorCode::kInvalidArgument, "unknown split '" + std::string(split) + "'");
  }
  std::size_t total() const { return train + val + test; }

  friend bool operator==(const SplitSizes&, const SplitSizes&) = default;
};

struct DatasetRecord {
  VideoAnnotation annotation;
  MediaManifest media;
  std::string split;

  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

struct DatasetManifest {
  std::string name;
  std::string taxonomy;
  SplitSizes splits;
  std::vector<DatasetRecord> records;

  std::vector<const DatasetRecord*> split(std::string_view which) const {
    std::vector<const DatasetRecord*> out;
    for (const auto& r : records) {
      if (r.split == which) out.push_back(&r);
    }
    return out;
  }
};

inline nlohmann::json record_to_json(const DatasetRecord& r) {
  nlohmann::json j = r.annotation;
  j["split"] = r.split;
  j["duration"] = r.media.duration;
  j["has_audio"] = r.media.has_audio;
  if (r.media.scene_cuts) j["scene_cuts"] = *r.media.scene_cuts;
  if (!r.media.source.empty()) j["source"] = r.media.source;
  return j;
}

/// First line: {"dataset", "taxonomy", "splits": {"train", "val", "test"}}.
/// Each following non-blank line is one video record.
inline std::string manifest_to_jsonl(const DatasetManifest& m) {
  std::string out = nlohmann::json{{"dataset", m.name},
                                   {"taxonomy", m.taxonomy},
                                   {"splits", {{"train", m.splits.train}, {"val", m.splits.val}, {"test", m.splits.test}}}}
                        .dump() +
                    "\n";
  for (const auto& r : m.records) out += record_to_json(r).dump() + "\n";
  return out;
}

inline DatasetManifest parse_manifest(std::istream& in, const DatasetTaxonomy& tax) {
  DatasetManifest m;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  SplitSizes seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, e.what(), lineno);
    }
    if (!have_header) {
      try {
        m.name = j.at("dataset").get<std::string>();
        m.taxonomy = j.value("taxonomy", m.name);
        const auto& s = j.at("splits");
        m.splits = {s.at("train").get<std::size_t>(), s.at("val").get<std::size_t>(), s.at("test").get<std::size_t>()};
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kParseError, std::string("bad manifest header: ") + e.what(), lineno);
      }
      have_header = true;
      continue;
    }
    DatasetRecord r;
    try {
      r.annotation = j.get<VideoAnnotation>();
      r.split = j.at("split").get<std::string>();
      r.media.video_id = r.annotation.video_id;
      r.media.duration = j.at("duration").get<double>();
      r.media.has_audio = j.value("has_audio", true);
      if (j.contains("scene_cuts")) r.media.scene_cuts = j.at("scene_cuts").get<std::vector<double>>();
      r.media.source = j.value("source", std::string());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, e.what(), lineno);
    }
    if (!tax.labels.contains(r.annotation.label)) {
      throw Error(ErrorCode::kTaxonomyMismatch, "label '" + r.annotation.label + "' not in taxonomy", lineno);
    }
    for (const auto& t : r.annotation.targets) {
      if (!tax.targets.contains(t)) throw Error(ErrorCode::kTaxonomyMismatch, "target '" + t + "' not in taxonomy", lineno);
    }
    try {
      validate(r.annotation, tax.labels);
      validate(r.media);
      seen.at(r.split) += 1;
    } catch (const Error& e) {
      throw Error(ErrorCode::kParseError, e.what(), lineno);
    }
    m.records.push_back(std::move(r));
  }
  if (!have_header) throw Error(ErrorCode::kParseError, "empty manifest", lineno == 0 ? 1 : lineno);
  if (!(seen == m.splits)) {
    throw Error(ErrorCode::kParseError, "split sizes in header (" + std::to_string(m.splits.train) + "/" +
                                            std::to_string(m.splits.val) + "/" + std::to_string(m.splits.test) +
                                            ") do not match records (" + std::to_string(seen.train) + "/" +
                                            std::to_string(seen.val) + "/" + std::to_string(seen.test) + ")",
                lineno);
  }
  return m;
}

inline DatasetManifest load_manifest(const std::string& path, const DatasetTaxonomy& tax) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open manifest " + path);
  return parse_manifest(in, tax);
}

// ---- SFT silver filter ----

struct SilverCandidate {
  std::string video_id;
  StructuredPrediction strong_model_prediction;
  std::string ground_truth_label;

  friend bool operator==(const SilverCandidate&, const SilverCandidate&) = default;
};

struct FilterResult {
  std::vector<SilverCandidate> kept;
  std::vector<SilverCandidate> discarded;
};

/// Keeps candidates whose predicted label equals the ground truth. Nothing
/// else about the prediction is checked or altered.
inline FilterResult sft_filter(std::vector<SilverCandidate> candidates) {
  FilterResult out;
  for (auto& c : candidates) {
    if (c.strong_model_prediction.classification == c.ground_truth_label) {
      out.kept.push_back(std::move(c));
    } else {
      out.discarded.push_back(std::move(c));
    }
  }
  return out;
}

inline void to_json(nlohmann::json& j, const SilverCandidate& c) {
  j = nlohmann::json{{"video_id", c.video_id},
                     {"prediction", c.strong_model_prediction},
                     {"ground_truth_label", c.ground_truth_label}};
}

inline void from_json(const nlohmann::json& j, SilverCandidate& c) {
  c.video_id = j.at("video_id").get<std::string>();
  c.strong_model_prediction = j.at("prediction").get<StructuredPrediction>();
  c.ground_truth_label = j.at("ground_truth_label").get<std::string>();
}

// ---- JSONL helpers ----

inline std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, path + ": " + e.what(), lineno);
    }
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << content;
  out.flush();
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

// ---- run directories ----

inline constexpr std::string_view kRunConfigFile = "config.json";
inline constexpr std::string_view kRunLogFile = "log.jsonl";
inline constexpr std::string_view kRunReportFile = "report.json";
inline constexpr std::string_view kRunHashFile = "content.hash";

inline std::uint64_t run_content_hash(const std::string& config, const std::string& log, const std::string& report) {
  std::uint64_t h = fnv1a(config);
  h = hash_combine(h, fnv1a(log));
  return hash_combine(h, fnv1a(report));
}

struct RunArtifacts {
  nlohmann::json config;
  TrainingLog log;
  nlohmann::json report;
  std::uint64_t content_hash = 0;
};

/// Writes config.json, log.jsonl, report.json and content.hash into `dir`.
/// Files are staged in a sibling directory and renamed into place, so on any
/// failure `dir` does not exist. Returns the content hash.
inline std::uint64_t persist_run(const TrainingLog& log, const nlohmann::json& report, const nlohmann::json& config,
                                 const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (fs::exists(dir, ec)) throw Error(ErrorCode::kIoError, "run directory already exists: " + dir.string());
  const fs::path parent = dir.has_parent_path() ? dir.parent_path() : fs::path(".");
  if (!fs::is_directory(parent, ec)) throw Error(ErrorCode::kIoError, "no such directory: " + parent.string());

  const std::string config_text = config.dump(2) + "\n";
  const std::string log_text = log.to_jsonl();
  const std::string report_text = report.dump(2) + "\n";
  const std::uint64_t hash = run_content_hash(config_text, log_text, report_text);

  const fs::path staging = parent / ("." + dir.filename().string() + ".staging-" + hex64(hash));
  fs::remove_all(staging, ec);
  try {
    if (!fs::create_directory(staging, ec) || ec) {
      throw Error(ErrorCode::kIoError, "cannot create " + staging.string() + (ec ? ": " + ec.message() : ""));
    }
    write_file(staging / kRunConfigFile, config_text);
    write_file(staging / kRunLogFile, log_text);
    write_file(staging / kRunReportFile, report_text);
    write_file(staging / kRunHashFile, hex64(hash) + "\n");
    fs::rename(staging, dir, ec);
    if (ec) throw Error(ErrorCode::kIoError, "cannot move run into " + dir.string() + ": " + ec.message());
  } catch (...) {
    fs::remove_all(staging, ec);
    throw;
  }
  return hash;
}

/// Loads a run directory and verifies its content hash.
inline RunArtifacts load_run(const std::filesystem::path& dir) {
  const std::string config_text = read_file(dir / kRunConfigFile);
  const std::string log_text = read_file(dir / kRunLogFile);
  const std::string report_text = read_file(dir / kRunReportFile);
  const std::string stored = std::string(trim(read_file(dir / kRunHashFile)));
  const std::uint64_t hash = run_content_hash(config_text, log_text, report_text);
  if (stored != hex64(hash)) {
    throw Error(ErrorCode::kParseError, "content hash mismatch in " + dir.string() + ": stored " + stored +
                                            ", computed " + hex64(hash));
  }
  RunArtifacts out;
  try {
    out.config = nlohmann::json::parse(config_text);
    out.report = nlohmann::json::parse(report_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, dir.string() + ": " + e.what());
  }
  out.log = TrainingLog::from_jsonl(log_text);
  out.content_hash = hash;
  return out;
}

}  // namespace tandem
