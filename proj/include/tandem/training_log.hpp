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


// Append-only record of a tandem run, one JSON object per optimiser step.

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tandem/error.hpp"
#include "tandem/modality.hpp"
#include "tandem/util.hpp"

namespace tandem {

/// Identifies the cross-modal context a rollout group was conditioned on.
struct ContextRef {
  std::string id;
  ModalityRole producer = ModalityRole::kAudio;
  std::size_t step = 0;  // global step of the SCCR pass that produced it
  std::string video_id;
  std::size_t chunk_index = 0;
  bool empty = false;  // SCCR output was unparseable
  // One chunk of history at most: the same producer's context for chunk_index - 1.
  std::optional<std::size_t> history_chunk_index;
  std::optional<std::size_t> history_step;

  friend bool operator==(const ContextRef&, const ContextRef&) = default;
};

struct GroupRecord {
  std::string video_id;
  std::size_t chunk_index = 0;
  std::uint64_t seed = 0;
  ContextRef context;
  std::vector<double> rewards;
  double baseline = 0.0;
  std::vector<double> advantages;
  std::map<std::string, std::size_t> violations;  // kind -> count over the group

  friend bool operator==(const GroupRecord&, const GroupRecord&) = default;
};

struct StepRecord {
  std::size_t global_step = 0;
  std::size_t phase = 0;
  std::size_t step_in_phase = 0;
  ModalityRole trainable = ModalityRole::kVision;
  std::string status = "ok";  // ok | retried | skipped
  std::string error;
  bool truncated_phase = false;
  double mean_reward = 0.0;
  std::uint64_t frozen_hash_before = 0;
  std::uint64_t frozen_hash_after = 0;
  std::uint64_t trainable_hash_before = 0;
  std::uint64_t trainable_hash_after = 0;
  std::vector<GroupRecord> groups;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

inline void to_json(nlohmann::json& j, const ContextRef& c) {
  j = nlohmann::json{{"id", c.id},         {"producer", to_string(c.producer)}, {"step", c.step},
                     {"video_id", c.video_id}, {"chunk_index", c.chunk_index}, {"empty", c.empty}};
  j["history_chunk_index"] = c.history_chunk_index ? nlohmann::json(*c.history_chunk_index) : nlohmann::json(nullptr);
  j["history_step"] = c.history_step ? nlohmann::json(*c.history_step) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, ContextRef& c) {
  c.id = j.at("id").get<std::string>();
  c.producer = modality_from_string(j.at("producer").get<std::string>());
  c.step = j.at("step").get<std::size_t>();
  c.video_id = j.at("video_id").get<std::string>();
  c.chunk_index = j.at("chunk_index").get<std::size_t>();
  c.empty = j.at("empty").get<bool>();
  c.history_chunk_index.reset();
  c.history_step.reset();
  if (!j.at("history_chunk_index").is_null()) c.history_chunk_index = j["history_chunk_index"].get<std::size_t>();
  if (!j.at("history_step").is_null()) c.history_step = j["history_step"].get<std::size_t>();
}

inline void to_json(nlohmann::json& j, const GroupRecord& g) {
  j = nlohmann::json{{"video_id", g.video_id}, {"chunk_index", g.chunk_index}, {"seed", hex64(g.seed)},
                     {"context", g.context},   {"rewards", g.rewards},         {"baseline", g.baseline},
                     {"advantages", g.advantages}, {"violations", g.violations}};
}

inline std::uint64_t parse_hex64(const std::string& s) {
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw Error(ErrorCode::kParseError, "bad hex '" + s + "'");
  return v;
}

inline void from_json(const nlohmann::json& j, GroupRecord& g) {
  g.video_id = j.at("video_id").get<std::string>();
  g.chunk_index = j.at("chunk_index").get<std::size_t>();
  g.seed = parse_hex64(j.at("seed").get<std::string>());
  g.context = j.at("context").get<ContextRef>();
  g.rewards = j.at("rewards").get<std::vector<double>>();
  g.baseline = j.at("baseline").get<double>();
  g.advantages = j.at("advantages").get<std::vector<double>>();
  g.violations = j.at("violations").get<std::map<std::string, std::size_t>>();
}

inline void to_json(nlohmann::json& j, const StepRecord& r) {
  j = nlohmann::json{{"global_step", r.global_step},
                     {"phase", r.phase},
                     {"step_in_phase", r.step_in_phase},
                     {"trainable", to_string(r.trainable)},
                     {"status", r.status},
                     {"error", r.error},
                     {"truncated_phase", r.truncated_phase},
                     {"mean_reward", r.mean_reward},
                     {"frozen_hash_before", hex64(r.frozen_hash_before)},
                     {"frozen_hash_after", hex64(r.frozen_hash_after)},
                     {"trainable_hash_before", hex64(r.trainable_hash_before)},
                     {"trainable_hash_after", hex64(r.trainable_hash_after)},
                     {"groups", r.groups}};
}

inline void from_json(const nlohmann::json& j, StepRecord& r) {
  r.global_step = j.at("global_step").get<std::size_t>();
  r.phase = j.at("phase").get<std::size_t>();
  r.step_in_phase = j.at("step_in_phase").get<std::size_t>();
  r.trainable = modality_from_string(j.at("trainable").get<std::string>());
  r.status = j.at("status").get<std::string>();
  r.error = j.value("error", std::string());
  r.truncated_phase = j.value("truncated_phase", false);
  r.mean_reward = j.at("mean_reward").get<double>();
  r.frozen_hash_before = parse_hex64(j.at("frozen_hash_before").get<std::string>());
  r.frozen_hash_after = parse_hex64(j.at("frozen_hash_after").get<std::string>());
  r.trainable_hash_before = parse_hex64(j.at("trainable_hash_before").get<std::string>());
  r.trainable_hash_after = parse_hex64(j.at("trainable_hash_after").get<std::string>());
  r.groups = j.at("groups").get<std::vector<GroupRecord>>();
}

class TrainingLog {
 public:
  /// Records must arrive in strictly increasing (phase, step) order.
  void append(StepRecord record) {
    if (!records_.empty()) {
      const auto& last = records_.back();
      const bool increasing = record.global_step > last.global_step &&
                              (record.phase > last.phase ||
                               (record.phase == last.phase && record.step_in_phase > last.step_in_phase));
      if (!increasing) throw Error(ErrorCode::kInvalidArgument, "log records must be monotonically increasing");
    }
    records_.push_back(std::move(record));
  }

  const std::vector<StepRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  std::string to_jsonl() const {
    std::string out;
    for (const auto& r : records_) out += nlohmann::json(r).dump() + "\n";
    return out;
  }

  static TrainingLog from_jsonl(const std::string& text) {
    TrainingLog log;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (trim(line).empty()) continue;
      try {
        log.append(nlohmann::json::parse(line).get<StepRecord>());
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::kParseError, e.what(), lineno);
      }
    }
    return log;
  }

  friend bool operator==(const TrainingLog&, const TrainingLog&) = default;

 private:
  std::vector<StepRecord> records_;
};

}  // namespace tandem
