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


// Chunk planning for long media. Works from duration-bearing manifests only;
// decoding is described by inert extraction commands for an external tool.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tandem/error.hpp"
#include "tandem/util.hpp"

namespace tandem {

inline constexpr double kChunkSeconds = 30.0;
inline constexpr std::size_t kMaxFramesPerChunk = 24;
inline constexpr int kAudioSampleRate = 16000;

struct MediaManifest {
  std::string video_id;
  double duration = 0.0;
  bool has_audio = true;
  std::optional<std::vector<double>> scene_cuts;  // absent: detector failed or not run
  std::string source;                             // media locator; defaults to video_id

  const std::string& locator() const { return source.empty() ? video_id : source; }

  friend bool operator==(const MediaManifest&, const MediaManifest&) = default;
};

enum class AudioDescriptor { kMono16kSegment, kSilentPlaceholder };

inline const char* to_string(AudioDescriptor a) {
  return a == AudioDescriptor::kMono16kSegment ? "mono-16khz-segment" : "silent-placeholder";
}

struct ChunkPlan {
  std::size_t chunk_index = 0;
  double start = 0.0;
  double end = 0.0;
  std::vector<double> frame_times;
  AudioDescriptor audio = AudioDescriptor::kMono16kSegment;

  double length() const { return end - start; }

  friend bool operator==(const ChunkPlan&, const ChunkPlan&) = default;
};

inline void validate(const MediaManifest& m) {
  if (!std::isfinite(m.duration) || m.duration < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "duration must be finite and >= 0 for " + m.video_id);
  }
  if (m.scene_cuts) {
    double prev = -1.0;
    for (double t : *m.scene_cuts) {
      if (!std::isfinite(t) || t < 0.0 || t > m.duration) {
        throw Error(ErrorCode::kInvalidArgument, "scene cut outside [0, duration] for " + m.video_id);
      }
      if (t <= prev) {
        throw Error(ErrorCode::kInvalidArgument, "scene cuts not strictly increasing for " + m.video_id);
      }
      prev = t;
    }
  }
}

/// Frame times for one chunk. With scene cuts: one midpoint per scene segment
/// intersecting the chunk, keeping the 24 longest (earlier start wins ties).
/// Without: uniform sampling at ~1 fps, capped at 24, centred in each slot.
inline std::vector<double> frame_schedule(double start, double end,
                                          const std::optional<std::vector<double>>& scene_cuts) {
  if (!(end > start) || !std::isfinite(start) || !std::isfinite(end)) {
    throw Error(ErrorCode::kEmptyChunk, "chunk end must exceed start");
  }
  std::vector<double> times;
  if (scene_cuts) {
    // slivers too thin to hold a distinct midpoint merge into their neighbour
    auto splits = [](double a, double b) { return a + 0.5 * (b - a) > a && a + 0.5 * (b - a) < b; };
    std::vector<double> bounds{start};
    for (double cut : *scene_cuts) {
      if (cut > start && cut < end && splits(bounds.back(), cut)) bounds.push_back(cut);
    }
    if (bounds.size() > 1 && !splits(bounds.back(), end)) bounds.pop_back();
    bounds.push_back(end);
    struct Scene {
      double start, end;
    };
    std::vector<Scene> scenes;
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) scenes.push_back({bounds[i], bounds[i + 1]});
    if (scenes.size() > kMaxFramesPerChunk) {
      std::stable_sort(scenes.begin(), scenes.end(), [](const Scene& a, const Scene& b) {
        const double la = a.end - a.start, lb = b.end - b.start;
        return la > lb || (la == lb && a.start < b.start);
      });
      scenes.resize(kMaxFramesPerChunk);
      std::sort(scenes.begin(), scenes.end(),
                [](const Scene& a, const Scene& b) { return a.start < b.start; });
    }
    for (const Scene& s : scenes) times.push_back(s.start + 0.5 * (s.end - s.start));
    return times;
  }
  const double span = end - start;
  const auto whole_seconds = static_cast<std::size_t>(std::floor(span));
  const std::size_t n = std::clamp<std::size_t>(whole_seconds, 1, kMaxFramesPerChunk);
  const double step = span / static_cast<double>(n);
  times.reserve(n);
  for (std::size_t k = 0; k < n; ++k) times.push_back(start + (static_cast<double>(k) + 0.5) * step);
  return times;
}

/// Tiles [0, duration] into 30 s chunks with a trailing partial chunk.
inline std::vector<ChunkPlan> plan_chunks(const MediaManifest& manifest) {
  if (!(manifest.duration > 0.0)) {
    throw Error(ErrorCode::kZeroDuration, "duration must be positive for " + manifest.video_id);
  }
  validate(manifest);
  const double d = manifest.duration;
  auto count = static_cast<std::size_t>(std::floor(d / kChunkSeconds));
  while (static_cast<double>(count) * kChunkSeconds < d) ++count;
  while (count > 1 && static_cast<double>(count - 1) * kChunkSeconds >= d) --count;

  std::vector<ChunkPlan> plans;
  plans.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    ChunkPlan plan;
    plan.chunk_index = i;
    plan.start = static_cast<double>(i) * kChunkSeconds;
    plan.end = i + 1 == count ? d : static_cast<double>(i + 1) * kChunkSeconds;
    plan.frame_times = frame_schedule(plan.start, plan.end, manifest.scene_cuts);
    plan.audio = manifest.has_audio ? AudioDescriptor::kMono16kSegment
                                    : AudioDescriptor::kSilentPlaceholder;
    plans.push_back(std::move(plan));
  }
  return plans;
}

// ---- extraction descriptors ----

enum class ExtractionKind { kAudioSegment, kSynthesizeSilence, kFrameGrab };

inline const char* to_string(ExtractionKind k) {
  switch (k) {
    case ExtractionKind::kAudioSegment: return "audio-segment";
    case ExtractionKind::kSynthesizeSilence: return "synthesize-silence";
    case ExtractionKind::kFrameGrab: return "frame-grab";
  }
  return "unknown";
}

/// An inert description of one external-tool call. Never executed here.
struct ExtractionCommand {
  ExtractionKind kind = ExtractionKind::kAudioSegment;
  std::string video_id;
  std::size_t chunk_index = 0;
  double start = 0.0;     // seek position (frame time for frame grabs)
  double duration = 0.0;  // zero for frame grabs
  std::string output;
  std::vector<std::string> argv;

  bool synthesize_silence() const { return kind == ExtractionKind::kSynthesizeSilence; }
};

inline std::vector<ExtractionCommand> render_extraction_commands(const std::vector<ChunkPlan>& plans,
                                                                 const MediaManifest& manifest) {
  std::vector<ExtractionCommand> out;
  const std::string rate = std::to_string(kAudioSampleRate);
  for (const ChunkPlan& plan : plans) {
    const std::string stem = manifest.video_id + "/chunk_" + std::to_string(plan.chunk_index);
    ExtractionCommand audio;
    audio.video_id = manifest.video_id;
    audio.chunk_index = plan.chunk_index;
    audio.start = plan.start;
    audio.duration = plan.length();
    audio.output = stem + "/audio.wav";
    if (plan.audio == AudioDescriptor::kSilentPlaceholder) {
      audio.kind = ExtractionKind::kSynthesizeSilence;
      audio.argv = {"ffmpeg", "-y", "-f", "lavfi", "-i", "anullsrc=r=" + rate + ":cl=mono",
                    "-t", format_double(audio.duration), audio.output};
    } else {
      audio.kind = ExtractionKind::kAudioSegment;
      audio.argv = {"ffmpeg", "-y", "-ss", format_double(plan.start), "-t",
                    format_double(audio.duration), "-i", manifest.locator(), "-vn", "-ac", "1",
                    "-ar", rate, audio.output};
    }
    out.push_back(std::move(audio));
    for (std::size_t k = 0; k < plan.frame_times.size(); ++k) {
      ExtractionCommand frame;
      frame.kind = ExtractionKind::kFrameGrab;
      frame.video_id = manifest.video_id;
      frame.chunk_index = plan.chunk_index;
      frame.start = plan.frame_times[k];
      frame.output = stem + "/frame_" + std::to_string(k) + ".jpg";
      frame.argv = {"ffmpeg", "-y", "-ss", format_double(frame.start), "-i", manifest.locator(),
                    "-frames:v", "1", frame.output};
      out.push_back(std::move(frame));
    }
  }
  return out;
}

// ---- line-delimited serialization ----

inline void to_json(nlohmann::json& j, const MediaManifest& m) {
  j = nlohmann::json{{"video_id", m.video_id}, {"duration", m.duration}, {"has_audio", m.has_audio}};
  if (m.scene_cuts) j["scene_cuts"] = *m.scene_cuts;
  if (!m.source.empty()) j["source"] = m.source;
}

inline void from_json(const nlohmann::json& j, MediaManifest& m) {
  m.video_id = j.at("video_id").get<std::string>();
  m.duration = j.at("duration").get<double>();
  m.has_audio = j.value("has_audio", true);
  m.scene_cuts.reset();
  if (j.contains("scene_cuts") && !j.at("scene_cuts").is_null()) {
    m.scene_cuts = j.at("scene_cuts").get<std::vector<double>>();
  }
  m.source = j.value("source", std::string());
}

inline void to_json(nlohmann::json& j, const ChunkPlan& p) {
  j = nlohmann::json{{"chunk_index", p.chunk_index}, {"start", p.start},      {"end", p.end},
                     {"frame_times", p.frame_times},  {"audio", to_string(p.audio)}};
}

inline void from_json(const nlohmann::json& j, ChunkPlan& p) {
  p.chunk_index = j.at("chunk_index").get<std::size_t>();
  p.start = j.at("start").get<double>();
  p.end = j.at("end").get<double>();
  p.frame_times = j.at("frame_times").get<std::vector<double>>();
  const auto audio = j.at("audio").get<std::string>();
  if (audio == "mono-16khz-segment") {
    p.audio = AudioDescriptor::kMono16kSegment;
  } else if (audio == "silent-placeholder") {
    p.audio = AudioDescriptor::kSilentPlaceholder;
  } else {
    throw Error(ErrorCode::kParseError, "unknown audio descriptor '" + audio + "'");
  }
}

inline void to_json(nlohmann::json& j, const ExtractionCommand& c) {
  j = nlohmann::json{{"kind", to_string(c.kind)}, {"video_id", c.video_id},
                     {"chunk_index", c.chunk_index}, {"start", c.start},
                     {"duration", c.duration}, {"output", c.output}, {"argv", c.argv}};
}

}  // namespace tandem
