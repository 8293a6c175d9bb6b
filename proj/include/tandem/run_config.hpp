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


// Config file for end-to-end runs driven by the command-line tool.

#pragma once

#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tandem/dataset_io.hpp"
#include "tandem/error.hpp"
#include "tandem/grpo.hpp"
#include "tandem/http_endpoint.hpp"
#include "tandem/model_client.hpp"
#include "tandem/structured_output.hpp"
#include "tandem/tandem_scheduler.hpp"

namespace tandem {

/// Replaces each ${NAME} with the value of environment variable NAME.
/// Unset variables are an error.
inline std::string expand_env(const std::string& text) {
  std::string out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, 2, "${") == 0) {
      const auto close = text.find('}', i + 2);
      if (close == std::string::npos) throw Error(ErrorCode::kInvalidArgument, "unterminated ${ in '" + text + "'");
      const std::string name = text.substr(i + 2, close - i - 2);
      const char* value = std::getenv(name.c_str());
      if (!value) throw Error(ErrorCode::kInvalidArgument, "environment variable " + name + " is not set");
      out += value;
      i = close + 1;
    } else {
      out += text[i++];
    }
  }
  return out;
}

struct ToySettings {
  std::size_t videos = 8;
  std::uint64_t data_seed = 7;
  double max_duration = 95.0;
  double time_step = 0.5;
  std::size_t buckets = 16;
  double temperature = 1.0;
  ToyTrainingOptions training;
};

struct RunConfig {
  std::string taxonomy = "hatemm";
  std::string taxonomy_file;  // optional; builtin presets otherwise
  std::string manifest;       // optional dataset manifest; synthetic data otherwise
  std::string split = "train";
  std::string eval_split = "test";
  TandemConfig tandem;
  ToySettings toy;
  std::optional<EndpointConfig> vision_endpoint;
  std::optional<EndpointConfig> audio_endpoint;
  double sampling_temperature = 1.0;
  std::string update_sink;
  std::string out_dir;
  nlohmann::json raw;

  bool uses_endpoints() const { return vision_endpoint.has_value() || audio_endpoint.has_value(); }

  DatasetTaxonomy resolve_taxonomy() const {
    const auto all = taxonomy_file.empty() ? builtin_taxonomies() : load_taxonomies(taxonomy_file);
    auto it = all.find(taxonomy);
    if (it == all.end()) throw Error(ErrorCode::kInvalidArgument, "unknown taxonomy '" + taxonomy + "'");
    return it->second;
  }
};

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  c.raw = j;
  auto path = [&](const char* key) { return j.contains(key) ? expand_env(j.at(key).get<std::string>()) : std::string(); };
  c.taxonomy = j.value("taxonomy", c.taxonomy);
  c.taxonomy_file = path("taxonomy_file");
  c.manifest = path("manifest");
  c.split = j.value("split", c.split);
  c.eval_split = j.value("eval_split", c.eval_split);
  c.update_sink = path("update_sink");
  c.out_dir = path("out_dir");
  if (j.contains("tandem")) c.tandem = j.at("tandem").get<TandemConfig>();
  if (j.contains("toy")) {
    const auto& t = j.at("toy");
    c.toy.videos = t.value("videos", c.toy.videos);
    c.toy.data_seed = t.value("data_seed", c.toy.data_seed);
    c.toy.max_duration = t.value("max_duration", c.toy.max_duration);
    c.toy.time_step = t.value("time_step", c.toy.time_step);
    c.toy.buckets = t.value("buckets", c.toy.buckets);
    c.toy.temperature = t.value("temperature", c.toy.temperature);
    c.toy.training.learning_rate = t.value("learning_rate", c.toy.training.learning_rate);
    c.toy.training.kl_coefficient = t.value("kl_coefficient", c.toy.training.kl_coefficient);
    c.toy.training.max_tokens = t.value("max_tokens", c.toy.training.max_tokens);
    if (t.contains("loss_variant")) c.toy.training.variant = loss_variant_from_string(t.at("loss_variant").get<std::string>());
  }
  if (j.contains("endpoints")) {
    const auto& e = j.at("endpoints");
    auto endpoint = [&](const char* key) -> std::optional<EndpointConfig> {
      if (!e.contains(key)) return std::nullopt;
      auto cfg = e.at(key).get<EndpointConfig>();
      cfg.base_url = expand_env(cfg.base_url);
      cfg.mock_script = expand_env(cfg.mock_script);
      return cfg;
    };
    c.vision_endpoint = endpoint("vision");
    c.audio_endpoint = endpoint("audio");
    if (c.vision_endpoint.has_value() != c.audio_endpoint.has_value()) {
      throw Error(ErrorCode::kInvalidArgument, "endpoints must configure both vision and audio");
    }
    c.sampling_temperature = e.value("temperature", c.sampling_temperature);
  }
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open config " + path);
  try {
    return run_config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, path + ": " + e.what());
  }
}

/// Chunk tasks and annotations for one split of a manifest.
inline SyntheticDataset dataset_from_manifest(const DatasetManifest& manifest, const std::string& split,
                                              const LabelTaxonomy& tax) {
  SyntheticDataset ds;
  for (const DatasetRecord* r : manifest.split(split)) {
    for (auto& t : chunk_tasks(r->annotation, r->media, tax)) ds.tasks.push_back(std::move(t));
    ds.annotations.push_back(r->annotation);
    ds.media.push_back(r->media);
  }
  return ds;
}

}  // namespace tandem
