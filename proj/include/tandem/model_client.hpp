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


// Inference endpoints for the vision-language and audio-language models.
// An Endpoint performs one wire attempt; complete() layers the timeout and
// retry budget on top, and batch_complete() bounds requests in flight.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "tandem/error.hpp"
#include "tandem/grpo.hpp"
#include "tandem/modality.hpp"
#include "tandem/util.hpp"

namespace tandem {

struct DecodeParams {
  bool greedy = true;
  double temperature = 1.0;
  std::uint64_t seed = 0;

  static DecodeParams sample(double temperature, std::uint64_t seed) { return {false, temperature, seed}; }
};

struct InferenceRequest {
  ModalityRole modality = ModalityRole::kVision;
  std::string prompt_text;
  std::vector<std::string> media_refs;  // frame images for vision, audio clips for audio
  DecodeParams decode;
  std::size_t max_tokens = kDefaultMaxTokens;
  std::string tag;  // caller-chosen key, e.g. "<video>#<chunk>"
};

struct InferenceResponse {
  std::string raw_text;
  std::optional<std::vector<double>> token_logprobs;
  std::int64_t latency_ms = 0;
  int attempts = 1;
};

namespace detail {

inline bool has_suffix(std::string_view s, std::string_view suffix) {
  if (s.size() < suffix.size()) return false;
  return to_lower(s.substr(s.size() - suffix.size())) == suffix;
}

inline bool is_image_ref(std::string_view ref) {
  return has_suffix(ref, ".jpg") || has_suffix(ref, ".jpeg") || has_suffix(ref, ".png") ||
         has_suffix(ref, ".webp") || has_suffix(ref, ".bmp");
}

inline bool is_audio_ref(std::string_view ref) {
  return has_suffix(ref, ".wav") || has_suffix(ref, ".flac") || has_suffix(ref, ".mp3") ||
         has_suffix(ref, ".ogg");
}

}  // namespace detail

inline void validate(const InferenceRequest& req) {
  if (req.max_tokens < 1) throw Error(ErrorCode::kInvalidArgument, "max_tokens must be >= 1");
  if (!req.decode.greedy && !(req.decode.temperature > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "sampling temperature must be positive");
  }
  for (const auto& ref : req.media_refs) {
    const bool ok = req.modality == ModalityRole::kVision ? detail::is_image_ref(ref) : detail::is_audio_ref(ref);
    if (!ok) {
      throw Error(ErrorCode::kInvalidArgument,
                  "media ref '" + ref + "' does not match modality " + to_string(req.modality));
    }
  }
}

class Endpoint {
 public:
  virtual ~Endpoint() = default;
  /// One wire attempt. Failures throw Error with a retryable code.
  virtual InferenceResponse send(const InferenceRequest& request, std::chrono::milliseconds timeout) = 0;
  virtual std::string describe() const = 0;
};

struct ClientConfig {
  std::chrono::milliseconds timeout{30000};
  int retry_budget = 2;
  std::size_t max_in_flight = 4;
  std::chrono::milliseconds backoff{0};
};

/// At most 1 + retry_budget wire attempts. The final error carries the count.
inline InferenceResponse complete(Endpoint& endpoint, const InferenceRequest& request, const ClientConfig& config) {
  validate(request);
  if (config.retry_budget < 0) throw Error(ErrorCode::kInvalidArgument, "retry budget must be >= 0");
  const int max_attempts = 1 + config.retry_budget;
  for (int attempt = 1;; ++attempt) {
    try {
      const auto t0 = std::chrono::steady_clock::now();
      InferenceResponse resp = endpoint.send(request, config.timeout);
      resp.latency_ms =
          std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
      resp.attempts = attempt;
      return resp;
    } catch (const Error& e) {
      if (!is_retryable(e.code()) || attempt >= max_attempts) throw e.with_attempts(attempt);
      if (config.backoff.count() > 0) std::this_thread::sleep_for(config.backoff * attempt);
    }
  }
}

struct CompletionResult {
  std::optional<InferenceResponse> response;
  std::optional<Error> error;

  bool ok() const { return response.has_value(); }
};

/// Results are index-aligned with `requests`; one failure does not affect others.
inline std::vector<CompletionResult> batch_complete(Endpoint& endpoint, std::span<const InferenceRequest> requests,
                                                    const ClientConfig& config, std::size_t max_in_flight) {
  if (max_in_flight < 1) throw Error(ErrorCode::kInvalidArgument, "max_in_flight must be >= 1");
  std::vector<CompletionResult> results(requests.size());
  if (requests.empty()) return results;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next.fetch_add(1); i < requests.size(); i = next.fetch_add(1)) {
      try {
        results[i].response = complete(endpoint, requests[i], config);
      } catch (const Error& e) {
        results[i].error = e;
      } catch (const std::exception& e) {
        results[i].error = Error(ErrorCode::kEndpointUnavailable, e.what());
      }
    }
  };
  const std::size_t workers = std::min(max_in_flight, requests.size());
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return results;
}

/// Scripted endpoint. Key is "<modality>:<tag>", falling back to "<modality>:*"
/// and then "*". Greedy requests always get the first entry; a sampled request
/// gets entry (seed mod count).
class MockEndpoint : public Endpoint {
 public:
  struct Options {
    std::chrono::milliseconds latency{0};
    std::set<std::string> failing_tags;             // always EndpointUnavailable
    std::map<std::string, int> transient_failures;  // tag -> failures before success
  };

  using Script = std::map<std::string, std::vector<std::string>>;

  MockEndpoint() = default;
  explicit MockEndpoint(Script script) : script_(std::move(script)) {}
  MockEndpoint(Script script, Options options)
      : script_(std::move(script)), options_(std::move(options)) {}

  /// {"responses": {"vision:<tag>": ["...", ...], ...}, "latency_ms": 0}
  static std::unique_ptr<MockEndpoint> from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open mock script " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParseError, path + ": " + e.what());
    }
    Options options;
    options.latency = std::chrono::milliseconds(j.value("latency_ms", 0));
    return std::make_unique<MockEndpoint>(
        j.at("responses").get<std::map<std::string, std::vector<std::string>>>(), options);
  }

  InferenceResponse send(const InferenceRequest& request, std::chrono::milliseconds timeout) override {
    attempts_.fetch_add(1);
    const int now = in_flight_.fetch_add(1) + 1;
    int peak = peak_.load();
    while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
    }
    struct Release {
      std::atomic<int>& counter;
      ~Release() { counter.fetch_sub(1); }
    } release{in_flight_};

    if (options_.failing_tags.count(request.tag)) {
      throw Error(ErrorCode::kEndpointUnavailable, "mock failure for " + request.tag);
    }
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = options_.transient_failures.find(request.tag);
      if (it != options_.transient_failures.end() && it->second > 0) {
        --it->second;
        throw Error(ErrorCode::kEndpointUnavailable, "transient mock failure for " + request.tag);
      }
    }
    if (options_.latency > timeout) {
      std::this_thread::sleep_for(timeout);
      throw Error(ErrorCode::kTimeout, "mock latency exceeds timeout");
    }
    if (options_.latency.count() > 0) std::this_thread::sleep_for(options_.latency);

    const std::string key = std::string(to_string(request.modality)) + ":" + request.tag;
    std::lock_guard<std::mutex> lock(mu_);
    auto it = script_.find(key);
    if (it == script_.end()) it = script_.find(std::string(to_string(request.modality)) + ":*");
    if (it == script_.end()) it = script_.find("*");
    if (it == script_.end() || it->second.empty()) {
      throw Error(ErrorCode::kEndpointUnavailable, "no scripted response for " + key);
    }
    InferenceResponse resp;
    // sampled responses depend only on the seed, never on arrival order
    resp.raw_text = request.decode.greedy ? it->second.front() : it->second[request.decode.seed % it->second.size()];
    return resp;
  }

  std::string describe() const override { return "mock"; }

  int peak_in_flight() const { return peak_.load(); }
  int total_attempts() const { return attempts_.load(); }

 private:
  std::map<std::string, std::vector<std::string>> script_;
  Options options_;
  std::mutex mu_;
  std::atomic<int> in_flight_{0};
  std::atomic<int> peak_{0};
  std::atomic<int> attempts_{0};
};

// ---- endpoint config ----

struct EndpointConfig {
  std::string kind = "http";  // "http" or "mock"
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model;
  std::string auth_token_env;  // name of the env var holding the bearer token
  std::string mock_script;     // path, for kind == "mock"
  ClientConfig client;
};

inline void from_json(const nlohmann::json& j, EndpointConfig& c) {
  c.kind = j.value("kind", std::string("http"));
  c.base_url = j.value("base_url", std::string());
  c.path = j.value("path", std::string("/v1/chat/completions"));
  c.model = j.value("model", std::string());
  c.auth_token_env = j.value("auth_token_env", std::string());
  c.mock_script = j.value("mock_script", std::string());
  c.client.timeout = std::chrono::milliseconds(j.value("timeout_ms", 30000));
  c.client.retry_budget = j.value("retry_budget", 2);
  c.client.max_in_flight = j.value("max_in_flight", std::size_t{4});
}

inline void to_json(nlohmann::json& j, const EndpointConfig& c) {
  j = nlohmann::json{{"kind", c.kind},
                     {"base_url", c.base_url},
                     {"path", c.path},
                     {"model", c.model},
                     {"auth_token_env", c.auth_token_env},
                     {"mock_script", c.mock_script},
                     {"timeout_ms", c.client.timeout.count()},
                     {"retry_budget", c.client.retry_budget},
                     {"max_in_flight", c.client.max_in_flight}};
}

}  // namespace tandem
