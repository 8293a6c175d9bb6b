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


// Chat-completion wire protocol over plain HTTP. Media is attached by
// reference (path or URL), never inlined.

#pragma once

#include <cstdlib>
#include <memory>
#include <string>

#include "httplib.h"
#include "json.hpp"
#include "tandem/model_client.hpp"

namespace tandem {

inline nlohmann::json chat_request_body(const InferenceRequest& req, const std::string& model) {
  nlohmann::json content = nlohmann::json::array();
  content.push_back({{"type", "text"}, {"text", req.prompt_text}});
  for (const auto& ref : req.media_refs) {
    if (req.modality == ModalityRole::kVision) {
      content.push_back({{"type", "image_url"}, {"image_url", {{"url", ref}}}});
    } else {
      content.push_back({{"type", "audio_url"}, {"audio_url", {{"url", ref}}}});
    }
  }
  nlohmann::json body = {
      {"model", model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", content}}})},
      {"max_tokens", req.max_tokens},
      {"logprobs", true},
  };
  if (req.decode.greedy) {
    body["temperature"] = 0.0;
  } else {
    body["temperature"] = req.decode.temperature;
    body["seed"] = req.decode.seed;
  }
  return body;
}

/// Reads choices[0].message.content and, when present, per-token logprobs.
inline InferenceResponse parse_chat_response(const std::string& body) {
  InferenceResponse out;
  try {
    const auto j = nlohmann::json::parse(body);
    const auto& choice = j.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    out.raw_text = content.is_null() ? std::string() : content.get<std::string>();
    if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
        choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
      std::vector<double> lp;
      for (const auto& tok : choice["logprobs"]["content"]) lp.push_back(tok.at("logprob").get<double>());
      out.token_logprobs = std::move(lp);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, e.what());
  }
  return out;
}

class HttpEndpoint : public Endpoint {
 public:
  explicit HttpEndpoint(EndpointConfig config) : config_(std::move(config)) {
    if (config_.base_url.empty()) throw Error(ErrorCode::kInvalidArgument, "endpoint base_url is empty");
  }

  InferenceResponse send(const InferenceRequest& request, std::chrono::milliseconds timeout) override {
    httplib::Client client(config_.base_url);
    const auto sec = timeout.count() / 1000;
    const auto usec = (timeout.count() % 1000) * 1000;
    client.set_connection_timeout(sec, usec);
    client.set_read_timeout(sec, usec);
    client.set_write_timeout(sec, usec);
    httplib::Headers headers;
    if (!config_.auth_token_env.empty()) {
      if (const char* token = std::getenv(config_.auth_token_env.c_str())) {
        headers.emplace("Authorization", std::string("Bearer ") + token);
      }
    }
    const std::string body = chat_request_body(request, config_.model).dump();
    auto res = client.Post(config_.path, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
        throw Error(ErrorCode::kTimeout, "no response within " + std::to_string(timeout.count()) + " ms");
      }
      throw Error(ErrorCode::kEndpointUnavailable, httplib::to_string(err));
    }
    if (res->status != 200) {
      throw Error(ErrorCode::kEndpointUnavailable, "HTTP " + std::to_string(res->status));
    }
    return parse_chat_response(res->body);
  }

  std::string describe() const override { return config_.base_url + config_.path; }

 private:
  EndpointConfig config_;
};

inline std::unique_ptr<Endpoint> make_endpoint(const EndpointConfig& config) {
  if (config.kind == "mock") return MockEndpoint::from_file(config.mock_script);
  if (config.kind == "http") return std::make_unique<HttpEndpoint>(config);
  throw Error(ErrorCode::kInvalidArgument, "unknown endpoint kind '" + config.kind + "'");
}

}  // namespace tandem
