// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "labelcost/labelers.hpp"

namespace labelcost {

/// JSON body sent to the completion service.
std::string completion_request_json(const CompletionRequest& request, const std::string& model);

/// Parses a completion response body:
///   {"choices":[{"text":..., "logprobs":{"tokens":[...], "token_logprobs":[...],
///                "top_logprobs":[{token: logit}, ...]}}],
///    "usage":{"prompt_tokens":n, "completion_tokens":m}}
/// Throws Error(kMalformedResponse) on any schema violation.
CompletionResponse parse_completion_response(const std::string& body);

struct HttpBackendConfig {
  /// e.g. "http://127.0.0.1:8080/v1/completions"
  std::string endpoint;
  std::string model;
  /// Name of the environment variable holding the API key. The key itself
  /// never appears in config files or on the command line.
  std::string credential_env;
  std::chrono::seconds timeout{30};
  /// When set, every exchange is appended here for later replay.
  std::optional<std::filesystem::path> record_path;
};

/// Completion service reached over HTTP(S).
class HttpCompletionBackend final : public CompletionBackend {
 public:
  explicit HttpCompletionBackend(HttpBackendConfig config);

  CompletionResponse complete(const CompletionRequest& request) override;
  bool concurrent() const override { return true; }

 private:
  HttpBackendConfig config_;
  std::string origin_;
  std::string path_;
  std::string credential_;
  std::mutex record_mu_;
};

/// Replays exchanges recorded by HttpCompletionBackend, keyed by prompt.
class RecordedBackend final : public CompletionBackend {
 public:
  explicit RecordedBackend(const std::filesystem::path& path);
  explicit RecordedBackend(std::map<std::string, std::string> bodies_by_prompt);

  CompletionResponse complete(const CompletionRequest& request) override;
  bool concurrent() const override { return true; }
  std::size_t size() const { return bodies_.size(); }

 private:
  std::map<std::string, std::string> bodies_;
};

}  // namespace labelcost
