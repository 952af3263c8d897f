// SPDX-License-Identifier: Apache-2.0
#include "labelcost/completion_backends.hpp"

#include <cstdlib>
#include <fstream>

#include <httplib.h>
#include <json.hpp>

#include "labelcost/errors.hpp"

namespace labelcost {
namespace {

using nlohmann::json;

Error malformed(const std::string& what) {
  return Error(ErrorKind::kMalformedResponse, "malformed completion response: " + what);
}

}  // namespace

std::string completion_request_json(const CompletionRequest& request, const std::string& model) {
  json body;
  body["model"] = model;
  body["prompt"] = request.prompt;
  body["max_tokens"] = request.max_tokens;
  body["stop"] = request.stop;
  body["temperature"] = request.temperature;
  body["logit_bias"] = request.logit_bias;
  body["logprobs"] = request.top_logprobs;
  return body.dump();
}

CompletionResponse parse_completion_response(const std::string& body) {
  json doc;
  try {
    doc = json::parse(body);
  } catch (const json::parse_error& e) {
    throw malformed(e.what());
  }
  try {
    const auto& choices = doc.at("choices");
    if (!choices.is_array() || choices.empty()) throw malformed("no choices");
    const auto& choice = choices.front();

    CompletionResponse out;
    out.text = choice.at("text").get<std::string>();
    if (choice.contains("logprobs") && !choice["logprobs"].is_null()) {
      const auto& lp = choice["logprobs"];
      const auto& tokens = lp.at("tokens");
      const auto& logits = lp.at("token_logprobs");
      if (tokens.size() != logits.size()) throw malformed("token and logit arrays differ in length");
      const json* top = lp.contains("top_logprobs") && lp["top_logprobs"].is_array()
                            ? &lp["top_logprobs"]
                            : nullptr;
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        GeneratedToken t;
        t.token = tokens[i].get<std::string>();
        t.logit = logits[i].get<double>();
        if (top != nullptr && i < top->size() && (*top)[i].is_object()) {
          for (const auto& [tok, value] : (*top)[i].items()) t.alternatives[tok] = value.get<double>();
        }
        t.alternatives.emplace(t.token, t.logit);
        out.tokens.push_back(std::move(t));
      }
    }
    if (doc.contains("usage")) {
      out.prompt_tokens = doc["usage"].value("prompt_tokens", std::size_t{0});
      out.completion_tokens = doc["usage"].value("completion_tokens", std::size_t{0});
    }
    return out;
  } catch (const json::exception& e) {
    throw malformed(e.what());
  }
}

HttpCompletionBackend::HttpCompletionBackend(HttpBackendConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorKind::kConfig, "endpoint must be an absolute http(s) URL");
  }
  const auto path_start = config_.endpoint.find('/', scheme_end + 3);
  origin_ = config_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
  if (config_.credential_env.empty()) {
    throw Error(ErrorKind::kConfig, "live backend needs a credential environment variable name");
  }
  const char* key = std::getenv(config_.credential_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw Error(ErrorKind::kConfig, "environment variable " + config_.credential_env + " is not set");
  }
  credential_ = key;
}

CompletionResponse HttpCompletionBackend::complete(const CompletionRequest& request) {
  httplib::Client client(origin_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_bearer_token_auth(credential_);

  const std::string body = completion_request_json(request, config_.model);
  auto result = client.Post(path_, body, "application/json");
  if (!result) {
    throw Error(ErrorKind::kTransport, "request failed: " + httplib::to_string(result.error()));
  }
  if (result->status == 429 || result->status >= 500) {
    throw Error(ErrorKind::kTransport, "server returned HTTP " + std::to_string(result->status));
  }
  if (result->status != 200) {
    throw Error(ErrorKind::kMalformedResponse,
                "server rejected request with HTTP " + std::to_string(result->status));
  }
  CompletionResponse parsed = parse_completion_response(result->body);
  if (config_.record_path) {
    std::lock_guard lock(record_mu_);
    std::ofstream out(*config_.record_path, std::ios::app | std::ios::binary);
    json line;
    line["prompt"] = request.prompt;
    line["response"] = json::parse(result->body);
    out << line.dump() << '\n';
  }
  return parsed;
}

RecordedBackend::RecordedBackend(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open recorded responses " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto doc = json::parse(line);
      bodies_[doc.at("prompt").get<std::string>()] = doc.at("response").dump();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::kParse, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

RecordedBackend::RecordedBackend(std::map<std::string, std::string> bodies_by_prompt)
    : bodies_(std::move(bodies_by_prompt)) {}

CompletionResponse RecordedBackend::complete(const CompletionRequest& request) {
  auto it = bodies_.find(request.prompt);
  if (it == bodies_.end()) {
    throw Error(ErrorKind::kMalformedResponse, "no recorded response for this prompt");
  }
  return parse_completion_response(it->second);
}

}  // namespace labelcost
