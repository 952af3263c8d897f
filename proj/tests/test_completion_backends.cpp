// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "labelcost/completion_backends.hpp"
#include "labelcost/errors.hpp"
#include "support.hpp"

using namespace labelcost;
using nlohmann::json;

namespace {

constexpr const char* kCredentialEnv = "LABELCOST_TEST_API_KEY";
constexpr const char* kCredential = "sk-test-123";

const char* kBody = R"({"choices":[{"text":"Positive","logprobs":{"tokens":["Positive"],
  "token_logprobs":[-0.1],"top_logprobs":[{"Positive":-0.1,"Negative":-2.4}]}}],
  "usage":{"prompt_tokens":12,"completion_tokens":1}})";

/// Local completion service answering with a fixed status sequence.
class MockServer {
 public:
  explicit MockServer(std::vector<int> statuses) : statuses_(std::move(statuses)) {
    server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const auto n = calls_++;
      {
        std::lock_guard lock(mu_);
        last_body_ = req.body;
        last_auth_ = req.get_header_value("Authorization");
      }
      const int status = n < statuses_.size() ? statuses_[n] : 200;
      res.status = status;
      res.set_content(status == 200 ? kBody : "{}", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }

  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/completions";
  }
  std::size_t calls() const { return calls_; }
  std::string last_body() const {
    std::lock_guard lock(mu_);
    return last_body_;
  }
  std::string last_auth() const {
    std::lock_guard lock(mu_);
    return last_auth_;
  }

 private:
  httplib::Server server_;
  std::vector<int> statuses_;
  std::atomic<std::size_t> calls_{0};
  mutable std::mutex mu_;
  std::string last_body_;
  std::string last_auth_;
  int port_ = 0;
  std::thread thread_;
};

HttpBackendConfig config_for(const MockServer& server) {
  ::setenv(kCredentialEnv, kCredential, 1);
  HttpBackendConfig c;
  c.endpoint = server.endpoint();
  c.model = "test-model";
  c.credential_env = kCredentialEnv;
  c.timeout = std::chrono::seconds(5);
  return c;
}

CompletionRequest sample_request() {
  CompletionRequest r;
  r.prompt = "Input: fine\nLabel:";
  r.max_tokens = 1;
  r.stop = "\n";
  r.logit_bias = {{"Positive", 100.0}, {"Negative", 100.0}};
  return r;
}

}  // namespace

TEST_CASE("request body carries prompt, decoding settings and bias") {
  const auto body = json::parse(completion_request_json(sample_request(), "m1"));
  CHECK(body["model"] == "m1");
  CHECK(body["prompt"] == "Input: fine\nLabel:");
  CHECK(body["max_tokens"] == 1);
  CHECK(body["temperature"] == 0.0);
  CHECK(body["stop"] == "\n");
  CHECK(body["logprobs"] == 5);
  CHECK(body["logit_bias"]["Positive"] == 100.0);
}

TEST_CASE("responses parse into tokens, alternatives and usage") {
  const auto r = parse_completion_response(kBody);
  CHECK(r.text == "Positive");
  REQUIRE(r.tokens.size() == 1);
  CHECK(r.tokens[0].logit == -0.1);
  CHECK(r.tokens[0].alternatives.at("Negative") == -2.4);
  CHECK(r.prompt_tokens == 12);
  CHECK(r.completion_tokens == 1);

  const auto bare = parse_completion_response(R"({"choices":[{"text":" a b"}]})");
  CHECK(bare.text == " a b");
  CHECK(bare.tokens.empty());
}

TEST_CASE("schema violations are malformed responses") {
  for (const char* body : {"not json", "{}", R"({"choices":[]})", R"({"choices":[{"txt":"x"}]})",
                           R"({"choices":[{"text":"x","logprobs":{"tokens":["a"],"token_logprobs":[]}}]})",
                           R"({"choices":[{"text":"x","logprobs":{"tokens":[1],"token_logprobs":[0.5]}}]})"}) {
    CAPTURE(body);
    try {
      parse_completion_response(body);
      FAIL("expected malformed response");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kMalformedResponse);
    }
  }
}

TEST_CASE("http backend posts json with the bearer token from the environment") {
  MockServer server({200});
  testing::TempDir dir;
  auto config = config_for(server);
  config.record_path = dir.file("exchanges.jsonl");
  HttpCompletionBackend backend(config);
  const auto response = backend.complete(sample_request());
  CHECK(response.text == "Positive");
  CHECK(server.calls() == 1);
  CHECK(server.last_auth() == std::string("Bearer ") + kCredential);
  const auto sent = json::parse(server.last_body());
  CHECK(sent["model"] == "test-model");
  CHECK(sent["prompt"] == "Input: fine\nLabel:");

  RecordedBackend replay(*config.record_path);
  CHECK(replay.size() == 1);
  const auto again = replay.complete(sample_request());
  CHECK(again.text == response.text);
  CHECK(again.tokens[0].alternatives == response.tokens[0].alternatives);
  CHECK(testing::read_file(*config.record_path).find(kCredential) == std::string::npos);

  auto other = sample_request();
  other.prompt = "unseen";
  CHECK_THROWS_AS(replay.complete(other), Error);
}

TEST_CASE("rate limits and server errors are transport failures") {
  for (int status : {429, 500, 503}) {
    MockServer server({status});
    HttpCompletionBackend backend(config_for(server));
    try {
      backend.complete(sample_request());
      FAIL("expected transport error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kTransport);
      CHECK(e.retryable());
    }
  }
  MockServer rejected({400});
  HttpCompletionBackend backend(config_for(rejected));
  try {
    backend.complete(sample_request());
    FAIL("expected malformed response");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kMalformedResponse);
  }
}

TEST_CASE("labeling retries a flaky server until it answers") {
  MockServer server({503, 429, 200});
  HttpCompletionBackend backend(config_for(server));
  PromptTemplate tmpl;
  tmpl.label_vocabulary = std::vector<std::string>{"Negative", "Positive"};
  LlmLabelingContext ctx;
  ctx.avg_tokens = 3;
  ctx.retry.initial_backoff = std::chrono::milliseconds(1);
  const auto out = llm_label(backend, tmpl, DemoSet(std::vector<Demo>{{"good", "Positive"}}),
                             testing::example("q", "fine"), ctx);
  CHECK(out.label == "Positive");
  CHECK(out.confidence == -0.1);
  CHECK(server.calls() == 3);
}

TEST_CASE("unreachable servers are transport failures") {
  ::setenv(kCredentialEnv, kCredential, 1);
  HttpBackendConfig c;
  c.endpoint = "http://127.0.0.1:1/v1/completions";
  c.credential_env = kCredentialEnv;
  c.timeout = std::chrono::seconds(2);
  HttpCompletionBackend backend(c);
  try {
    backend.complete(sample_request());
    FAIL("expected transport error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kTransport);
  }
}

TEST_CASE("a missing credential variable is a configuration error") {
  HttpBackendConfig c;
  c.endpoint = "http://127.0.0.1:9/v1/completions";
  c.credential_env = "LABELCOST_TEST_UNSET_VARIABLE";
  ::unsetenv(c.credential_env.c_str());
  try {
    HttpCompletionBackend backend(c);
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
  }
  c.credential_env.clear();
  CHECK_THROWS_AS(HttpCompletionBackend{c}, Error);
  c.credential_env = kCredentialEnv;
  c.endpoint = "127.0.0.1/v1";
  CHECK_THROWS_AS(HttpCompletionBackend{c}, Error);
}
