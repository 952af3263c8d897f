// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <deque>
#include <random>
#include <set>

#include "labelcost/errors.hpp"
#include "labelcost/labelers.hpp"
#include "support.hpp"

using namespace labelcost;

namespace {

PromptTemplate sentiment_template() {
  PromptTemplate t;
  t.instruction = "Classify the sentiment.";
  t.label_vocabulary = std::vector<std::string>{"Positive", "Negative"};
  return t;
}

/// Replays scripted responses or failures in order and records requests.
class ScriptedBackend final : public CompletionBackend {
 public:
  struct Step {
    std::optional<CompletionResponse> response;
    ErrorKind failure = ErrorKind::kTransport;
  };

  void respond(CompletionResponse r) { steps_.push_back({std::move(r), {}}); }
  void fail(ErrorKind kind) { steps_.push_back({std::nullopt, kind}); }

  CompletionResponse complete(const CompletionRequest& request) override {
    requests.push_back(request);
    REQUIRE_FALSE(steps_.empty());
    Step s = steps_.front();
    steps_.pop_front();
    if (!s.response) throw Error(s.failure, "scripted failure");
    return *s.response;
  }

  std::vector<CompletionRequest> requests;

 private:
  std::deque<Step> steps_;
};

CompletionResponse first_token(std::string token, double logit, std::map<std::string, double> alts) {
  CompletionResponse r;
  r.text = token;
  r.tokens.push_back({std::move(token), logit, std::move(alts)});
  r.prompt_tokens = 30;
  r.completion_tokens = 1;
  return r;
}

LlmLabelingContext fast_context(TaskKind kind, double avg_tokens) {
  LlmLabelingContext ctx;
  ctx.kind = kind;
  ctx.avg_tokens = avg_tokens;
  ctx.retry.initial_backoff = std::chrono::milliseconds(0);
  return ctx;
}

}  // namespace

TEST_CASE("one-shot prompt renders instruction, demo, then the open query") {
  const DemoSet demos(std::vector<Demo>{{"the movie was great", "Positive"}});
  const auto prompt = build_prompt(sentiment_template(), demos, "a dull film");
  CHECK(prompt ==
        "Classify the sentiment.\n\n"
        "Input: the movie was great\nLabel: Positive\n\n"
        "Input: a dull film\nLabel:");
}

TEST_CASE("prompts differ only in the query section") {
  const DemoSet demos(std::vector<Demo>{{"great", "Positive"}, {"awful", "Negative"}});
  const auto a = build_prompt(sentiment_template(), demos, "first query");
  const auto b = build_prompt(sentiment_template(), demos, "second one");
  const auto prefix_a = a.substr(0, a.rfind("Input: "));
  const auto prefix_b = b.substr(0, b.rfind("Input: "));
  CHECK(prefix_a == prefix_b);
  CHECK(a.substr(prefix_a.size()) == "Input: first query\nLabel:");
}

TEST_CASE("build_prompt is injective in the query text") {
  const DemoSet demos(std::vector<Demo>{{"x {label} y", "Positive"}});
  std::mt19937_64 gen(5);
  const std::vector<std::string> pieces{"a", "b", " ", "{input}", "{label}", "\n", "Label:"};
  std::set<std::string> queries;
  std::set<std::string> prompts;
  for (int i = 0; i < 3000; ++i) {
    std::string q;
    for (std::size_t k = gen() % 6; k > 0; --k) q += pieces[gen() % pieces.size()];
    if (!queries.insert(q).second) continue;
    prompts.insert(build_prompt(sentiment_template(), demos, q));
  }
  CHECK(prompts.size() == queries.size());
}

TEST_CASE("over-length prompts signal the overflow") {
  PromptTemplate t = sentiment_template();
  std::string long_input;
  for (int i = 0; i < 2100; ++i) long_input += "w ";
  const DemoSet demos(std::vector<Demo>{{long_input, "Positive"}});
  try {
    build_prompt(t, demos, "q");
    FAIL("expected PromptTooLong");
  } catch (const PromptTooLong& e) {
    CHECK(e.kind() == ErrorKind::kPromptTooLong);
    // instruction 3 + demo (1 + 2100 + 2) + query (2 + 1)
    CHECK(e.overflow() == 2109 - 2048);
  }
}

TEST_CASE("templates must carry each slot exactly once") {
  PromptTemplate t;
  t.demo_format = "{input} only";
  CHECK_THROWS_AS(t.validate(), Error);
  t = PromptTemplate{};
  t.query_format = "{input} {input}";
  CHECK_THROWS_AS(t.validate(), Error);
  t = PromptTemplate{};
  t.query_format = "{input} {label}";
  CHECK_THROWS_AS(t.validate(), Error);
  t = PromptTemplate{};
  t.stop_sequence.clear();
  CHECK_THROWS_AS(t.validate(), Error);
  CHECK_THROWS_AS(DemoSet(std::vector<Demo>{}), Error);
}

TEST_CASE("constrain_first_token filters to vocabulary tokens") {
  const std::vector<std::string> vocab{"Positive", "Negative"};
  const std::map<std::string, std::string> firsts{{"Positive", "Pos"}, {"Negative", "Neg"}};
  const auto picked = constrain_first_token({{"Pos", 0.9}, {"Neg", 0.1}, {"the", 2.0}}, vocab, firsts);
  CHECK(picked.label == "Positive");
  CHECK(picked.logit == 0.9);

  const auto tie = constrain_first_token({{"Positive", 0.5}, {"Negative", 0.5}}, vocab);
  CHECK(tie.label == "Negative");

  const auto spaced = constrain_first_token({{" Positive", -0.2}, {" Negative", -1.5}}, vocab);
  CHECK(spaced.label == "Positive");

  try {
    constrain_first_token({{"the", 1.0}}, vocab);
    FAIL("expected unmappable label");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUnmappableLabel);
  }
}

TEST_CASE("default logit bias lifts every label's first token") {
  PromptTemplate t = sentiment_template();
  t.label_first_tokens = {{"Positive", "Pos"}};
  const auto bias = t.effective_logit_bias();
  CHECK(bias == std::map<std::string, double>{{"Negative", 100.0}, {"Pos", 100.0}});
  t.logit_bias = {{"123", 5.0}};
  CHECK(t.effective_logit_bias() == t.logit_bias);
}

TEST_CASE("classification labeling keeps the constrained first token") {
  ScriptedBackend backend;
  backend.respond(first_token("Positive", 1.2, {{"Positive", 1.2}, {"Negative", 0.3}}));
  const auto tmpl = sentiment_template();
  const DemoSet demos(std::vector<Demo>{{"great", "Positive"}, {"awful", "Negative"}});
  const auto query = testing::example("q1", "good stuff", "Positive");
  const auto out = llm_label(backend, tmpl, demos, query, fast_context(TaskKind::kClassification, 19.3));
  CHECK(out.label == "Positive");
  CHECK(out.confidence == 1.2);
  CHECK(out.source == LabelSource::kLlm);
  CHECK(out.shots_used == 2);
  CHECK(out.cost.micros() == 2316);

  REQUIRE(backend.requests.size() == 1);
  const auto& req = backend.requests.front();
  CHECK(req.max_tokens == 1);
  CHECK(req.temperature == 0.0);
  CHECK(req.stop == "\n");
  CHECK(req.logit_bias == std::map<std::string, double>{{"Negative", 100.0}, {"Positive", 100.0}});
  CHECK(req.prompt == build_prompt(tmpl, demos, "good stuff"));
}

TEST_CASE("classification output never leaves the vocabulary") {
  std::mt19937_64 gen(17);
  const std::vector<std::string> tokens{"Positive", "Negative", "the", "Neutral", " Positive"};
  for (int i = 0; i < 300; ++i) {
    std::map<std::string, double> alts;
    for (const auto& t : tokens) {
      if (gen() % 2) alts[t] = static_cast<double>(gen() % 1000) / 100.0 - 5.0;
    }
    const std::string chosen = tokens[gen() % tokens.size()];
    ScriptedBackend backend;
    backend.respond(first_token(chosen, -0.5, alts));
    try {
      const auto out = llm_label(backend, sentiment_template(), DemoSet(std::vector<Demo>{{"x", "Positive"}}),
                                 testing::example("q", "y"), fast_context(TaskKind::kClassification, 5));
      CHECK((out.label == "Positive" || out.label == "Negative"));
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::kUnmappableLabel);
    }
  }
}

TEST_CASE("generation labeling keeps text up to the stop sequence") {
  ScriptedBackend backend;
  CompletionResponse r;
  r.text = " police arrest suspect in bank robbery\nArticle: next";
  r.tokens = {{"police", -0.5, {}}, {"arrest", -1.5, {}}, {"suspect", -1.0, {}}};
  r.prompt_tokens = 40;
  r.completion_tokens = 9;
  backend.respond(r);
  PromptTemplate tmpl;
  tmpl.demo_format = "Article: {input}\nHeadline: {label}";
  tmpl.query_format = "Article: {input}\nHeadline:";
  auto ctx = fast_context(TaskKind::kGeneration, 31);
  const auto out = llm_label(backend, tmpl, DemoSet(std::vector<Demo>{{"a", "b"}}), testing::example("g", "long article"), ctx);
  CHECK(out.label == "police arrest suspect in bank robbery");
  CHECK(out.confidence == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(out.cost.micros() == 2480);
  CHECK(backend.requests.front().max_tokens == tmpl.max_output_tokens);
  CHECK(backend.requests.front().logit_bias.empty());

  backend.respond(r);
  ctx.accounting = CostAccounting::kActualUsage;
  const auto actual = llm_label(backend, tmpl, DemoSet(std::vector<Demo>{{"a", "b"}}), testing::example("g", "long article"), ctx);
  CHECK(actual.cost.micros() == 49 * 40);
}

TEST_CASE("transport errors are retried, then rethrown") {
  const auto ctx = fast_context(TaskKind::kClassification, 5);
  {
    ScriptedBackend backend;
    backend.fail(ErrorKind::kTransport);
    backend.fail(ErrorKind::kTransport);
    backend.respond(first_token("Negative", 0.1, {}));
    const auto out = llm_label(backend, sentiment_template(), DemoSet(std::vector<Demo>{{"x", "Positive"}}),
                               testing::example("q", "y"), ctx);
    CHECK(out.label == "Negative");
    CHECK(backend.requests.size() == 3);
  }
  {
    ScriptedBackend backend;
    for (int i = 0; i < 3; ++i) backend.fail(ErrorKind::kTransport);
    CHECK_THROWS_AS(llm_label(backend, sentiment_template(), DemoSet(std::vector<Demo>{{"x", "Positive"}}),
                              testing::example("q", "y"), ctx),
                    Error);
    CHECK(backend.requests.size() == 3);
  }
  {
    ScriptedBackend backend;
    backend.fail(ErrorKind::kMalformedResponse);
    CHECK_THROWS_AS(llm_label(backend, sentiment_template(), DemoSet(std::vector<Demo>{{"x", "Positive"}}),
                              testing::example("q", "y"), ctx),
                    Error);
    CHECK(backend.requests.size() == 1);
  }
}

TEST_CASE("prompted labeler reserves the approximate or worst-case usage cost") {
  ScriptedBackend backend;
  auto ctx = fast_context(TaskKind::kClassification, 19.3);
  const DemoSet demos(std::vector<Demo>{{"great", "Positive"}});
  const auto q = testing::example("q", "so so");
  PromptedLlmLabeler approx(backend, sentiment_template(), ctx);
  CHECK(approx.reservation_for(q, demos).micros() == 1544);
  ctx.accounting = CostAccounting::kActualUsage;
  PromptedLlmLabeler usage(backend, sentiment_template(), ctx);
  const auto prompt_tokens = token_count(build_prompt(sentiment_template(), demos, "so so"));
  CHECK(usage.reservation_for(q, demos).micros() == static_cast<std::int64_t>((prompt_tokens + 1) * 40));
}
