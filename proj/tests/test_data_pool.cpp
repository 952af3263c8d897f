// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "labelcost/data_pool.hpp"
#include "labelcost/errors.hpp"
#include "support.hpp"

using namespace labelcost;

namespace {

TaskConfig sentiment() {
  TaskConfig cfg;
  cfg.kind = TaskKind::kClassification;
  cfg.label_vocabulary = std::vector<std::string>{"Positive", "Negative"};
  return cfg;
}

Pool load(const std::string& text, const TaskConfig& cfg = sentiment()) {
  std::istringstream in(text);
  return load_pool(in, cfg);
}

std::string load_error(const std::string& text, const TaskConfig& cfg = sentiment()) {
  try {
    load(text, cfg);
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("token_count counts whitespace runs") {
  CHECK(token_count("") == 0);
  CHECK(token_count("a b  c") == 3);
  CHECK(token_count("  lead and trail \t\n") == 3);
  std::mt19937_64 gen(11);
  const std::string alphabet = "ab \t\n";
  for (int i = 0; i < 300; ++i) {
    std::string t;
    for (std::size_t k = gen() % 20; k > 0; --k) t += alphabet[gen() % alphabet.size()];
    CHECK(token_count(t + " " + t) == 2 * token_count(t));
  }
}

TEST_CASE("custom tokenizers can be registered but whitespace is fixed") {
  register_tokenizer("chars", [](std::string_view s) { return s.size(); });
  CHECK(token_count("abc d", "chars") == 5);
  CHECK_THROWS_AS(register_tokenizer("whitespace", [](std::string_view) { return std::size_t{0}; }), Error);
  CHECK_THROWS_AS(token_count("x", "nope"), Error);
}

TEST_CASE("three valid records give the mean token count") {
  const Pool pool = load(
      "{\"id\":\"a\",\"text\":\"one two\"}\n"
      "{\"text\":\"one two three four\",\"id\":\"b\",\"gold_label\":\"Positive\"}\n"
      "{\"id\":\"c\",\"text\":\"x\",\"token_count\":9}\n");
  REQUIRE(pool.size() == 3);
  CHECK(pool.at(0).token_count == 2);
  CHECK(pool.at(1).token_count == 4);
  CHECK(pool.at(2).token_count == 9);
  CHECK(pool.avg_tokens() == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(pool.get("b").gold_label == std::optional<std::string>("Positive"));
  CHECK(pool.vocabulary() == std::vector<std::string>{"Negative", "Positive"});
}

TEST_CASE("avg_tokens override replaces the computed mean") {
  auto cfg = sentiment();
  cfg.avg_tokens = 19.3;
  CHECK(load("{\"id\":\"a\",\"text\":\"x y\"}\n", cfg).avg_tokens() == 19.3);
}

TEST_CASE("duplicate ids name the id and both lines") {
  const auto msg = load_error(
      "{\"id\":\"a\",\"text\":\"x\"}\n"
      "{\"id\":\"b\",\"text\":\"x\"}\n"
      "{\"id\":\"a\",\"text\":\"y\"}\n");
  CHECK(msg.find("'a'") != std::string::npos);
  CHECK(msg.find("line 3") != std::string::npos);
  CHECK(msg.find("line 1") != std::string::npos);
}

TEST_CASE("malformed and out-of-schema records are rejected with their line") {
  CHECK(load_error("{\"id\":\"a\",\"text\":\"x\"}\n{oops\n").find("line 2") != std::string::npos);
  CHECK(load_error("{\"id\":\"a\",\"text\":\"x\",\"gold_label\":\"Neutral\"}\n").find("vocabulary") !=
        std::string::npos);
  CHECK(load_error("{\"id\":\"a\",\"text\":\"x\",\"extra\":1}\n").find("unknown key") != std::string::npos);
  CHECK(load_error("{\"id\":\"a\"}\n").find("missing") != std::string::npos);
  CHECK(load_error("{\"id\":7,\"text\":\"x\"}\n").find("id") != std::string::npos);
  CHECK(load_error("{\"id\":\"a\",\"text\":\"x\",\"token_count\":-1}\n").find("token_count") != std::string::npos);
  CHECK(load_error("{\"id\":\"a\",\"text\":\"x\"}\r\n").find("CRLF") != std::string::npos);
  CHECK(load_error("[1,2]\n").find("line 1") != std::string::npos);
}

TEST_CASE("pool-level invariants") {
  TaskConfig no_vocab;
  no_vocab.kind = TaskKind::kClassification;
  CHECK_THROWS_AS(load("{\"id\":\"a\",\"text\":\"x\"}\n", no_vocab), Error);

  TaskConfig gen;
  gen.kind = TaskKind::kGeneration;
  CHECK(load("{\"id\":\"a\",\"text\":\"x\",\"gold_label\":\"anything\"}\n", gen).size() == 1);

  auto capped = sentiment();
  capped.pool_cap = 2;
  CHECK_THROWS_AS(load("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\",\"text\":\"x\"}\n{\"id\":\"c\",\"text\":\"x\"}\n", capped),
                  Error);
  CHECK(load("", sentiment()).empty());
  CHECK_THROWS_AS(load("{\"id\":\"a\",\"text\":\"x\"}\n").get("zzz"), Error);
}

TEST_CASE("export then load round-trips byte for byte") {
  const Pool pool = load(
      "{\"text\":\"hello \\\"world\\\" \\u00e9\",\"id\":\"z\",\"gold_label\":\"Negative\"}\n"
      "{\"id\":\"a\",\"token_count\":3,\"text\":\"tab\\tsep\"}\n");
  std::ostringstream first;
  export_pool(pool, first);
  const Pool again = load(first.str());
  std::ostringstream second;
  export_pool(again, second);
  CHECK(first.str() == second.str());
  CHECK(again.examples() == pool.examples());
  CHECK(first.str().find("{\"gold_label\":\"Negative\",\"id\":\"z\",\"text\":") == 0);
}

TEST_CASE("sample is a deterministic prefix of one permutation") {
  const Pool pool = testing::binary_pool(200);
  for (std::uint64_t seed : {0ull, 1ull, 42ull}) {
    const auto full = sample(pool, pool.size(), seed);
    std::set<std::string> unique(full.begin(), full.end());
    CHECK(unique.size() == pool.size());
    CHECK(sample(pool, 0, seed).empty());
    for (std::size_t n : {1u, 10u, 77u, 199u}) {
      const auto part = sample(pool, n, seed);
      CHECK(std::equal(part.begin(), part.end(), full.begin()));
      CHECK(part == sample(pool, n, seed));
    }
  }
  CHECK(sample(pool, 50, 0) != sample(pool, 50, 1));
  CHECK_THROWS_AS(sample(pool, 201, 0), Error);
}

TEST_CASE("small pools still permute every id") {
  const Pool pool = testing::binary_pool(5);
  auto ids = sample(pool, 5, 9);
  std::sort(ids.begin(), ids.end());
  CHECK(ids == std::vector<std::string>{"id-0000", "id-0001", "id-0002", "id-0003", "id-0004"});
}

TEST_CASE("shuffled_indices is close to uniform") {
  constexpr int kTrials = 20000;
  std::array<std::array<int, 4>, 4> counts{};
  for (int s = 0; s < kTrials; ++s) {
    const auto order = shuffled_indices(4, static_cast<std::uint64_t>(s));
    for (std::size_t pos = 0; pos < 4; ++pos) ++counts[pos][order[pos]];
  }
  for (const auto& row : counts) {
    for (int c : row) CHECK(std::abs(c - kTrials / 4) < 400);
  }
}
