// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "labelcost/cost_model.hpp"

namespace labelcost {

struct UnlabeledExample {
  std::string id;
  std::string text;
  std::size_t token_count = 0;
  /// Simulation oracle; only the human labeler reads it.
  std::optional<std::string> gold_label;

  bool operator==(const UnlabeledExample&) const = default;
};

struct TaskConfig {
  TaskKind kind = TaskKind::kClassification;
  /// Required for classification pools.
  std::optional<std::vector<std::string>> label_vocabulary;
  /// Overrides the computed mean token count.
  std::optional<double> avg_tokens;
  std::size_t pool_cap = 5120;
  std::string tokenizer = "whitespace";
};

using TokenCounter = std::function<std::size_t(std::string_view)>;

/// Counts maximal runs of non-whitespace bytes under the default
/// "whitespace" mode; other modes come from register_tokenizer().
std::size_t token_count(std::string_view text, std::string_view mode = "whitespace");
void register_tokenizer(std::string name, TokenCounter counter);

/// Immutable, validated pool of unlabeled examples.
class Pool {
 public:
  Pool(std::vector<UnlabeledExample> examples, TaskKind kind,
       std::optional<std::vector<std::string>> vocabulary, std::optional<double> avg_tokens = std::nullopt,
       std::size_t cap = 5120);

  const std::vector<UnlabeledExample>& examples() const { return examples_; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  TaskKind task_kind() const { return kind_; }
  /// Sorted label vocabulary; empty for generation pools.
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  bool has_vocabulary() const { return has_vocabulary_; }
  double avg_tokens() const { return avg_tokens_; }

  const UnlabeledExample& at(std::size_t index) const { return examples_.at(index); }
  /// Throws Error(kInvalidArgument) for unknown ids.
  const UnlabeledExample& get(std::string_view id) const;
  const UnlabeledExample* find(std::string_view id) const;

 private:
  std::vector<UnlabeledExample> examples_;
  std::unordered_map<std::string, std::size_t> index_;
  TaskKind kind_;
  std::vector<std::string> vocabulary_;
  bool has_vocabulary_ = false;
  double avg_tokens_ = 0.0;
};

/// Parses line-delimited JSON records ({"id", "text", "gold_label"?,
/// "token_count"?}). Errors carry the offending line number.
Pool load_pool(std::istream& in, const TaskConfig& config);
Pool load_pool_file(const std::filesystem::path& path, const TaskConfig& config);

/// Canonical export: one record per line, keys sorted, token_count always
/// present.
void export_pool(const Pool& pool, std::ostream& out);
void export_examples(const std::vector<UnlabeledExample>& examples, std::ostream& out);

/// Seeded Fisher-Yates permutation of [0, n).
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);

/// First n ids of the seeded permutation of the pool. A prefix of
/// sample(pool, m, seed) for every m >= n.
std::vector<std::string> sample(const Pool& pool, std::size_t n, std::uint64_t seed);

}  // namespace labelcost
