// SPDX-License-Identifier: Apache-2.0
#include "labelcost/data_pool.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <set>

#include <json.hpp>

#include "labelcost/errors.hpp"
#include "labelcost/rng.hpp"

namespace labelcost {
namespace {

using nlohmann::json;

std::size_t whitespace_tokens(std::string_view text) {
  std::size_t count = 0;
  bool in_token = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_token) ++count;
    in_token = !space;
  }
  return count;
}

struct TokenizerRegistry {
  std::mutex mu;
  std::map<std::string, TokenCounter, std::less<>> counters;
};

TokenizerRegistry& registry() {
  static TokenizerRegistry r;
  return r;
}

Error line_error(ErrorKind kind, std::size_t line, const std::string& what) {
  return Error(kind, "line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::size_t token_count(std::string_view text, std::string_view mode) {
  if (mode == "whitespace") return whitespace_tokens(text);
  auto& reg = registry();
  std::lock_guard lock(reg.mu);
  auto it = reg.counters.find(mode);
  if (it == reg.counters.end()) {
    throw Error(ErrorKind::kInvalidArgument, "unknown tokenizer mode '" + std::string(mode) + "'");
  }
  return it->second(text);
}

void register_tokenizer(std::string name, TokenCounter counter) {
  if (name == "whitespace") {
    throw Error(ErrorKind::kInvalidArgument, "the whitespace tokenizer cannot be replaced");
  }
  auto& reg = registry();
  std::lock_guard lock(reg.mu);
  reg.counters[std::move(name)] = std::move(counter);
}

Pool::Pool(std::vector<UnlabeledExample> examples, TaskKind kind,
           std::optional<std::vector<std::string>> vocabulary, std::optional<double> avg_tokens,
           std::size_t cap)
    : examples_(std::move(examples)), kind_(kind) {
  if (examples_.size() > cap) {
    throw Error(ErrorKind::kInvalidArgument,
                "pool has " + std::to_string(examples_.size()) + " examples, cap is " +
                    std::to_string(cap));
  }
  if (vocabulary) {
    std::set<std::string> unique(vocabulary->begin(), vocabulary->end());
    if (unique.size() != vocabulary->size() || unique.empty()) {
      throw Error(ErrorKind::kInvalidArgument, "label vocabulary must be non-empty and unique");
    }
    vocabulary_.assign(unique.begin(), unique.end());
    has_vocabulary_ = true;
  } else if (kind == TaskKind::kClassification) {
    throw Error(ErrorKind::kInvalidArgument, "classification pools must declare a label vocabulary");
  }
  index_.reserve(examples_.size());
  for (std::size_t i = 0; i < examples_.size(); ++i) {
    const auto& ex = examples_[i];
    if (!index_.emplace(ex.id, i).second) {
      throw Error(ErrorKind::kInvalidArgument, "duplicate id '" + ex.id + "'");
    }
    if (has_vocabulary_ && ex.gold_label &&
        !std::binary_search(vocabulary_.begin(), vocabulary_.end(), *ex.gold_label)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "gold label '" + *ex.gold_label + "' of '" + ex.id + "' is not in the vocabulary");
    }
  }
  if (avg_tokens) {
    if (!(*avg_tokens >= 0.0)) {
      throw Error(ErrorKind::kInvalidArgument, "avg_tokens override must be non-negative");
    }
    avg_tokens_ = *avg_tokens;
  } else if (!examples_.empty()) {
    const double sum = std::accumulate(
        examples_.begin(), examples_.end(), 0.0,
        [](double acc, const UnlabeledExample& ex) { return acc + static_cast<double>(ex.token_count); });
    avg_tokens_ = sum / static_cast<double>(examples_.size());
  }
}

const UnlabeledExample* Pool::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &examples_[it->second];
}

const UnlabeledExample& Pool::get(std::string_view id) const {
  const auto* ex = find(id);
  if (ex == nullptr) {
    throw Error(ErrorKind::kInvalidArgument, "unknown example id '" + std::string(id) + "'");
  }
  return *ex;
}

Pool load_pool(std::istream& in, const TaskConfig& config) {
  std::vector<UnlabeledExample> examples;
  std::unordered_map<std::string, std::size_t> first_line;
  std::set<std::string> vocab;
  if (config.label_vocabulary) vocab.insert(config.label_vocabulary->begin(), config.label_vocabulary->end());

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      throw line_error(ErrorKind::kParse, line_no, "CRLF line endings are not accepted");
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw line_error(ErrorKind::kParse, line_no, std::string("malformed record: ") + e.what());
    }
    if (!record.is_object()) throw line_error(ErrorKind::kParse, line_no, "record is not an object");

    UnlabeledExample ex;
    for (const auto& [key, value] : record.items()) {
      if (key == "id") {
        if (!value.is_string() || value.get_ref<const std::string&>().empty()) {
          throw line_error(ErrorKind::kSchema, line_no, "\"id\" must be a non-empty string");
        }
        ex.id = value.get<std::string>();
      } else if (key == "text") {
        if (!value.is_string()) throw line_error(ErrorKind::kSchema, line_no, "\"text\" must be a string");
        ex.text = value.get<std::string>();
      } else if (key == "gold_label") {
        if (!value.is_string()) {
          throw line_error(ErrorKind::kSchema, line_no, "\"gold_label\" must be a string");
        }
        ex.gold_label = value.get<std::string>();
      } else if (key == "token_count") {
        if (!value.is_number_unsigned()) {
          throw line_error(ErrorKind::kSchema, line_no, "\"token_count\" must be a non-negative integer");
        }
      } else {
        throw line_error(ErrorKind::kSchema, line_no, "unknown key \"" + key + "\"");
      }
    }
    if (!record.contains("id")) throw line_error(ErrorKind::kSchema, line_no, "missing \"id\"");
    if (!record.contains("text")) throw line_error(ErrorKind::kSchema, line_no, "missing \"text\"");
    ex.token_count = record.contains("token_count") ? record["token_count"].get<std::size_t>()
                                                    : token_count(ex.text, config.tokenizer);

    if (auto [it, inserted] = first_line.emplace(ex.id, line_no); !inserted) {
      throw line_error(ErrorKind::kSchema, line_no,
                       "duplicate id '" + ex.id + "' (first seen on line " +
                           std::to_string(it->second) + ")");
    }
    if (ex.gold_label && config.label_vocabulary && !vocab.contains(*ex.gold_label)) {
      throw line_error(ErrorKind::kSchema, line_no,
                       "gold_label '" + *ex.gold_label + "' is not in the label vocabulary");
    }
    examples.push_back(std::move(ex));
  }
  return Pool(std::move(examples), config.kind, config.label_vocabulary, config.avg_tokens,
              config.pool_cap);
}

Pool load_pool_file(const std::filesystem::path& path, const TaskConfig& config) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open pool file " + path.string());
  try {
    return load_pool(in, config);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

void export_examples(const std::vector<UnlabeledExample>& examples, std::ostream& out) {
  for (const auto& ex : examples) {
    json record;
    record["id"] = ex.id;
    record["text"] = ex.text;
    record["token_count"] = ex.token_count;
    if (ex.gold_label) record["gold_label"] = *ex.gold_label;
    out << record.dump() << '\n';
  }
}

void export_pool(const Pool& pool, std::ostream& out) { export_examples(pool.examples(), out); }

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, "pool-shuffle"));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  return order;
}

std::vector<std::string> sample(const Pool& pool, std::size_t n, std::uint64_t seed) {
  if (n > pool.size()) {
    throw Error(ErrorKind::kInvalidArgument,
                "cannot sample " + std::to_string(n) + " of " + std::to_string(pool.size()) +
                    " examples");
  }
  const auto order = shuffled_indices(pool.size(), seed);
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 0; i < n; ++i) ids.push_back(pool.at(order[i]).id);
  return ids;
}

}  // namespace labelcost
