// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labelcost/labelers.hpp"

namespace labelcost {

class Pool;

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// Sentence-level LCS F1; 0 when either side is empty or nothing matches.
double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference);

/// Lowercased whitespace tokens, the tokenization rouge_l_text() uses.
std::vector<std::string> rouge_tokens(std::string_view text);
double rouge_l_text(std::string_view candidate, std::string_view reference);

struct ScoredLabel {
  std::string id;
  double confidence = 0.0;
  bool correct = false;
};

inline constexpr std::size_t kDeciles = 10;

/// Sorts by confidence (descending, ties by id), cuts into 10 contiguous
/// buckets whose sizes differ by at most one (extras go to the top
/// buckets), and returns per-bucket accuracy, highest confidence first.
std::array<double, kDeciles> decile_accuracy(std::vector<ScoredLabel> labels);

/// LLM-source records joined with their gold labels.
std::vector<ScoredLabel> score_llm_labels(std::span<const LabeledExample> labeled, const Pool& pool);

/// Spearman rank correlation with average ranks for ties; 0 when either
/// side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

/// Fraction of records whose label equals the gold label.
double label_accuracy(std::span<const LabeledExample> labeled, const Pool& pool);

/// Mean ROUGE-L of labels against gold references.
double mean_rouge_l(std::span<const LabeledExample> labeled, const Pool& pool);

struct MeanStddev {
  double mean = 0.0;
  /// Sample standard deviation; 0 for fewer than two values.
  double stddev = 0.0;
};

MeanStddev mean_stddev(std::span<const double> values);

}  // namespace labelcost
