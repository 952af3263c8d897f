// SPDX-License-Identifier: Apache-2.0
#include "labelcost/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "labelcost/data_pool.hpp"
#include "labelcost/errors.hpp"

namespace labelcost {
namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.empty() || b.empty()) return 0;
  // Rolling single row over b.
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = a[i - 1] == b[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row[b.size()];
}

double rouge_l(std::span<const std::string> candidate, std::span<const std::string> reference) {
  const std::size_t lcs = lcs_length(candidate, reference);
  if (lcs == 0) return 0.0;
  const double p = static_cast<double>(lcs) / static_cast<double>(candidate.size());
  const double r = static_cast<double>(lcs) / static_cast<double>(reference.size());
  return 2.0 * p * r / (p + r);
}

std::vector<std::string> rouge_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

double rouge_l_text(std::string_view candidate, std::string_view reference) {
  const auto c = rouge_tokens(candidate);
  const auto r = rouge_tokens(reference);
  return rouge_l(c, r);
}

std::array<double, kDeciles> decile_accuracy(std::vector<ScoredLabel> labels) {
  if (labels.size() < kDeciles) {
    throw Error(ErrorKind::kInvalidArgument,
                "decile analysis needs at least 10 labels, got " + std::to_string(labels.size()));
  }
  std::sort(labels.begin(), labels.end(), [](const ScoredLabel& a, const ScoredLabel& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.id < b.id;
  });
  const std::size_t base = labels.size() / kDeciles;
  const std::size_t extra = labels.size() % kDeciles;
  std::array<double, kDeciles> out{};
  std::size_t begin = 0;
  for (std::size_t k = 0; k < kDeciles; ++k) {
    const std::size_t size = base + (k < extra ? 1 : 0);
    std::size_t hits = 0;
    for (std::size_t i = begin; i < begin + size; ++i) hits += labels[i].correct ? 1 : 0;
    out[k] = static_cast<double>(hits) / static_cast<double>(size);
    begin += size;
  }
  return out;
}

std::vector<ScoredLabel> score_llm_labels(std::span<const LabeledExample> labeled, const Pool& pool) {
  std::vector<ScoredLabel> out;
  for (const auto& rec : labeled) {
    if (rec.source != LabelSource::kLlm) continue;
    const auto& ex = pool.get(rec.id);
    if (!ex.gold_label) {
      throw Error(ErrorKind::kInvalidArgument, "'" + rec.id + "' has no gold label to score against");
    }
    out.push_back({rec.id, rec.confidence, rec.label == *ex.gold_label});
  }
  return out;
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorKind::kInvalidArgument, "spearman needs equal lengths");
  if (x.size() < 2) return 0.0;
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double label_accuracy(std::span<const LabeledExample> labeled, const Pool& pool) {
  if (labeled.empty()) throw Error(ErrorKind::kInvalidArgument, "label accuracy over an empty set");
  std::size_t hits = 0;
  for (const auto& rec : labeled) {
    const auto& ex = pool.get(rec.id);
    if (!ex.gold_label) throw Error(ErrorKind::kInvalidArgument, "'" + rec.id + "' has no gold label");
    hits += rec.label == *ex.gold_label ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(labeled.size());
}

double mean_rouge_l(std::span<const LabeledExample> labeled, const Pool& pool) {
  if (labeled.empty()) throw Error(ErrorKind::kInvalidArgument, "ROUGE-L over an empty set");
  double sum = 0.0;
  for (const auto& rec : labeled) {
    const auto& ex = pool.get(rec.id);
    if (!ex.gold_label) throw Error(ErrorKind::kInvalidArgument, "'" + rec.id + "' has no reference");
    sum += rouge_l_text(rec.label, *ex.gold_label);
  }
  return sum / static_cast<double>(labeled.size());
}

MeanStddev mean_stddev(std::span<const double> values) {
  MeanStddev out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

}  // namespace labelcost
