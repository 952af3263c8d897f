// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "labelcost/cost_model.hpp"
#include "labelcost/data_pool.hpp"
#include "labelcost/money.hpp"
#include "labelcost/rng.hpp"

namespace labelcost {

enum class LabelSource { kLlm, kHuman };

std::string_view to_string(LabelSource source);
LabelSource parse_label_source(std::string_view text);

/// Confidence carried by every human label; larger than any LLM logit.
inline constexpr double kHumanConfidence = std::numeric_limits<double>::max();
/// Confidence of a generation label that returned no token logits.
inline constexpr double kNoConfidence = std::numeric_limits<double>::lowest();

struct LabeledExample {
  std::string id;
  std::string label;
  LabelSource source = LabelSource::kLlm;
  /// First-token logit for LLM classification labels, mean token logit for
  /// generation labels, kHumanConfidence for human labels.
  double confidence = 0.0;
  Money cost;
  std::size_t shots_used = 0;

  bool operator==(const LabeledExample&) const = default;
};

// ---------------------------------------------------------------------------
// Prompt construction

inline constexpr std::string_view kInputSlot = "{input}";
inline constexpr std::string_view kLabelSlot = "{label}";

/// Rendering rules for n-shot prompts.
///
/// A prompt is the instruction, then every demo rendered through
/// `demo_format`, then the query rendered through `query_format`, joined by
/// `separator`. The query format leaves the label open at its end.
struct PromptTemplate {
  std::string instruction;
  std::string demo_format = "Input: {input}\nLabel: {label}";
  std::string query_format = "Input: {input}\nLabel:";
  std::string separator = "\n\n";
  std::string stop_sequence = "\n";
  std::optional<std::vector<std::string>> label_vocabulary;
  /// First completion token of each label; labels missing here are their
  /// own first token.
  std::map<std::string, std::string> label_first_tokens;
  /// Sent verbatim as the request's logit-bias map. When empty, every
  /// label's first token gets +100.
  std::map<std::string, double> logit_bias;
  std::size_t max_prompt_tokens = 2048;
  std::size_t max_output_tokens = 64;
  std::string tokenizer = "whitespace";

  void validate() const;
  std::string first_token_of(const std::string& label) const;
  std::map<std::string, double> effective_logit_bias() const;
};

struct Demo {
  std::string input;
  std::string label;
};

/// The fixed demonstrations reused for every query of a run.
class DemoSet {
 public:
  explicit DemoSet(std::vector<Demo> demos);

  const std::vector<Demo>& demos() const { return demos_; }
  std::size_t shots() const { return demos_.size(); }

 private:
  std::vector<Demo> demos_;
};

/// Throws PromptTooLong when the rendered prompt exceeds max_prompt_tokens.
std::string build_prompt(const PromptTemplate& tmpl, const DemoSet& demos,
                         std::string_view query_text);

struct ConstrainedLabel {
  std::string label;
  double logit = 0.0;
};

/// Picks the vocabulary label whose first token has the highest logit.
/// Tokens outside the vocabulary are ignored; leading/trailing whitespace
/// on returned tokens is not significant. Ties go to the lexicographically
/// first label. Throws Error(kUnmappableLabel) if no label token is present.
ConstrainedLabel constrain_first_token(const std::map<std::string, double>& token_logits,
                                       const std::vector<std::string>& vocabulary,
                                       const std::map<std::string, std::string>& first_tokens = {});

// ---------------------------------------------------------------------------
// Completion backends

struct CompletionRequest {
  std::string prompt;
  std::size_t max_tokens = 1;
  std::string stop;
  double temperature = 0.0;
  std::map<std::string, double> logit_bias;
  std::size_t top_logprobs = 5;
};

struct GeneratedToken {
  std::string token;
  double logit = 0.0;
  /// Top alternatives at this position, including the chosen token.
  std::map<std::string, double> alternatives;
};

struct CompletionResponse {
  std::string text;
  std::vector<GeneratedToken> tokens;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
};

/// A text-completion service. Implementations throw Error(kTransport) for
/// retryable failures and Error(kMalformedResponse) otherwise.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual CompletionResponse complete(const CompletionRequest& request) = 0;
  /// True when complete() may be called from several threads at once.
  virtual bool concurrent() const { return false; }
};

enum class CostAccounting { kApproximate, kActualUsage };

struct RetryPolicy {
  std::size_t max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  double multiplier = 2.0;
};

struct LlmLabelingContext {
  TaskKind kind = TaskKind::kClassification;
  CostSchedule schedule;
  /// Per-instance token average used by approximate cost accounting.
  double avg_tokens = 0.0;
  CostAccounting accounting = CostAccounting::kApproximate;
  RetryPolicy retry;
};

/// Labels one query through a completion backend.
///
/// Classification keeps only the constrained first token; generation keeps
/// the completion up to the stop sequence. Transport errors are retried
/// with exponential backoff up to retry.max_attempts, then rethrown.
LabeledExample llm_label(CompletionBackend& backend, const PromptTemplate& tmpl,
                         const DemoSet& demos, const UnlabeledExample& query,
                         const LlmLabelingContext& context);

// ---------------------------------------------------------------------------
// Simulated labelers

/// Monotone map from a uniform confidence draw to label accuracy.
class SimCalibration {
 public:
  /// g(u) = floor + (ceiling - floor) * u
  static SimCalibration affine(double floor, double ceiling);
  static SimCalibration constant(double accuracy);
  /// `map` must be non-decreasing with values in [floor, ceiling].
  static SimCalibration custom(double floor, double ceiling, std::function<double(double)> map);

  double accuracy_at(double u) const;
  double floor() const { return floor_; }
  double ceiling() const { return ceiling_; }

 private:
  SimCalibration(double floor, double ceiling, std::function<double(double)> map);

  double floor_;
  double ceiling_;
  std::function<double(double)> map_;
};

/// Draws u ~ U(0,1), emits the gold label with probability g(u) and a
/// uniformly chosen wrong label otherwise; confidence = u.
LabeledExample simulated_llm_label(const UnlabeledExample& query,
                                   const std::vector<std::string>& vocabulary,
                                   const SimCalibration& calibration, Rng& rng, Money cost = {},
                                   std::size_t shots = 0);

/// Gold-label oracle standing in for crowd annotators.
LabeledExample human_label(const UnlabeledExample& query, TaskKind kind,
                           const CostSchedule& schedule);

class HumanOracle {
 public:
  HumanOracle(TaskKind kind, CostSchedule schedule);

  LabeledExample label(const UnlabeledExample& query) const;
  Money cost_of(const UnlabeledExample& query) const;
  TaskKind kind() const { return kind_; }

 private:
  TaskKind kind_;
  CostSchedule schedule_;
};

// ---------------------------------------------------------------------------
// LLM labeler seam used by the strategy engine

class LlmLabeler {
 public:
  virtual ~LlmLabeler() = default;
  /// Amount to hold in the ledger before label() is called.
  virtual Money reservation_for(const UnlabeledExample& query, const DemoSet& demos) const = 0;
  virtual LabeledExample label(const UnlabeledExample& query, const DemoSet& demos) = 0;
  virtual bool concurrent() const { return false; }
};

/// Offline classification labeler. Each item's draw is seeded from
/// (seed, id), so labels do not depend on labeling order.
class SimulatedLlmLabeler final : public LlmLabeler {
 public:
  SimulatedLlmLabeler(std::vector<std::string> vocabulary, SimCalibration calibration,
                      std::uint64_t seed, Money unit_cost);

  Money reservation_for(const UnlabeledExample&, const DemoSet&) const override { return unit_cost_; }
  LabeledExample label(const UnlabeledExample& query, const DemoSet& demos) override;

 private:
  std::vector<std::string> vocabulary_;
  SimCalibration calibration_;
  std::uint64_t seed_;
  Money unit_cost_;
};

/// Offline generation labeler: keeps each reference token with
/// probability g(u); confidence = u.
class SimulatedGenerationLabeler final : public LlmLabeler {
 public:
  SimulatedGenerationLabeler(SimCalibration calibration, std::uint64_t seed, Money unit_cost);

  Money reservation_for(const UnlabeledExample&, const DemoSet&) const override { return unit_cost_; }
  LabeledExample label(const UnlabeledExample& query, const DemoSet& demos) override;

 private:
  SimCalibration calibration_;
  std::uint64_t seed_;
  Money unit_cost_;
};

/// Labels through a CompletionBackend with n-shot prompts.
class PromptedLlmLabeler final : public LlmLabeler {
 public:
  PromptedLlmLabeler(CompletionBackend& backend, PromptTemplate tmpl, LlmLabelingContext context);

  Money reservation_for(const UnlabeledExample& query, const DemoSet& demos) const override;
  LabeledExample label(const UnlabeledExample& query, const DemoSet& demos) override;
  bool concurrent() const override { return backend_.concurrent(); }

 private:
  CompletionBackend& backend_;
  PromptTemplate template_;
  LlmLabelingContext context_;
};

}  // namespace labelcost
