// SPDX-License-Identifier: Apache-2.0
#include "labelcost/labelers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "labelcost/errors.hpp"

namespace labelcost {
namespace {

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t count = 0;
  for (std::size_t pos = haystack.find(needle); pos != std::string_view::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

std::string replace_once(std::string_view format, std::string_view slot, std::string_view value) {
  const auto pos = format.find(slot);
  std::string out(format.substr(0, pos));
  out += value;
  out += format.substr(pos + slot.size());
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream in{std::string(text)};
  for (std::string t; in >> t;) tokens.push_back(std::move(t));
  return tokens;
}

}  // namespace

std::string_view to_string(LabelSource source) {
  return source == LabelSource::kLlm ? "llm" : "human";
}

LabelSource parse_label_source(std::string_view text) {
  if (text == "llm") return LabelSource::kLlm;
  if (text == "human") return LabelSource::kHuman;
  throw Error(ErrorKind::kParse, "unknown label source '" + std::string(text) + "'");
}

void PromptTemplate::validate() const {
  if (count_occurrences(demo_format, kInputSlot) != 1 ||
      count_occurrences(demo_format, kLabelSlot) != 1) {
    throw Error(ErrorKind::kInvalidArgument,
                "demo_format must contain {input} and {label} exactly once");
  }
  if (count_occurrences(query_format, kInputSlot) != 1 ||
      count_occurrences(query_format, kLabelSlot) != 0) {
    throw Error(ErrorKind::kInvalidArgument,
                "query_format must contain {input} exactly once and no {label}");
  }
  if (stop_sequence.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "stop_sequence must be non-empty");
  }
  if (max_prompt_tokens == 0 || max_output_tokens == 0) {
    throw Error(ErrorKind::kInvalidArgument, "token limits must be positive");
  }
}

std::string PromptTemplate::first_token_of(const std::string& label) const {
  auto it = label_first_tokens.find(label);
  return it == label_first_tokens.end() ? label : it->second;
}

std::map<std::string, double> PromptTemplate::effective_logit_bias() const {
  if (!logit_bias.empty() || !label_vocabulary) return logit_bias;
  std::map<std::string, double> bias;
  for (const auto& label : *label_vocabulary) bias[first_token_of(label)] = 100.0;
  return bias;
}

DemoSet::DemoSet(std::vector<Demo> demos) : demos_(std::move(demos)) {
  if (demos_.empty()) throw Error(ErrorKind::kInvalidArgument, "a demo set needs at least one shot");
}

std::string build_prompt(const PromptTemplate& tmpl, const DemoSet& demos,
                         std::string_view query_text) {
  tmpl.validate();
  std::string prompt;
  auto append = [&](const std::string& part) {
    if (!prompt.empty()) prompt += tmpl.separator;
    prompt += part;
  };
  if (!tmpl.instruction.empty()) append(tmpl.instruction);
  for (const auto& demo : demos.demos()) {
    append(replace_once(replace_once(tmpl.demo_format, kInputSlot, demo.input), kLabelSlot,
                        demo.label));
  }
  append(replace_once(tmpl.query_format, kInputSlot, query_text));

  const std::size_t tokens = token_count(prompt, tmpl.tokenizer);
  if (tokens > tmpl.max_prompt_tokens) throw PromptTooLong(tokens, tmpl.max_prompt_tokens);
  return prompt;
}

ConstrainedLabel constrain_first_token(const std::map<std::string, double>& token_logits,
                                       const std::vector<std::string>& vocabulary,
                                       const std::map<std::string, std::string>& first_tokens) {
  std::vector<std::string> labels = vocabulary;
  std::sort(labels.begin(), labels.end());

  std::optional<ConstrainedLabel> best;
  for (const auto& label : labels) {
    auto ft = first_tokens.find(label);
    const std::string_view wanted = ft == first_tokens.end() ? std::string_view(label) : ft->second;
    std::optional<double> logit;
    for (const auto& [token, value] : token_logits) {
      if (trim(token) == trim(wanted) && (!logit || value > *logit)) logit = value;
    }
    if (logit && (!best || *logit > best->logit)) best = ConstrainedLabel{label, *logit};
  }
  if (!best) {
    throw Error(ErrorKind::kUnmappableLabel, "no label-vocabulary token among the returned logits");
  }
  return *best;
}

LabeledExample llm_label(CompletionBackend& backend, const PromptTemplate& tmpl,
                         const DemoSet& demos, const UnlabeledExample& query,
                         const LlmLabelingContext& context) {
  const bool classify = context.kind == TaskKind::kClassification;
  if (classify && !tmpl.label_vocabulary) {
    throw Error(ErrorKind::kInvalidArgument, "classification labeling needs a label vocabulary");
  }
  CompletionRequest request;
  request.prompt = build_prompt(tmpl, demos, query.text);
  request.max_tokens = classify ? 1 : tmpl.max_output_tokens;
  request.stop = tmpl.stop_sequence;
  request.temperature = 0.0;
  if (classify) request.logit_bias = tmpl.effective_logit_bias();

  CompletionResponse response;
  auto backoff = context.retry.initial_backoff;
  for (std::size_t attempt = 1;; ++attempt) {
    try {
      response = backend.complete(request);
      break;
    } catch (const Error& e) {
      if (!e.retryable() || attempt >= context.retry.max_attempts) throw;
    }
    if (backoff.count() > 0) std::this_thread::sleep_for(backoff);
    backoff = std::chrono::milliseconds(
        static_cast<std::int64_t>(static_cast<double>(backoff.count()) * context.retry.multiplier));
  }

  LabeledExample out;
  out.id = query.id;
  out.source = LabelSource::kLlm;
  out.shots_used = demos.shots();
  if (classify) {
    if (response.tokens.empty()) {
      throw Error(ErrorKind::kMalformedResponse, "classification response carries no token logits");
    }
    std::map<std::string, double> first = response.tokens.front().alternatives;
    first.emplace(response.tokens.front().token, response.tokens.front().logit);
    auto picked = constrain_first_token(first, *tmpl.label_vocabulary, tmpl.label_first_tokens);
    out.label = std::move(picked.label);
    out.confidence = picked.logit;
  } else {
    std::string_view text = response.text;
    if (auto stop = text.find(tmpl.stop_sequence); stop != std::string_view::npos) {
      text = text.substr(0, stop);
    }
    out.label = std::string(trim(text));
    if (response.tokens.empty()) {
      out.confidence = kNoConfidence;
    } else {
      double sum = 0.0;
      for (const auto& t : response.tokens) sum += t.logit;
      out.confidence = sum / static_cast<double>(response.tokens.size());
    }
  }
  out.cost = context.accounting == CostAccounting::kApproximate
                 ? llm_label_cost(context.avg_tokens, demos.shots(), context.schedule)
                 : llm_usage_cost(response.prompt_tokens + response.completion_tokens,
                                  context.schedule);
  return out;
}

SimCalibration::SimCalibration(double floor, double ceiling, std::function<double(double)> map)
    : floor_(floor), ceiling_(ceiling), map_(std::move(map)) {
  if (!(0.0 <= floor && floor <= ceiling && ceiling <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "calibration requires 0 <= floor <= ceiling <= 1");
  }
  double previous = floor_;
  for (int i = 0; i <= 64; ++i) {
    const double g = map_(i / 64.0);
    if (g < floor_ - 1e-12 || g > ceiling_ + 1e-12 || g < previous - 1e-12) {
      throw Error(ErrorKind::kInvalidArgument,
                  "calibration map must be non-decreasing within [floor, ceiling]");
    }
    previous = g;
  }
}

SimCalibration SimCalibration::affine(double floor, double ceiling) {
  return SimCalibration(floor, ceiling, [floor, ceiling](double u) {
    return floor + (ceiling - floor) * u;
  });
}

SimCalibration SimCalibration::constant(double accuracy) {
  return SimCalibration(accuracy, accuracy, [accuracy](double) { return accuracy; });
}

SimCalibration SimCalibration::custom(double floor, double ceiling,
                                      std::function<double(double)> map) {
  return SimCalibration(floor, ceiling, std::move(map));
}

double SimCalibration::accuracy_at(double u) const {
  return std::clamp(map_(std::clamp(u, 0.0, 1.0)), floor_, ceiling_);
}

LabeledExample simulated_llm_label(const UnlabeledExample& query,
                                   const std::vector<std::string>& vocabulary,
                                   const SimCalibration& calibration, Rng& rng, Money cost,
                                   std::size_t shots) {
  if (!query.gold_label) {
    throw Error(ErrorKind::kSimulationImpossible, "'" + query.id + "' has no gold label");
  }
  const double u = rng.uniform();
  const bool correct = rng.uniform() < calibration.accuracy_at(u);

  LabeledExample out{query.id, *query.gold_label, LabelSource::kLlm, u, cost, shots};
  if (!correct) {
    std::vector<const std::string*> wrong;
    for (const auto& label : vocabulary) {
      if (label != *query.gold_label) wrong.push_back(&label);
    }
    if (wrong.empty()) {
      throw Error(ErrorKind::kSimulationImpossible, "vocabulary has no wrong label to emit");
    }
    out.label = *wrong[static_cast<std::size_t>(rng.below(wrong.size()))];
  }
  return out;
}

LabeledExample human_label(const UnlabeledExample& query, TaskKind kind,
                           const CostSchedule& schedule) {
  if (!query.gold_label) {
    throw Error(ErrorKind::kSimulationImpossible, "'" + query.id + "' has no gold label");
  }
  return LabeledExample{query.id, *query.gold_label, LabelSource::kHuman, kHumanConfidence,
                        human_label_cost(static_cast<double>(query.token_count), kind, schedule), 0};
}

HumanOracle::HumanOracle(TaskKind kind, CostSchedule schedule)
    : kind_(kind), schedule_(std::move(schedule)) {
  schedule_.validate();
}

LabeledExample HumanOracle::label(const UnlabeledExample& query) const {
  return human_label(query, kind_, schedule_);
}

Money HumanOracle::cost_of(const UnlabeledExample& query) const {
  return human_label_cost(static_cast<double>(query.token_count), kind_, schedule_);
}

SimulatedLlmLabeler::SimulatedLlmLabeler(std::vector<std::string> vocabulary,
                                         SimCalibration calibration, std::uint64_t seed,
                                         Money unit_cost)
    : vocabulary_(std::move(vocabulary)),
      calibration_(std::move(calibration)),
      seed_(seed),
      unit_cost_(unit_cost) {
  std::sort(vocabulary_.begin(), vocabulary_.end());
}

LabeledExample SimulatedLlmLabeler::label(const UnlabeledExample& query, const DemoSet& demos) {
  Rng rng(derive_seed(seed_, query.id));
  return simulated_llm_label(query, vocabulary_, calibration_, rng, unit_cost_, demos.shots());
}

SimulatedGenerationLabeler::SimulatedGenerationLabeler(SimCalibration calibration,
                                                       std::uint64_t seed, Money unit_cost)
    : calibration_(std::move(calibration)), seed_(seed), unit_cost_(unit_cost) {}

LabeledExample SimulatedGenerationLabeler::label(const UnlabeledExample& query,
                                                 const DemoSet& demos) {
  if (!query.gold_label) {
    throw Error(ErrorKind::kSimulationImpossible, "'" + query.id + "' has no reference output");
  }
  Rng rng(derive_seed(seed_, query.id));
  const double u = rng.uniform();
  const double keep = calibration_.accuracy_at(u);
  std::string label;
  for (const auto& token : split_whitespace(*query.gold_label)) {
    if (rng.uniform() < keep) {
      if (!label.empty()) label += ' ';
      label += token;
    }
  }
  return LabeledExample{query.id, label, LabelSource::kLlm, u, unit_cost_, demos.shots()};
}

PromptedLlmLabeler::PromptedLlmLabeler(CompletionBackend& backend, PromptTemplate tmpl,
                                       LlmLabelingContext context)
    : backend_(backend), template_(std::move(tmpl)), context_(std::move(context)) {
  template_.validate();
}

Money PromptedLlmLabeler::reservation_for(const UnlabeledExample& query,
                                          const DemoSet& demos) const {
  if (context_.accounting == CostAccounting::kApproximate) {
    return llm_label_cost(context_.avg_tokens, demos.shots(), context_.schedule);
  }
  const std::string prompt = build_prompt(template_, demos, query.text);
  const std::size_t output =
      context_.kind == TaskKind::kClassification ? 1 : template_.max_output_tokens;
  return llm_usage_cost(token_count(prompt, template_.tokenizer) + output, context_.schedule);
}

LabeledExample PromptedLlmLabeler::label(const UnlabeledExample& query, const DemoSet& demos) {
  return llm_label(backend_, template_, demos, query, context_);
}

}  // namespace labelcost
