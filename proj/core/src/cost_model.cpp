// SPDX-License-Identifier: Apache-2.0
#include "labelcost/cost_model.hpp"

#include <cmath>

#include "labelcost/errors.hpp"

namespace labelcost {

std::string_view to_string(TaskKind kind) {
  return kind == TaskKind::kClassification ? "classification" : "generation";
}

TaskKind parse_task_kind(std::string_view text) {
  if (text == "classification" || text == "nlu") return TaskKind::kClassification;
  if (text == "generation" || text == "nlg") return TaskKind::kGeneration;
  throw Error(ErrorKind::kParse, "unknown task kind '" + std::string(text) + "'");
}

std::string_view to_string(HumanPricingMode mode) {
  return mode == HumanPricingMode::kFlatPerLabel ? "flat" : "proportional";
}

HumanPricingMode parse_human_pricing_mode(std::string_view text) {
  if (text == "flat") return HumanPricingMode::kFlatPerLabel;
  if (text == "proportional") return HumanPricingMode::kProportionalWithFloor;
  throw Error(ErrorKind::kParse, "unknown human pricing mode '" + std::string(text) + "'");
}

void CostSchedule::validate() const {
  if (llm_price_per_token.micros() <= 0) {
    throw Error(ErrorKind::kInvalidArgument, "llm_price_per_token must be positive");
  }
  if (human_unit_price.micros() <= 0) {
    throw Error(ErrorKind::kInvalidArgument, "human_unit_price must be positive");
  }
  if (human_unit_tokens < 1) {
    throw Error(ErrorKind::kInvalidArgument, "human_unit_tokens must be at least 1");
  }
  if (human_min_charge.micros() < 0) {
    throw Error(ErrorKind::kInvalidArgument, "human_min_charge must be non-negative");
  }
}

HumanPricingMode CostSchedule::pricing_for(TaskKind kind) const {
  if (human_pricing_mode) return *human_pricing_mode;
  return kind == TaskKind::kClassification ? HumanPricingMode::kFlatPerLabel
                                           : HumanPricingMode::kProportionalWithFloor;
}

Money llm_label_cost(double avg_tokens, std::size_t shots, const CostSchedule& schedule) {
  if (shots < 1) {
    throw Error(ErrorKind::kInvalidArgument, "shots must be at least 1");
  }
  if (!(avg_tokens >= 0.0) || !std::isfinite(avg_tokens)) {
    throw Error(ErrorKind::kInvalidArgument, "avg_tokens must be finite and non-negative");
  }
  const double micros = avg_tokens * static_cast<double>(schedule.llm_price_per_token.micros()) *
                        static_cast<double>(shots + 1);
  return Money::from_micros(std::llround(micros));
}

Money llm_usage_cost(std::size_t total_tokens, const CostSchedule& schedule) {
  return schedule.llm_price_per_token * static_cast<std::int64_t>(total_tokens);
}

Money human_label_cost(double tokens, TaskKind kind, const CostSchedule& schedule) {
  if (schedule.pricing_for(kind) == HumanPricingMode::kFlatPerLabel) {
    return schedule.human_unit_price;
  }
  const double micros = tokens * static_cast<double>(schedule.human_unit_price.micros()) /
                        static_cast<double>(schedule.human_unit_tokens);
  const Money proportional = Money::from_micros(std::llround(micros));
  return proportional < schedule.human_min_charge ? schedule.human_min_charge : proportional;
}

std::size_t affordable_count(Money budget, Money unit_cost) {
  if (unit_cost.micros() <= 0) {
    throw Error(ErrorKind::kInvalidArgument, "unit cost must be positive");
  }
  if (budget.micros() <= 0) return 0;
  return static_cast<std::size_t>(budget.micros() / unit_cost.micros());
}

std::vector<Money> budget_ladder(Money human_unit_cost) {
  if (human_unit_cost.micros() <= 0) {
    throw Error(ErrorKind::kInvalidArgument, "human unit cost must be positive");
  }
  std::vector<Money> ladder;
  ladder.reserve(10);
  for (std::int64_t count = 10; count <= 5120; count *= 2) {
    ladder.push_back(human_unit_cost * count);
  }
  return ladder;
}

const std::vector<DatasetCostProfile>& reference_datasets() {
  static const std::vector<DatasetCostProfile> kProfiles = {
      {"Gigaword", TaskKind::kGeneration, 31.0, {1, 2, 3}},
      {"SQuAD", TaskKind::kGeneration, 126.0, {1, 2, 3}},
      {"XSum", TaskKind::kGeneration, 382.0, {1, 2, 3}},
      {"SST-2", TaskKind::kClassification, 19.3, {2, 4, 8}},
      {"CB", TaskKind::kClassification, 62.7, {2, 4, 8}},
      {"TREC", TaskKind::kClassification, 10.2, {2, 4, 8}},
      {"AGNews", TaskKind::kClassification, 31.6, {2, 4, 8}},
      {"DBPedia", TaskKind::kClassification, 47.3, {2, 4, 8}},
      {"RTE", TaskKind::kClassification, 52.4, {2, 4, 8}},
  };
  return kProfiles;
}

}  // namespace labelcost
