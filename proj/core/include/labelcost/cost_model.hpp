// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "labelcost/money.hpp"

namespace labelcost {

enum class TaskKind { kClassification, kGeneration };

std::string_view to_string(TaskKind kind);
TaskKind parse_task_kind(std::string_view text);

enum class HumanPricingMode { kFlatPerLabel, kProportionalWithFloor };

std::string_view to_string(HumanPricingMode mode);
HumanPricingMode parse_human_pricing_mode(std::string_view text);

/// Per-label pricing for the two labeler kinds.
///
/// The LLM is billed per token; a human label is billed per unit of
/// `human_unit_tokens` input tokens, never below `human_min_charge`.
/// Classification tasks are priced flat per label unless
/// `human_pricing_mode` forces a mode for every task kind.
struct CostSchedule {
  Money llm_price_per_token = Money::from_micros(40);
  Money human_unit_price = Money::from_micros(110000);
  std::size_t human_unit_tokens = 50;
  Money human_min_charge = Money::from_micros(110000);
  std::optional<HumanPricingMode> human_pricing_mode;

  /// Throws Error(kInvalidArgument) when a field breaks its invariant.
  void validate() const;

  HumanPricingMode pricing_for(TaskKind kind) const;
};

/// avg_tokens x price x (shots + 1), rounded once to the nearest micro-dollar.
Money llm_label_cost(double avg_tokens, std::size_t shots, const CostSchedule& schedule);

/// Cost of an LLM call billed from actual token usage.
Money llm_usage_cost(std::size_t total_tokens, const CostSchedule& schedule);

Money human_label_cost(double tokens, TaskKind kind, const CostSchedule& schedule);

/// floor(budget / unit_cost).
std::size_t affordable_count(Money budget, Money unit_cost);

/// Budgets equal to the human cost of 10, 20, ..., 5120 labels.
std::vector<Money> budget_ladder(Money human_unit_cost);

/// Dataset descriptors for the built-in cost table.
struct DatasetCostProfile {
  std::string name;
  TaskKind kind;
  double avg_tokens;
  std::vector<std::size_t> shots;
};

/// The nine benchmark profiles (token averages and shot settings) used by
/// the default `costs` table.
const std::vector<DatasetCostProfile>& reference_datasets();

}  // namespace labelcost
