// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labelcost/cost_model.hpp"
#include "labelcost/data_pool.hpp"
#include "labelcost/labelers.hpp"
#include "labelcost/ledger.hpp"
#include "labelcost/money.hpp"

namespace labelcost {

enum class Strategy { kHumanOnly, kLlmOnly, kRandomMix, kActiveLabeling };

std::string_view to_string(Strategy strategy);
Strategy parse_strategy(std::string_view text);

/// True for every strategy that sends items to the LLM.
bool uses_llm(Strategy strategy);

struct StrategyConfig {
  Strategy strategy = Strategy::kHumanOnly;
  /// Fraction of the budget for human labeling. Forced to 1 for HumanOnly
  /// and 0 for LlmOnly by validate().
  double human_ratio = 1.0;
  std::size_t shots = 0;
  std::uint64_t seed = 0;

  void validate() const;
  static StrategyConfig human_only(std::uint64_t seed);
  static StrategyConfig llm_only(std::size_t shots, std::uint64_t seed);
  static StrategyConfig random_mix(double human_ratio, std::size_t shots, std::uint64_t seed);
  static StrategyConfig active(double human_ratio, std::size_t shots, std::uint64_t seed);
};

/// Concrete assignment of pool items to labelers under one budget.
///
/// Items come from one seeded shuffle of the pool, consumed front to back:
/// demos first, then human items, then LLM items, then fresh human
/// candidates for active overflow. Labeled ids are therefore always a
/// prefix of the shuffle.
struct LabelingPlan {
  Strategy strategy = Strategy::kHumanOnly;
  std::size_t shots = 0;
  std::uint64_t seed = 0;
  Money total_budget;
  Money llm_budget;
  Money human_budget;
  Money demo_overhead;
  Money llm_unit_cost;
  Money human_unit_cost;
  std::vector<std::string> demo_ids;
  std::vector<std::string> human_item_ids;
  std::vector<std::string> llm_item_ids;
  /// ActiveLabeling only: number of lowest-confidence LLM labels to redo.
  std::size_t relabel_quota = 0;
  /// ActiveLabeling only: unlabeled items that absorb relabel budget left
  /// over once every LLM label has been redone.
  std::vector<std::string> fresh_human_ids;

  std::size_t planned_items() const {
    return demo_ids.size() + human_item_ids.size() + llm_item_ids.size();
  }
};

/// Splits the budget and assigns items. Throws InfeasiblePlan naming the
/// shortfall, or Error(kUnsupportedStrategy) for active labeling on a
/// generation task.
LabelingPlan plan(Money budget, const Pool& pool, const StrategyConfig& config,
                  const CostSchedule& costs);

struct FailedItem {
  std::string id;
  std::string reason;
};

struct RunReport {
  /// Exactly one record per id, sorted by id.
  std::vector<LabeledExample> records;
  std::vector<FailedItem> failed;
  Money spent_llm;
  Money spent_human;
  Money unspent;
  std::size_t relabeled = 0;
  std::size_t fresh_human = 0;
  /// Set when the ledger refused a reservation mid-run.
  bool budget_exhausted = false;
  /// Actual LLM charges that went past their hold and could not be topped up.
  Money uncharged_overrun;

  std::size_t count(LabelSource source) const;
};

struct RunOptions {
  /// Upper bound on concurrent LLM requests for backends that allow it.
  std::size_t max_in_flight = 1;
};

/// Executes a plan against the two labelers, charging every label through
/// `ledger`. Failed LLM items release their hold and are reported, not
/// retried beyond the labeler's own retry policy.
RunReport run_plan(const LabelingPlan& plan, const Pool& pool, LlmLabeler* llm,
                   const HumanOracle& human, BudgetLedger& ledger,
                   const RunOptions& options = {});

struct RelabelOutcome {
  std::vector<LabeledExample> records;
  std::size_t relabeled = 0;
  std::size_t fresh = 0;
  Money spent;
};

/// Has humans redo the lowest-confidence LLM labels (ties by ascending
/// id) while `human_budget` lasts. Budget left after every label has been
/// redone goes to `fresh_candidates`, in order. Records come back sorted by
/// id with relabeled entries replaced.
RelabelOutcome active_relabel(std::vector<LabeledExample> llm_labeled, Money human_budget,
                              const HumanOracle& human, BudgetLedger& ledger, const Pool& pool,
                              std::span<const std::string> fresh_candidates = {});

}  // namespace labelcost
