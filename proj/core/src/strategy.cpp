// SPDX-License-Identifier: Apache-2.0
#include "labelcost/strategy.hpp"

#include <algorithm>
#include <future>
#include <map>
#include <numeric>
#include <optional>

#include "labelcost/errors.hpp"

namespace labelcost {
namespace {

InfeasiblePlan shortfall_error(const std::string& what, Money needed, Money available) {
  const Money gap = needed - available;
  return InfeasiblePlan(what + ": needs " + format_fixed(needed) + ", has " +
                            format_fixed(available) + " (short by " + format_fixed(gap) + ")",
                        gap.micros());
}

// Takes items from `order` starting at `cursor` while their cumulative human
// cost fits in `budget`.
std::vector<std::string> take_human_items(const Pool& pool, const std::vector<std::size_t>& order,
                                          std::size_t& cursor, Money budget,
                                          const CostSchedule& costs) {
  std::vector<std::string> ids;
  Money spent;
  while (cursor < order.size()) {
    const auto& ex = pool.at(order[cursor]);
    const Money c = human_label_cost(static_cast<double>(ex.token_count), pool.task_kind(), costs);
    if (spent + c > budget) break;
    spent += c;
    ids.push_back(ex.id);
    ++cursor;
  }
  return ids;
}

std::size_t llm_capacity(Money budget, Money unit, std::size_t remaining) {
  if (unit.micros() == 0) return remaining;
  return std::min(affordable_count(budget, unit), remaining);
}

}  // namespace

std::string_view to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::kHumanOnly: return "human_only";
    case Strategy::kLlmOnly: return "llm_only";
    case Strategy::kRandomMix: return "random_mix";
    case Strategy::kActiveLabeling: return "active";
  }
  return "unknown";
}

Strategy parse_strategy(std::string_view text) {
  if (text == "human_only" || text == "human") return Strategy::kHumanOnly;
  if (text == "llm_only" || text == "llm") return Strategy::kLlmOnly;
  if (text == "random_mix" || text == "random") return Strategy::kRandomMix;
  if (text == "active" || text == "active_labeling") return Strategy::kActiveLabeling;
  throw Error(ErrorKind::kParse, "unknown strategy '" + std::string(text) + "'");
}

bool uses_llm(Strategy strategy) { return strategy != Strategy::kHumanOnly; }

void StrategyConfig::validate() const {
  if (!(human_ratio >= 0.0 && human_ratio <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "human_ratio must lie in [0, 1]");
  }
  if (strategy == Strategy::kHumanOnly && human_ratio != 1.0) {
    throw Error(ErrorKind::kInvalidArgument, "human_only requires human_ratio = 1");
  }
  if (strategy == Strategy::kLlmOnly && human_ratio != 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "llm_only requires human_ratio = 0");
  }
  const bool llm_used = strategy != Strategy::kHumanOnly &&
                        !(strategy == Strategy::kRandomMix && human_ratio == 1.0);
  if (llm_used && shots < 1) {
    throw Error(ErrorKind::kInvalidArgument, "strategies that use the LLM need shots >= 1");
  }
}

StrategyConfig StrategyConfig::human_only(std::uint64_t seed) {
  return {Strategy::kHumanOnly, 1.0, 0, seed};
}

StrategyConfig StrategyConfig::llm_only(std::size_t shots, std::uint64_t seed) {
  return {Strategy::kLlmOnly, 0.0, shots, seed};
}

StrategyConfig StrategyConfig::random_mix(double human_ratio, std::size_t shots, std::uint64_t seed) {
  return {Strategy::kRandomMix, human_ratio, shots, seed};
}

StrategyConfig StrategyConfig::active(double human_ratio, std::size_t shots, std::uint64_t seed) {
  return {Strategy::kActiveLabeling, human_ratio, shots, seed};
}

std::size_t RunReport::count(LabelSource source) const {
  return static_cast<std::size_t>(std::count_if(
      records.begin(), records.end(), [source](const LabeledExample& r) { return r.source == source; }));
}

LabelingPlan plan(Money budget, const Pool& pool, const StrategyConfig& config,
                  const CostSchedule& costs) {
  config.validate();
  costs.validate();
  if (budget.micros() <= 0) throw Error(ErrorKind::kInvalidArgument, "budget must be positive");
  if (pool.empty()) throw Error(ErrorKind::kInvalidArgument, "cannot plan over an empty pool");
  if (config.strategy == Strategy::kActiveLabeling && pool.task_kind() == TaskKind::kGeneration) {
    throw Error(ErrorKind::kUnsupportedStrategy,
                "active labeling ranks first-token confidences and is only defined for "
                "classification tasks");
  }

  LabelingPlan p;
  p.strategy = config.strategy;
  p.seed = config.seed;
  p.total_budget = budget;
  p.human_unit_cost = human_label_cost(pool.avg_tokens(), pool.task_kind(), costs);

  const auto order = shuffled_indices(pool.size(), config.seed);
  std::size_t cursor = 0;

  const bool llm_used = uses_llm(config.strategy) &&
                        !(config.strategy == Strategy::kRandomMix && config.human_ratio == 1.0);
  if (!llm_used) {
    p.human_budget = budget;
    p.human_item_ids = take_human_items(pool, order, cursor, budget, costs);
    if (p.human_item_ids.empty()) {
      const auto& first = pool.at(order.front());
      throw shortfall_error("budget below one human label",
                            human_label_cost(static_cast<double>(first.token_count),
                                             pool.task_kind(), costs),
                            budget);
    }
    return p;
  }

  if (config.shots >= pool.size()) {
    throw Error(ErrorKind::kInvalidArgument, "pool too small for " + std::to_string(config.shots) +
                                                 " demonstrations plus queries");
  }
  p.shots = config.shots;
  p.llm_unit_cost = llm_label_cost(pool.avg_tokens(), config.shots, costs);
  p.human_budget = budget.scaled_floor(config.human_ratio);
  const Money llm_share = budget - p.human_budget;

  for (; cursor < config.shots; ++cursor) {
    const auto& ex = pool.at(order[cursor]);
    p.demo_ids.push_back(ex.id);
    p.demo_overhead += human_label_cost(static_cast<double>(ex.token_count), pool.task_kind(), costs);
  }
  if (llm_share < p.demo_overhead + p.llm_unit_cost) {
    throw shortfall_error("LLM share below demo overhead plus one LLM label",
                          p.demo_overhead + p.llm_unit_cost, llm_share);
  }
  p.llm_budget = llm_share - p.demo_overhead;

  if (config.strategy == Strategy::kRandomMix) {
    p.human_item_ids = take_human_items(pool, order, cursor, p.human_budget, costs);
  }
  const std::size_t n_llm = llm_capacity(p.llm_budget, p.llm_unit_cost, pool.size() - cursor);
  for (std::size_t i = 0; i < n_llm; ++i, ++cursor) p.llm_item_ids.push_back(pool.at(order[cursor]).id);

  if (config.strategy == Strategy::kActiveLabeling) {
    p.relabel_quota = affordable_count(p.human_budget, p.human_unit_cost);
    for (std::size_t i = 0; i < p.relabel_quota && cursor < pool.size(); ++i, ++cursor) {
      p.fresh_human_ids.push_back(pool.at(order[cursor]).id);
    }
  }
  return p;
}

RelabelOutcome active_relabel(std::vector<LabeledExample> llm_labeled, Money human_budget,
                              const HumanOracle& human, BudgetLedger& ledger, const Pool& pool,
                              std::span<const std::string> fresh_candidates) {
  RelabelOutcome out;
  auto by_id = [](const LabeledExample& a, const LabeledExample& b) { return a.id < b.id; };
  if (human_budget.micros() <= 0) {
    std::sort(llm_labeled.begin(), llm_labeled.end(), by_id);
    out.records = std::move(llm_labeled);
    return out;
  }
  if (llm_labeled.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "active relabeling needs at least one LLM label");
  }
  if (pool.task_kind() != TaskKind::kClassification) {
    throw Error(ErrorKind::kUnsupportedStrategy, "active relabeling needs classification confidences");
  }

  std::vector<std::size_t> rank(llm_labeled.size());
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = llm_labeled[a];
    const auto& y = llm_labeled[b];
    if (x.confidence != y.confidence) return x.confidence < y.confidence;
    return x.id < y.id;
  });

  // Returns the human label if the budget and ledger allow it.
  auto buy = [&](const UnlabeledExample& ex) -> std::optional<LabeledExample> {
    const Money c = human.cost_of(ex);
    if (out.spent + c > human_budget) return std::nullopt;
    auto token = ledger.reserve(c, ex.id, LabelerKind::kHuman);
    if (!token) return std::nullopt;
    LabeledExample rec = human.label(ex);
    ledger.settle_and_close(*token, rec.cost);
    out.spent += rec.cost;
    return rec;
  };

  for (std::size_t index : rank) {
    auto rec = buy(pool.get(llm_labeled[index].id));
    if (!rec) break;
    llm_labeled[index] = std::move(*rec);
    ++out.relabeled;
  }
  if (out.relabeled == llm_labeled.size()) {
    for (const auto& id : fresh_candidates) {
      auto rec = buy(pool.get(id));
      if (!rec) break;
      llm_labeled.push_back(std::move(*rec));
      ++out.fresh;
    }
  }
  std::sort(llm_labeled.begin(), llm_labeled.end(), by_id);
  out.records = std::move(llm_labeled);
  return out;
}

RunReport run_plan(const LabelingPlan& plan, const Pool& pool, LlmLabeler* llm,
                   const HumanOracle& human, BudgetLedger& ledger, const RunOptions& options) {
  RunReport report;
  std::map<std::string, LabeledExample> records;

  // Human phase: demos first, then RandomMix human items.
  std::vector<Demo> demos;
  auto label_by_human = [&](const std::string& id) -> std::optional<LabeledExample> {
    const auto& ex = pool.get(id);
    auto token = ledger.reserve(human.cost_of(ex), id, LabelerKind::kHuman);
    if (!token) {
      report.budget_exhausted = true;
      return std::nullopt;
    }
    try {
      LabeledExample rec = human.label(ex);
      ledger.settle_and_close(*token, rec.cost);
      return rec;
    } catch (const Error& e) {
      ledger.release(*token);
      report.failed.push_back({id, e.what()});
      return std::nullopt;
    }
  };
  for (const auto& id : plan.demo_ids) {
    auto rec = label_by_human(id);
    if (!rec) continue;
    demos.push_back({pool.get(id).text, rec->label});
    records[id] = std::move(*rec);
  }
  for (const auto& id : plan.human_item_ids) {
    if (auto rec = label_by_human(id)) records[id] = std::move(*rec);
  }

  // LLM phase.
  std::vector<LabeledExample> llm_records;
  if (!plan.llm_item_ids.empty()) {
    if (llm == nullptr) throw Error(ErrorKind::kInvalidArgument, "plan needs an LLM labeler");
    if (demos.size() != plan.demo_ids.size()) {
      for (const auto& id : plan.llm_item_ids) report.failed.push_back({id, "demonstrations unavailable"});
    } else {
      const DemoSet demo_set(demos);
      const std::size_t window =
          llm->concurrent() ? std::max<std::size_t>(1, options.max_in_flight) : 1;

      struct InFlight {
        const UnlabeledExample* ex;
        ReservationToken token;
        Money hold;
      };
      auto settle = [&](InFlight& job, LabeledExample rec) {
        if (rec.cost <= job.hold) {
          ledger.settle_and_close(job.token, rec.cost);
        } else {
          ledger.settle_and_close(job.token, job.hold);
          const Money extra = rec.cost - job.hold;
          if (auto top = ledger.reserve(extra, job.ex->id, LabelerKind::kLlm)) {
            ledger.settle_and_close(*top, extra);
          } else {
            report.uncharged_overrun += extra;
          }
        }
        llm_records.push_back(std::move(rec));
      };

      std::size_t next = 0;
      while (next < plan.llm_item_ids.size() && !report.budget_exhausted) {
        std::vector<InFlight> batch;
        while (batch.size() < window && next < plan.llm_item_ids.size()) {
          const auto& ex = pool.get(plan.llm_item_ids[next]);
          Money hold;
          try {
            hold = llm->reservation_for(ex, demo_set);
          } catch (const Error& e) {
            report.failed.push_back({ex.id, e.what()});
            ++next;
            continue;
          }
          auto token = ledger.reserve(hold, ex.id, LabelerKind::kLlm);
          if (!token) {
            report.budget_exhausted = true;
            break;
          }
          batch.push_back({&ex, *token, hold});
          ++next;
        }
        if (batch.size() == 1 || window == 1) {
          for (auto& job : batch) {
            try {
              settle(job, llm->label(*job.ex, demo_set));
            } catch (const Error& e) {
              ledger.release(job.token);
              report.failed.push_back({job.ex->id, e.what()});
            }
          }
          continue;
        }
        std::vector<std::future<LabeledExample>> futures;
        futures.reserve(batch.size());
        for (auto& job : batch) {
          futures.push_back(std::async(std::launch::async,
                                       [&, ex = job.ex] { return llm->label(*ex, demo_set); }));
        }
        // Commit in submission order so the ledger sequence is reproducible.
        for (std::size_t i = 0; i < batch.size(); ++i) {
          try {
            settle(batch[i], futures[i].get());
          } catch (const Error& e) {
            ledger.release(batch[i].token);
            report.failed.push_back({batch[i].ex->id, e.what()});
          }
        }
      }
      for (; next < plan.llm_item_ids.size(); ++next) {
        report.failed.push_back({plan.llm_item_ids[next], "budget exhausted"});
      }
    }
  }

  // Active relabeling runs only after every LLM label is in.
  if (plan.strategy == Strategy::kActiveLabeling && !llm_records.empty()) {
    auto outcome = active_relabel(std::move(llm_records), plan.human_budget, human, ledger, pool,
                                  plan.fresh_human_ids);
    report.relabeled = outcome.relabeled;
    report.fresh_human = outcome.fresh;
    llm_records = std::move(outcome.records);
  }
  for (auto& rec : llm_records) records[rec.id] = std::move(rec);

  report.records.reserve(records.size());
  for (auto& [id, rec] : records) report.records.push_back(std::move(rec));
  std::sort(report.failed.begin(), report.failed.end(),
            [](const FailedItem& a, const FailedItem& b) { return a.id < b.id; });
  report.spent_llm = ledger.settled_for(LabelerKind::kLlm);
  report.spent_human = ledger.settled_for(LabelerKind::kHuman);
  report.unspent = ledger.total() - ledger.settled();
  return report;
}

}  // namespace labelcost
