// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <set>
#include <thread>

#include "labelcost/errors.hpp"
#include "labelcost/rng.hpp"
#include "labelcost/strategy.hpp"
#include "support.hpp"

using namespace labelcost;
using testing::dollars;

namespace {

const CostSchedule kCosts;

SimulatedLlmLabeler perfect_labeler(Money unit) {
  return SimulatedLlmLabeler({"Negative", "Positive"}, SimCalibration::constant(1.0), 0, unit);
}

SimulatedLlmLabeler noisy_labeler(Money unit, std::uint64_t seed) {
  return SimulatedLlmLabeler({"Negative", "Positive"}, SimCalibration::affine(0.5, 0.95), seed, unit);
}

struct Run {
  LabelingPlan plan;
  RunReport report;
  LedgerSnapshot ledger;
};

Run execute(const Pool& pool, Money budget, const StrategyConfig& config, LlmLabeler* llm,
            std::size_t in_flight = 1) {
  Run r;
  r.plan = plan(budget, pool, config, kCosts);
  BudgetLedger ledger(budget);
  const HumanOracle human(pool.task_kind(), kCosts);
  r.report = run_plan(r.plan, pool, llm, human, ledger, RunOptions{in_flight});
  r.ledger = ledger.snapshot();
  return r;
}

std::set<std::string> ids_of(const RunReport& report) {
  std::set<std::string> ids;
  for (const auto& r : report.records) ids.insert(r.id);
  return ids;
}

LabeledExample llm_record(std::string id, double confidence, std::string label = "Negative") {
  return {std::move(id), std::move(label), LabelSource::kLlm, confidence, Money::from_micros(100), 1};
}

Pool lettered_pool() {
  std::vector<UnlabeledExample> xs;
  for (const char* id : {"a", "b", "c", "d", "e", "f"}) xs.push_back(testing::example(id, "word", "Positive"));
  return Pool(std::move(xs), TaskKind::kClassification, std::vector<std::string>{"Negative", "Positive"});
}

/// Thread-safe labeler that answers gold after an id-dependent delay.
class SlowGoldLabeler final : public LlmLabeler {
 public:
  Money reservation_for(const UnlabeledExample&, const DemoSet&) const override {
    return Money::from_micros(2316);
  }
  LabeledExample label(const UnlabeledExample& query, const DemoSet& demos) override {
    const auto h = derive_seed(7, query.id);
    std::this_thread::sleep_for(std::chrono::microseconds(h % 400));
    return {query.id, *query.gold_label, LabelSource::kLlm, static_cast<double>(h % 1000) / 1000.0,
            Money::from_micros(2316), demos.shots()};
  }
  bool concurrent() const override { return true; }
};

}  // namespace

TEST_CASE("human-only 1.1 dollars buys ten labels") {
  const auto pool = testing::binary_pool(100);
  const auto r = execute(pool, dollars("1.1"), StrategyConfig::human_only(0), nullptr);
  CHECK(r.plan.human_item_ids.size() == 10);
  CHECK(r.plan.human_item_ids == sample(pool, 10, 0));
  CHECK(r.report.records.size() == 10);
  CHECK(r.report.spent_human == dollars("1.1"));
  for (const auto& rec : r.report.records) {
    CHECK(rec.source == LabelSource::kHuman);
    CHECK(rec.confidence == kHumanConfidence);
    CHECK(rec.label == *pool.get(rec.id).gold_label);
  }
}

TEST_CASE("llm-only 1.1 dollars with two shots buys 379 labels after demo overhead") {
  const auto pool = testing::binary_pool(1000);
  auto labeler = perfect_labeler(llm_label_cost(19.3, 2, kCosts));
  const auto r = execute(pool, dollars("1.1"), StrategyConfig::llm_only(2, 3), &labeler);
  CHECK(r.plan.demo_overhead == dollars("0.22"));
  CHECK(r.plan.llm_unit_cost.micros() == 2316);
  CHECK(r.plan.llm_budget == dollars("0.88"));
  CHECK(r.plan.llm_item_ids.size() == 379);
  CHECK(r.report.count(LabelSource::kLlm) == 379);
  CHECK(r.report.count(LabelSource::kHuman) == 2);
  CHECK(r.report.spent_llm.micros() == 379 * 2316);
  for (const auto& rec : r.report.records) CHECK(rec.label == *pool.get(rec.id).gold_label);
}

TEST_CASE("an oversized budget covers the pool once and leaves the rest unspent") {
  const auto pool = testing::binary_pool(50);
  auto labeler = perfect_labeler(llm_label_cost(19.3, 2, kCosts));
  const auto r = execute(pool, dollars("100"), StrategyConfig::llm_only(2, 1), &labeler);
  CHECK(r.plan.planned_items() == 50);
  CHECK(r.report.records.size() == 50);
  CHECK(r.report.spent_llm.micros() == 48 * 2316);
  CHECK(r.report.unspent == dollars("100") - dollars("0.22") - Money::from_micros(48 * 2316));
}

TEST_CASE("random mix draws disjoint human and llm items") {
  const auto pool = testing::binary_pool(200);
  const Money unit = llm_label_cost(19.3, 1, kCosts);
  auto labeler = perfect_labeler(unit);
  // Each side affords four labels: 0.44 human, 0.11 demo + 4 LLM labels.
  const Money llm_side = dollars("0.11") + Money::from_micros(4 * unit.micros());
  const Money budget = dollars("0.44") + llm_side;
  const auto ratio = static_cast<double>(dollars("0.44").micros()) / static_cast<double>(budget.micros());
  const auto p = plan(budget, pool, StrategyConfig::random_mix(ratio, 1, 5), kCosts);
  REQUIRE(p.human_item_ids.size() == 4);
  REQUIRE(p.llm_item_ids.size() == 4);
  std::set<std::string> all(p.human_item_ids.begin(), p.human_item_ids.end());
  all.insert(p.llm_item_ids.begin(), p.llm_item_ids.end());
  all.insert(p.demo_ids.begin(), p.demo_ids.end());
  CHECK(all.size() == 9);
  CHECK(p.llm_budget + p.human_budget + p.demo_overhead <= budget);
}

TEST_CASE("infeasible budgets name their shortfall") {
  const auto pool = testing::binary_pool(100);
  try {
    plan(dollars("0.05"), pool, StrategyConfig::human_only(0), kCosts);
    FAIL("expected infeasible plan");
  } catch (const InfeasiblePlan& e) {
    CHECK(e.shortfall_micros() == 60000);
  }
  try {
    plan(dollars("0.2"), pool, StrategyConfig::llm_only(2, 0), kCosts);
    FAIL("expected infeasible plan");
  } catch (const InfeasiblePlan& e) {
    CHECK(e.shortfall_micros() == 22316);
    CHECK(std::string(e.what()).find("0.022316") != std::string::npos);
  }
  CHECK_THROWS_AS(plan(Money{}, pool, StrategyConfig::human_only(0), kCosts), Error);
}

TEST_CASE("strategy configs enforce their ratio and shot invariants") {
  CHECK_THROWS_AS((StrategyConfig{Strategy::kHumanOnly, 0.5, 0, 0}.validate()), Error);
  CHECK_THROWS_AS((StrategyConfig{Strategy::kLlmOnly, 0.5, 2, 0}.validate()), Error);
  CHECK_THROWS_AS(StrategyConfig::llm_only(0, 0).validate(), Error);
  CHECK_THROWS_AS(StrategyConfig::random_mix(1.5, 2, 0).validate(), Error);
  CHECK_NOTHROW(StrategyConfig::random_mix(1.0, 0, 0).validate());
  CHECK(parse_strategy("active") == Strategy::kActiveLabeling);
  CHECK(to_string(parse_strategy("random_mix")) == "random_mix");
  CHECK_THROWS_AS(parse_strategy("greedy"), Error);
}

TEST_CASE("active labeling is rejected for generation tasks") {
  std::vector<UnlabeledExample> xs{testing::example("a", "some article text", "headline")};
  xs.push_back(testing::example("b", "other article", "another"));
  const Pool pool(std::move(xs), TaskKind::kGeneration, std::nullopt);
  try {
    plan(dollars("10"), pool, StrategyConfig::active(0.5, 1, 0), kCosts);
    FAIL("expected unsupported strategy");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUnsupportedStrategy);
  }
}

TEST_CASE("active relabel redoes the least confident label") {
  const auto pool = lettered_pool();
  const HumanOracle human(TaskKind::kClassification, kCosts);
  BudgetLedger ledger(dollars("1"));
  const auto out = active_relabel({llm_record("a", 0.9), llm_record("b", 0.2), llm_record("c", 0.5)},
                                  dollars("0.11"), human, ledger, pool);
  CHECK(out.relabeled == 1);
  REQUIRE(out.records.size() == 3);
  CHECK(out.records[0] == llm_record("a", 0.9));
  CHECK(out.records[1].source == LabelSource::kHuman);
  CHECK(out.records[1].label == "Positive");
  CHECK(out.records[2] == llm_record("c", 0.5));
}

TEST_CASE("active relabel overflow buys fresh human labels") {
  const auto pool = lettered_pool();
  const HumanOracle human(TaskKind::kClassification, kCosts);
  BudgetLedger ledger(dollars("1"));
  const std::vector<std::string> fresh{"d", "e", "f"};
  const auto out = active_relabel({llm_record("a", 0.9), llm_record("b", 0.2), llm_record("c", 0.5)},
                                  dollars("0.55"), human, ledger, pool, fresh);
  CHECK(out.relabeled == 3);
  CHECK(out.fresh == 2);
  CHECK(out.spent == dollars("0.55"));
  REQUIRE(out.records.size() == 5);
  for (const auto& r : out.records) CHECK(r.source == LabelSource::kHuman);
  CHECK(out.records.back().id == "e");
  const auto entries = ledger.entries();
  REQUIRE(entries.size() == 5);
  const std::vector<std::string> order{"b", "c", "a", "d", "e"};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(entries[i].example_id == order[i]);
    CHECK(entries[i].amount == dollars("0.11"));
  }
  CHECK(ledger.settled() == dollars("0.55"));
}

TEST_CASE("active relabel breaks confidence ties by id") {
  const auto pool = lettered_pool();
  const HumanOracle human(TaskKind::kClassification, kCosts);
  BudgetLedger ledger(dollars("1"));
  const auto out = active_relabel({llm_record("c", 0.3), llm_record("b", 0.3)}, dollars("0.11"),
                                  human, ledger, pool);
  CHECK(out.records[0].id == "b");
  CHECK(out.records[0].source == LabelSource::kHuman);
  CHECK(out.records[1].source == LabelSource::kLlm);
}

TEST_CASE("active relabel with no human budget returns its input") {
  const auto pool = lettered_pool();
  const HumanOracle human(TaskKind::kClassification, kCosts);
  BudgetLedger ledger(dollars("1"));
  const auto out = active_relabel({llm_record("b", 0.3), llm_record("a", 0.1)}, Money{}, human, ledger, pool);
  CHECK(out.relabeled == 0);
  CHECK(out.records == std::vector<LabeledExample>{llm_record("a", 0.1), llm_record("b", 0.3)});
  CHECK(ledger.entries().empty());
}

TEST_CASE("active labeling runs relabel the least confident llm labels end to end") {
  const auto pool = testing::binary_pool(500);
  auto labeler = noisy_labeler(llm_label_cost(19.3, 2, kCosts), 4);
  const auto r = execute(pool, dollars("2.2"), StrategyConfig::active(0.5, 2, 9), &labeler);
  CHECK(r.plan.relabel_quota == 10);
  CHECK(r.report.relabeled == 10);
  CHECK(r.report.count(LabelSource::kHuman) == 12);
  double max_relabeled = -1;
  double min_kept = 2;
  const DemoSet demos(std::vector<Demo>{{"x", "Positive"}, {"y", "Negative"}});
  for (const auto& id : r.plan.llm_item_ids) {
    const double c = labeler.label(pool.get(id), demos).confidence;
    const auto rec = std::find_if(r.report.records.begin(), r.report.records.end(),
                                  [&](const LabeledExample& x) { return x.id == id; });
    REQUIRE(rec != r.report.records.end());
    if (rec->source == LabelSource::kHuman) max_relabeled = std::max(max_relabeled, c);
    else min_kept = std::min(min_kept, c);
  }
  CHECK(max_relabeled <= min_kept);
}

TEST_CASE("budget is conserved for every strategy and seed") {
  const auto pool = testing::binary_pool(400);
  Rng rng(99);
  const std::vector<double> ratios{0.0, 0.25, 0.5, 0.75, 1.0};
  for (int trial = 0; trial < 120; ++trial) {
    const auto seed = rng.next();
    const std::size_t shots = 1 + rng.below(4);
    const Money budget = Money::from_micros(static_cast<std::int64_t>(500000 + rng.below(4000000)));
    StrategyConfig config;
    switch (rng.below(4)) {
      case 0: config = StrategyConfig::human_only(seed); break;
      case 1: config = StrategyConfig::llm_only(shots, seed); break;
      case 2: config = StrategyConfig::random_mix(ratios[rng.below(5)], shots, seed); break;
      default: config = StrategyConfig::active(ratios[rng.below(4)], shots, seed); break;
    }
    if (config.strategy == Strategy::kRandomMix && config.human_ratio == 1.0) config.shots = 0;
    CAPTURE(trial);
    auto labeler = noisy_labeler(llm_label_cost(19.3, std::max<std::size_t>(1, config.shots), kCosts), seed);
    Run r;
    try {
      r = execute(pool, budget, config, &labeler);
    } catch (const InfeasiblePlan&) {
      continue;
    }
    CHECK(r.ledger.settled + r.report.unspent == budget);
    CHECK(r.ledger.settled <= budget);
    CHECK(r.ledger.reserved == Money{});
    CHECK(r.report.spent_llm + r.report.spent_human == r.ledger.settled);
    CHECK(r.plan.llm_budget + r.plan.human_budget + r.plan.demo_overhead <= budget);
    CHECK(ids_of(r.report).size() == r.report.records.size());
  }
}

TEST_CASE("a larger budget labels a superset of ids") {
  const auto pool = testing::binary_pool(300);
  const std::vector<StrategyConfig> configs{StrategyConfig::human_only(4), StrategyConfig::llm_only(2, 4),
                                            StrategyConfig::random_mix(0.5, 2, 4),
                                            StrategyConfig::active(0.25, 2, 4)};
  for (const auto& config : configs) {
    CAPTURE(to_string(config.strategy));
    std::set<std::string> previous;
    for (const char* b : {"1.1", "2.2", "4.4", "8.8", "17.6", "35.2", "70.4"}) {
      auto labeler = noisy_labeler(llm_label_cost(19.3, std::max<std::size_t>(1, config.shots), kCosts), 1);
      const auto ids = ids_of(execute(pool, dollars(b), config, &labeler).report);
      CHECK(std::includes(ids.begin(), ids.end(), previous.begin(), previous.end()));
      CHECK(ids.size() >= previous.size());
      previous = ids;
    }
  }
}

TEST_CASE("concurrent labeling commits the same records and ledger as serial labeling") {
  const auto pool = testing::binary_pool(300);
  SlowGoldLabeler labeler;
  const auto config = StrategyConfig::active(0.5, 2, 8);
  const auto serial = execute(pool, dollars("1.1"), config, &labeler, 1);
  const auto parallel = execute(pool, dollars("1.1"), config, &labeler, 8);
  CHECK(serial.report.records == parallel.report.records);
  CHECK(serial.ledger == parallel.ledger);
  CHECK(serial.report.records.size() == serial.plan.planned_items());
}

TEST_CASE("labeler failures are reported and their holds released") {
  class Flaky final : public LlmLabeler {
   public:
    Money reservation_for(const UnlabeledExample&, const DemoSet&) const override {
      return Money::from_micros(1000);
    }
    LabeledExample label(const UnlabeledExample& q, const DemoSet&) override {
      if (q.id.back() == '3') throw Error(ErrorKind::kTransport, "down");
      return {q.id, *q.gold_label, LabelSource::kLlm, 0.5, Money::from_micros(1000), 1};
    }
  } flaky;
  const auto pool = testing::binary_pool(40);
  const auto r = execute(pool, dollars("0.2"), StrategyConfig::llm_only(1, 2), &flaky);
  CHECK(r.report.records.size() + r.report.failed.size() == r.plan.planned_items());
  CHECK_FALSE(r.report.failed.empty());
  for (const auto& f : r.report.failed) CHECK(f.id.back() == '3');
  CHECK(r.ledger.reserved == Money{});
  CHECK(r.ledger.holds.empty());
}
