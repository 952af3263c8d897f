// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "labelcost/completion_backends.hpp"
#include "labelcost/cost_model.hpp"
#include "labelcost/data_pool.hpp"
#include "labelcost/labelers.hpp"
#include "labelcost/learner.hpp"
#include "labelcost/metrics.hpp"
#include "labelcost/strategy.hpp"
#include "labelcost/supervision_set.hpp"

namespace labelcost {

enum class BackendKind { kSimulated, kLive, kRecorded };

struct BackendConfig {
  BackendKind kind = BackendKind::kSimulated;
  double sim_floor = 0.5;
  double sim_ceiling = 0.95;
  HttpBackendConfig http;
  std::filesystem::path recording;
  CostAccounting accounting = CostAccounting::kApproximate;
  std::size_t max_in_flight = 4;
  /// Hard cap on settled live-API spend across a whole command.
  Money spend_cap = Money::from_micros(5'000'000);
  RetryPolicy retry;
};

struct TaskSection {
  std::string name = "task";
  TaskConfig config;
  std::filesystem::path train_pool;
  std::optional<std::filesystem::path> test_pool;
  std::optional<std::filesystem::path> dev_pool;
};

/// Everything one `labelcost` command needs, read from a JSON run file.
struct RunConfig {
  TaskSection task;
  CostSchedule costs;
  std::vector<Strategy> strategies{Strategy::kHumanOnly, Strategy::kLlmOnly, Strategy::kRandomMix,
                                   Strategy::kActiveLabeling};
  /// Empty means the task-kind default ({2,4,8} or {1,2,3}).
  std::vector<std::size_t> shots;
  std::vector<double> human_ratios{0.25, 0.5, 0.75};
  /// Empty means the budget ladder of the pool's human unit cost.
  std::vector<Money> budgets;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::vector<double> alphas{1.0, 3.0};
  HashedFeatureSpec learner;
  std::vector<Hyperparams> hyperparams{Hyperparams{}};
  BackendConfig backend;
  PromptTemplate prompt;
  std::size_t parallelism = 1;
  /// Datasets for the cost table; empty means the built-in profiles.
  std::vector<DatasetCostProfile> cost_datasets;

  void validate() const;
  std::vector<std::size_t> effective_shots() const;
};

/// Relative pool paths resolve against `base_dir`.
RunConfig parse_run_config(const std::string& json_text,
                           const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Cost table

struct CostRow {
  std::string dataset;
  TaskKind kind;
  double avg_tokens;
  std::vector<std::pair<std::size_t, Money>> llm;
  Money human;
};

std::vector<CostRow> cost_rows(const std::vector<DatasetCostProfile>& datasets,
                               const CostSchedule& costs);
/// Per-dataset table of 2-significant-figure costs, grouped by shot settings.
void write_cost_table(const std::vector<CostRow>& rows, std::ostream& out);

// ---------------------------------------------------------------------------
// Labeling

/// Owns the LLM labeler for one pool and strategy config, including the
/// live-spend guard shared across a command.
class LabelerFactory {
 public:
  LabelerFactory(const RunConfig& config, bool allow_live_spend);
  ~LabelerFactory();

  std::unique_ptr<LlmLabeler> make(const Pool& pool, const StrategyConfig& strategy) const;
  /// Settled live spend so far.
  Money live_spend() const;
  bool live() const { return config_.backend.kind == BackendKind::kLive; }

 private:
  const RunConfig& config_;
  std::unique_ptr<CompletionBackend> backend_;
  std::unique_ptr<BudgetLedger> spend_guard_;
};

struct LabelingOutcome {
  LabelingPlan plan;
  RunReport report;
  SupervisionSet set;
  std::optional<double> label_accuracy;
  std::optional<double> rouge_l;
};

LabelingOutcome run_labeling(const RunConfig& config, const Pool& pool,
                             const StrategyConfig& strategy, Money budget, double alpha,
                             const LabelerFactory& labelers);

void write_run_summary(const LabelingOutcome& outcome, std::ostream& out);

// ---------------------------------------------------------------------------
// Sweeps

struct SweepCell {
  Strategy strategy;
  std::size_t shots;
  double human_ratio;
  Money budget;
  std::uint64_t seed;
};

struct ReportRow {
  Strategy strategy;
  std::size_t shots;
  double human_ratio;
  double alpha;
  Money budget;
  std::uint64_t seed;
  std::string metric;
  double value;
};

struct SummaryRow {
  Strategy strategy;
  Money budget;
  std::string metric;
  /// Seeds with at least one successful cell.
  std::size_t seeds = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

struct SweepReport {
  std::vector<ReportRow> rows;
  std::vector<SummaryRow> summary;
  std::size_t labeling_cells = 0;
  std::size_t failed_cells = 0;
  Money live_spend;
};

struct SweepOptions {
  bool allow_live_spend = false;
  std::ostream* progress = nullptr;
};

/// Labeling cells in report order: strategy, shots, ratio, budget, seed.
std::vector<SweepCell> enumerate_cells(const RunConfig& config, const Pool& pool);

/// plan -> label -> assemble -> train -> evaluate for every grid point.
/// Cells run on `config.parallelism` workers; rows come back in enumeration
/// order regardless.
SweepReport run_sweep(const RunConfig& config, const SweepOptions& options = {});

/// Columns: strategy,shots,human_ratio,alpha,budget_dollars,seed,metric,value
void write_report_csv(const SweepReport& report, std::ostream& out);
/// Columns: strategy,budget_dollars,metric,seeds,mean,stddev
void write_summary_csv(const SweepReport& report, std::ostream& out);

// ---------------------------------------------------------------------------
// Confidence analysis

struct DecileReport {
  std::array<double, kDeciles> deciles{};
  double spearman = 0.0;
  std::size_t labels = 0;
};

/// Rejects sets without LLM-source records.
DecileReport analyze_deciles(const SupervisionSet& set, const Pool& pool);
void write_decile_report(const DecileReport& report, std::ostream& out);

}  // namespace labelcost
