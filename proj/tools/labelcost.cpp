// SPDX-License-Identifier: Apache-2.0
// labelcost: cost tables, labeling runs, sweeps and confidence analysis.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "labelcost/errors.hpp"
#include "labelcost/experiment.hpp"
#include "labelcost/synth.hpp"

namespace lc = labelcost;

namespace {

constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw lc::Error(lc::ErrorKind::kIo, "cannot write " + path);
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw lc::Error(lc::ErrorKind::kIo, "cannot open " + path);
  return in;
}

struct CommonFlags {
  std::string config_path;
  std::optional<std::string> pool;
};

lc::RunConfig load_config(const CommonFlags& flags) {
  lc::RunConfig cfg = flags.config_path.empty() ? lc::RunConfig{} : lc::load_run_config(flags.config_path);
  if (flags.pool) cfg.task.train_pool = *flags.pool;
  return cfg;
}

lc::Pool load_train_pool(const lc::RunConfig& cfg) {
  if (cfg.task.train_pool.empty()) {
    throw lc::Error(lc::ErrorKind::kConfig, "no pool given (task.train_pool or --pool)");
  }
  return lc::load_pool_file(cfg.task.train_pool, cfg.task.config);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budget-constrained data labeling with LLM and human labelers"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "labelcost 0.1.0");

  // costs ------------------------------------------------------------------
  auto* costs = app.add_subcommand("costs", "Print per-label LLM and human costs");
  std::string costs_config;
  costs->add_option("-c,--config", costs_config, "Run config (cost schedule and datasets)")
      ->check(CLI::ExistingFile);

  // synth ------------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "Write a synthetic word-cluster pool");
  lc::WordClusterSpec synth_spec;
  std::string synth_out;
  synth->add_option("-o,--out", synth_out, "Output pool file")->required();
  synth->add_option("-n,--items", synth_spec.num_items, "Number of examples")->capture_default_str();
  synth->add_option("--labels", synth_spec.labels, "Class labels")->capture_default_str();
  synth->add_option("--separation", synth_spec.separation, "Mean boost of class words")->capture_default_str();
  synth->add_option("--noise", synth_spec.noise_sd, "Word-count noise sd")->capture_default_str();
  synth->add_option("--seed", synth_spec.seed, "Generator seed")->capture_default_str();
  synth->add_option("--id-prefix", synth_spec.id_prefix, "Id prefix")->capture_default_str();

  // label ------------------------------------------------------------------
  auto* label = app.add_subcommand("label", "Run one labeling strategy under a budget");
  CommonFlags label_flags;
  std::string strategy_name;
  std::string budget_text;
  std::size_t label_shots = 0;
  std::optional<double> label_ratio;
  std::uint64_t label_seed = 0;
  double label_alpha = 1.0;
  std::string label_out;
  bool label_inline = false;
  bool label_allow_live = false;
  label->add_option("-c,--config", label_flags.config_path, "Run config")->required()->check(CLI::ExistingFile);
  label->add_option("--pool", label_flags.pool, "Override task.train_pool");
  label->add_option("-s,--strategy", strategy_name, "human_only | llm_only | random_mix | active")->required();
  label->add_option("-b,--budget", budget_text, "Budget in dollars")->required();
  label->add_option("--shots", label_shots, "Demonstrations per prompt (default: first of config grid)");
  label->add_option("--ratio", label_ratio, "Human share of the budget for mixed strategies");
  label->add_option("--seed", label_seed, "Sampling seed")->capture_default_str();
  label->add_option("--alpha", label_alpha, "Weight of human labels")->capture_default_str();
  label->add_option("-o,--out", label_out, "Labeled-set output file")->required();
  label->add_flag("--inline-text", label_inline, "Copy example text into the labeled set");
  label->add_flag("--allow-live-spend", label_allow_live, "Lift the live-API spend cap");

  // sweep ------------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "Run the full strategy x budget x seed grid");
  CommonFlags sweep_flags;
  std::string sweep_out;
  std::string sweep_summary;
  std::optional<std::size_t> sweep_parallelism;
  std::vector<std::uint64_t> sweep_seeds;
  bool sweep_allow_live = false;
  bool sweep_quiet = false;
  sweep->add_option("-c,--config", sweep_flags.config_path, "Run config")->required()->check(CLI::ExistingFile);
  sweep->add_option("--pool", sweep_flags.pool, "Override task.train_pool");
  sweep->add_option("-o,--out", sweep_out, "Per-cell report CSV (default: stdout)");
  sweep->add_option("--summary", sweep_summary, "Aggregate mean/stddev CSV");
  sweep->add_option("-j,--parallelism", sweep_parallelism, "Concurrent cells");
  sweep->add_option("--seeds", sweep_seeds, "Override the seed list");
  sweep->add_flag("--allow-live-spend", sweep_allow_live, "Lift the live-API spend cap");
  sweep->add_flag("-q,--quiet", sweep_quiet, "No per-cell progress on stderr");

  // deciles ----------------------------------------------------------------
  auto* deciles = app.add_subcommand("deciles", "Accuracy by LLM confidence decile");
  CommonFlags decile_flags;
  std::string decile_set;
  deciles->add_option("-c,--config", decile_flags.config_path, "Run config")->check(CLI::ExistingFile);
  deciles->add_option("--pool", decile_flags.pool, "Pool with gold labels");
  deciles->add_option("set", decile_set, "Labeled-set file")->required()->check(CLI::ExistingFile);

  // train ------------------------------------------------------------------
  auto* train = app.add_subcommand("train", "Train the downstream classifier on a labeled set");
  CommonFlags train_flags;
  std::string train_set;
  std::string train_out;
  std::optional<double> train_lr;
  std::optional<std::size_t> train_epochs;
  std::optional<std::size_t> train_batch;
  std::uint64_t train_seed = 0;
  train->add_option("-c,--config", train_flags.config_path, "Run config")->required()->check(CLI::ExistingFile);
  train->add_option("--pool", train_flags.pool, "Pool holding the set's texts");
  train->add_option("set", train_set, "Labeled-set file")->required()->check(CLI::ExistingFile);
  train->add_option("-o,--out", train_out, "Model output file")->required();
  train->add_option("--lr", train_lr, "Learning rate");
  train->add_option("--epochs", train_epochs, "Epochs");
  train->add_option("--batch-size", train_batch, "Mini-batch size");
  train->add_option("--seed", train_seed, "Shuffle seed")->capture_default_str();

  // eval -------------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "Accuracy of a trained model on a gold pool");
  CommonFlags eval_flags;
  std::string eval_model;
  eval->add_option("-c,--config", eval_flags.config_path, "Run config")->required()->check(CLI::ExistingFile);
  eval->add_option("--pool", eval_flags.pool, "Evaluation pool (default: task.test_pool)");
  eval->add_option("model", eval_model, "Model file")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*costs) {
      const lc::RunConfig cfg = costs_config.empty() ? lc::RunConfig{} : lc::load_run_config(costs_config);
      cfg.costs.validate();
      const auto& datasets = cfg.cost_datasets.empty() ? lc::reference_datasets() : cfg.cost_datasets;
      lc::write_cost_table(lc::cost_rows(datasets, cfg.costs), std::cout);
    } else if (*synth) {
      const auto examples = lc::generate_word_clusters(synth_spec);
      auto out = open_out(synth_out);
      lc::export_examples(examples, out);
      std::cerr << "wrote " << examples.size() << " examples to " << synth_out << '\n';
    } else if (*label) {
      const lc::RunConfig cfg = load_config(label_flags);
      cfg.validate();
      const lc::Pool pool = load_train_pool(cfg);
      lc::StrategyConfig sc;
      sc.strategy = lc::parse_strategy(strategy_name);
      sc.seed = label_seed;
      switch (sc.strategy) {
        case lc::Strategy::kHumanOnly: sc.human_ratio = 1.0; break;
        case lc::Strategy::kLlmOnly: sc.human_ratio = 0.0; break;
        default: sc.human_ratio = label_ratio.value_or(cfg.human_ratios.empty() ? 0.5 : cfg.human_ratios.front());
      }
      if (lc::uses_llm(sc.strategy) && sc.human_ratio < 1.0) {
        sc.shots = label_shots > 0 ? label_shots : cfg.effective_shots().front();
      }
      const lc::LabelerFactory labelers(cfg, label_allow_live);
      const auto outcome = lc::run_labeling(cfg, pool, sc, lc::Money::parse(budget_text), label_alpha, labelers);
      auto out = open_out(label_out);
      lc::export_set(outcome.set, out, label_inline ? &pool : nullptr);
      lc::write_run_summary(outcome, std::cout);
      if (labelers.live()) std::cout << "live_spend    " << lc::format_fixed(labelers.live_spend()) << '\n';
    } else if (*sweep) {
      lc::RunConfig cfg = load_config(sweep_flags);
      if (sweep_parallelism) cfg.parallelism = *sweep_parallelism;
      if (!sweep_seeds.empty()) cfg.seeds = sweep_seeds;
      lc::SweepOptions options;
      options.allow_live_spend = sweep_allow_live;
      options.progress = sweep_quiet ? nullptr : &std::cerr;
      const auto report = lc::run_sweep(cfg, options);
      if (sweep_out.empty()) {
        lc::write_report_csv(report, std::cout);
      } else {
        auto out = open_out(sweep_out);
        lc::write_report_csv(report, out);
      }
      if (!sweep_summary.empty()) {
        auto out = open_out(sweep_summary);
        lc::write_summary_csv(report, out);
      }
      std::cerr << report.labeling_cells << " cells, " << report.failed_cells << " failed";
      if (cfg.backend.kind == lc::BackendKind::kLive) {
        std::cerr << ", live spend " << lc::format_fixed(report.live_spend);
      }
      std::cerr << '\n';
    } else if (*deciles) {
      const lc::RunConfig cfg = load_config(decile_flags);
      const lc::Pool pool = load_train_pool(cfg);
      auto in = open_in(decile_set);
      const auto set = lc::import_set(in);
      lc::write_decile_report(lc::analyze_deciles(set, pool), std::cout);
    } else if (*train) {
      const lc::RunConfig cfg = load_config(train_flags);
      const lc::Pool pool = load_train_pool(cfg);
      auto in = open_in(train_set);
      const auto set = lc::import_set(in);
      lc::Hyperparams hp = cfg.hyperparams.front();
      if (train_lr) hp.learning_rate = *train_lr;
      if (train_epochs) hp.epochs = *train_epochs;
      if (train_batch) hp.batch_size = *train_batch;
      std::optional<lc::Pool> dev;
      if (cfg.task.dev_pool) dev.emplace(lc::load_pool_file(*cfg.task.dev_pool, cfg.task.config));
      const auto model = lc::train(set, pool, cfg.learner, hp, train_seed, dev ? &*dev : nullptr);
      auto out = open_out(train_out);
      lc::save_model(model, out);
      std::cout << "trained on " << set.size() << " records, kept epoch " << model.meta().best_epoch << " of "
                << model.meta().epochs_run << '\n';
    } else if (*eval) {
      const lc::RunConfig cfg = load_config(CommonFlags{eval_flags.config_path, std::nullopt});
      std::filesystem::path pool_path;
      if (eval_flags.pool) pool_path = *eval_flags.pool;
      else if (cfg.task.test_pool) pool_path = *cfg.task.test_pool;
      else throw lc::Error(lc::ErrorKind::kConfig, "no evaluation pool (task.test_pool or --pool)");
      const lc::Pool pool = lc::load_pool_file(pool_path, cfg.task.config);
      auto in = open_in(eval_model);
      const auto model = lc::load_model(in);
      std::cout << "accuracy " << std::fixed << std::setprecision(6) << lc::accuracy(model, pool) << '\n';
    }
  } catch (const lc::InfeasiblePlan& e) {
    std::cerr << "labelcost: infeasible plan: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const lc::Error& e) {
    std::cerr << "labelcost: " << lc::to_string(e.kind()) << ": " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "labelcost: " << e.what() << '\n';
    return kExitError;
  }
  return EXIT_SUCCESS;
}
