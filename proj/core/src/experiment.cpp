// SPDX-License-Identifier: Apache-2.0
#include "labelcost/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "labelcost/errors.hpp"
#include "labelcost/rng.hpp"

namespace labelcost {
namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::kConfig, where + ": " + what);
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) config_error(where, "expected an object");
  for (const auto& [key, _] : obj.items()) {
    const bool known = std::any_of(keys.begin(), keys.end(), [&](const char* k) { return key == k; });
    if (!known) config_error(where, "unknown key '" + key + "'");
  }
}

template <typename T>
T get_as(const json& obj, const char* key, const std::string& where) {
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    config_error(where + "." + key, "wrong type");
  }
}

std::size_t get_count(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    config_error(where + "." + key, "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

double get_number(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) config_error(where + "." + key, "expected a number");
  return v.get<double>();
}

Money parse_money(const json& v, const std::string& where) {
  try {
    if (v.is_string()) return Money::parse(v.get<std::string>());
    if (v.is_number_integer()) return Money::from_micros(v.get<std::int64_t>() * 1'000'000);
    if (v.is_number_float()) {
      const std::string text = v.dump();
      if (text.find_first_of("eE") == std::string::npos) return Money::parse(text);
      return Money::from_dollars(v.get<double>());
    }
  } catch (const Error& e) {
    config_error(where, e.what());
  }
  config_error(where, "expected a dollar amount");
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  if (path.is_relative() && !base.empty()) return base / path;
  return path;
}

void parse_task(const json& j, const std::filesystem::path& base, TaskSection& task) {
  const std::string where = "task";
  check_keys(j, where,
             {"name", "kind", "label_vocabulary", "avg_tokens", "pool_cap", "tokenizer", "train_pool",
              "test_pool", "dev_pool"});
  if (j.contains("name")) task.name = get_as<std::string>(j, "name", where);
  if (j.contains("kind")) {
    try {
      task.config.kind = parse_task_kind(get_as<std::string>(j, "kind", where));
    } catch (const Error& e) {
      config_error(where + ".kind", e.what());
    }
  }
  if (j.contains("label_vocabulary")) {
    task.config.label_vocabulary = get_as<std::vector<std::string>>(j, "label_vocabulary", where);
  }
  if (j.contains("avg_tokens")) task.config.avg_tokens = get_number(j, "avg_tokens", where);
  if (j.contains("pool_cap")) task.config.pool_cap = get_count(j, "pool_cap", where);
  if (j.contains("tokenizer")) task.config.tokenizer = get_as<std::string>(j, "tokenizer", where);
  if (j.contains("train_pool")) task.train_pool = resolve(base, get_as<std::string>(j, "train_pool", where));
  if (j.contains("test_pool")) task.test_pool = resolve(base, get_as<std::string>(j, "test_pool", where));
  if (j.contains("dev_pool")) task.dev_pool = resolve(base, get_as<std::string>(j, "dev_pool", where));
}

void parse_costs(const json& j, CostSchedule& costs) {
  const std::string where = "costs";
  check_keys(j, where,
             {"llm_price_per_token", "human_unit_price", "human_unit_tokens", "human_min_charge",
              "human_pricing_mode"});
  if (j.contains("llm_price_per_token")) {
    costs.llm_price_per_token = parse_money(j["llm_price_per_token"], where + ".llm_price_per_token");
  }
  if (j.contains("human_unit_price")) {
    costs.human_unit_price = parse_money(j["human_unit_price"], where + ".human_unit_price");
  }
  if (j.contains("human_unit_tokens")) costs.human_unit_tokens = get_count(j, "human_unit_tokens", where);
  if (j.contains("human_min_charge")) {
    costs.human_min_charge = parse_money(j["human_min_charge"], where + ".human_min_charge");
  }
  if (j.contains("human_pricing_mode")) {
    try {
      costs.human_pricing_mode =
          parse_human_pricing_mode(get_as<std::string>(j, "human_pricing_mode", where));
    } catch (const Error& e) {
      config_error(where + ".human_pricing_mode", e.what());
    }
  }
}

void parse_backend(const json& j, const std::filesystem::path& base, BackendConfig& b) {
  const std::string where = "backend";
  check_keys(j, where,
             {"kind", "calibration", "endpoint", "model", "credential_env", "timeout_seconds",
              "record_path", "recording", "accounting", "max_in_flight", "spend_cap", "retry"});
  if (j.contains("kind")) {
    const auto kind = get_as<std::string>(j, "kind", where);
    if (kind == "simulated") b.kind = BackendKind::kSimulated;
    else if (kind == "live") b.kind = BackendKind::kLive;
    else if (kind == "recorded") b.kind = BackendKind::kRecorded;
    else config_error(where + ".kind", "unknown backend '" + kind + "'");
  }
  if (j.contains("calibration")) {
    const json& c = j["calibration"];
    check_keys(c, where + ".calibration", {"floor", "ceiling"});
    if (c.contains("floor")) b.sim_floor = get_number(c, "floor", where + ".calibration");
    if (c.contains("ceiling")) b.sim_ceiling = get_number(c, "ceiling", where + ".calibration");
  }
  if (j.contains("endpoint")) b.http.endpoint = get_as<std::string>(j, "endpoint", where);
  if (j.contains("model")) b.http.model = get_as<std::string>(j, "model", where);
  if (j.contains("credential_env")) b.http.credential_env = get_as<std::string>(j, "credential_env", where);
  if (j.contains("timeout_seconds")) {
    b.http.timeout = std::chrono::seconds(get_count(j, "timeout_seconds", where));
  }
  if (j.contains("record_path")) b.http.record_path = resolve(base, get_as<std::string>(j, "record_path", where));
  if (j.contains("recording")) b.recording = resolve(base, get_as<std::string>(j, "recording", where));
  if (j.contains("accounting")) {
    const auto mode = get_as<std::string>(j, "accounting", where);
    if (mode == "approximate") b.accounting = CostAccounting::kApproximate;
    else if (mode == "actual_usage") b.accounting = CostAccounting::kActualUsage;
    else config_error(where + ".accounting", "expected 'approximate' or 'actual_usage'");
  }
  if (j.contains("max_in_flight")) b.max_in_flight = get_count(j, "max_in_flight", where);
  if (j.contains("spend_cap")) b.spend_cap = parse_money(j["spend_cap"], where + ".spend_cap");
  if (j.contains("retry")) {
    const json& r = j["retry"];
    const std::string rw = where + ".retry";
    check_keys(r, rw, {"max_attempts", "initial_backoff_ms", "multiplier"});
    if (r.contains("max_attempts")) b.retry.max_attempts = get_count(r, "max_attempts", rw);
    if (r.contains("initial_backoff_ms")) {
      b.retry.initial_backoff = std::chrono::milliseconds(get_count(r, "initial_backoff_ms", rw));
    }
    if (r.contains("multiplier")) b.retry.multiplier = get_number(r, "multiplier", rw);
  }
}

void parse_prompt(const json& j, PromptTemplate& p) {
  const std::string where = "prompt";
  check_keys(j, where,
             {"instruction", "demo_format", "query_format", "separator", "stop_sequence",
              "label_first_tokens", "logit_bias", "max_prompt_tokens", "max_output_tokens"});
  if (j.contains("instruction")) p.instruction = get_as<std::string>(j, "instruction", where);
  if (j.contains("demo_format")) p.demo_format = get_as<std::string>(j, "demo_format", where);
  if (j.contains("query_format")) p.query_format = get_as<std::string>(j, "query_format", where);
  if (j.contains("separator")) p.separator = get_as<std::string>(j, "separator", where);
  if (j.contains("stop_sequence")) p.stop_sequence = get_as<std::string>(j, "stop_sequence", where);
  if (j.contains("label_first_tokens")) {
    p.label_first_tokens = get_as<std::map<std::string, std::string>>(j, "label_first_tokens", where);
  }
  if (j.contains("logit_bias")) p.logit_bias = get_as<std::map<std::string, double>>(j, "logit_bias", where);
  if (j.contains("max_prompt_tokens")) p.max_prompt_tokens = get_count(j, "max_prompt_tokens", where);
  if (j.contains("max_output_tokens")) p.max_output_tokens = get_count(j, "max_output_tokens", where);
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string plain_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Live spend guard

class SpendCappedLabeler final : public LlmLabeler {
 public:
  SpendCappedLabeler(std::unique_ptr<LlmLabeler> inner, BudgetLedger& guard)
      : inner_(std::move(inner)), guard_(guard) {}

  Money reservation_for(const UnlabeledExample& q, const DemoSet& d) const override {
    return inner_->reservation_for(q, d);
  }

  LabeledExample label(const UnlabeledExample& q, const DemoSet& d) override {
    const Money hold = inner_->reservation_for(q, d);
    const auto token = guard_.reserve(hold, q.id, LabelerKind::kLlm);
    if (!token) throw Error(ErrorKind::kBudgetExhausted, "live spend cap reached");
    try {
      LabeledExample out = inner_->label(q, d);
      guard_.settle_and_close(*token, std::min(out.cost, hold));
      return out;
    } catch (...) {
      guard_.release(*token);
      throw;
    }
  }

  bool concurrent() const override { return inner_->concurrent(); }

 private:
  std::unique_ptr<LlmLabeler> inner_;
  BudgetLedger& guard_;
};

// ---------------------------------------------------------------------------
// Sweep internals

struct FeatureCache {
  std::vector<SparseVector> features;
  std::vector<std::size_t> labels;
  std::unordered_map<std::string, std::size_t> row_of;
};

std::size_t class_index(const std::vector<std::string>& classes, const std::string& label) {
  const auto it = std::lower_bound(classes.begin(), classes.end(), label);
  if (it == classes.end() || *it != label) {
    throw Error(ErrorKind::kTraining, "label '" + label + "' is not in the vocabulary");
  }
  return static_cast<std::size_t>(it - classes.begin());
}

FeatureCache featurize_pool(const Pool& pool, const HashedFeatureSpec& spec, bool need_gold) {
  FeatureCache cache;
  cache.features.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto& ex = pool.at(i);
    cache.features.push_back(featurize(ex.text, spec));
    cache.row_of.emplace(ex.id, i);
    if (need_gold) {
      if (!ex.gold_label) {
        throw Error(ErrorKind::kInvalidArgument, "'" + ex.id + "' has no gold label to evaluate against");
      }
      cache.labels.push_back(class_index(pool.vocabulary(), *ex.gold_label));
    }
  }
  return cache;
}

std::vector<TrainingExample> cached_examples(const FeatureCache& cache) {
  std::vector<TrainingExample> out;
  out.reserve(cache.features.size());
  for (std::size_t i = 0; i < cache.features.size(); ++i) out.push_back({cache.features[i], cache.labels[i], 1.0});
  return out;
}

double cached_accuracy(const LinearModel& model, const FeatureCache& cache) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < cache.features.size(); ++i) {
    hits += model.predict_index(cache.features[i]) == cache.labels[i] ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(cache.features.size());
}

bool all_gold(const Pool& pool) {
  return std::all_of(pool.examples().begin(), pool.examples().end(),
                     [](const UnlabeledExample& ex) { return ex.gold_label.has_value(); });
}

struct LabeledCell {
  LabelingPlan plan;
  RunReport report;
};

LabeledCell label_cell(const RunConfig& config, const Pool& pool, const StrategyConfig& strategy,
                       Money budget, const LabelerFactory& labelers) {
  LabeledCell cell;
  cell.plan = plan(budget, pool, strategy, config.costs);
  BudgetLedger ledger(budget);
  const HumanOracle human(pool.task_kind(), config.costs);
  std::unique_ptr<LlmLabeler> llm;
  if (!cell.plan.llm_item_ids.empty()) llm = labelers.make(pool, strategy);
  RunOptions options;
  options.max_in_flight = std::max<std::size_t>(1, config.backend.max_in_flight);
  cell.report = run_plan(cell.plan, pool, llm.get(), human, ledger, options);
  return cell;
}

std::string primary_metric(const RunConfig& config) {
  if (config.task.config.kind == TaskKind::kGeneration) return "rouge_l";
  return config.task.test_pool ? "accuracy" : "label_accuracy";
}

struct CellResult {
  std::vector<ReportRow> rows;
  bool failed = false;
  std::string reason;
};

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig

void RunConfig::validate() const {
  if (strategies.empty()) config_error("strategies", "at least one strategy is required");
  if (seeds.empty()) config_error("seeds", "at least one seed is required");
  if (alphas.empty()) config_error("alphas", "at least one alpha is required");
  if (hyperparams.empty()) config_error("hyperparams", "at least one setting is required");
  if (task.train_pool.empty()) config_error("task.train_pool", "a training pool is required");
  for (double a : alphas) {
    if (!(a >= 0.0) || !std::isfinite(a)) config_error("alphas", "alpha must be finite and >= 0");
  }
  for (double r : human_ratios) {
    if (!(r >= 0.0 && r <= 1.0)) config_error("human_ratios", "ratios must lie in [0, 1]");
  }
  for (std::size_t s : shots) {
    if (s < 1) config_error("shots", "shot counts must be >= 1");
  }
  for (Money b : budgets) {
    if (b.micros() <= 0) config_error("budgets", "budgets must be positive");
  }
  const bool mixes = std::any_of(strategies.begin(), strategies.end(), [](Strategy s) {
    return s == Strategy::kRandomMix || s == Strategy::kActiveLabeling;
  });
  if (mixes && human_ratios.empty()) config_error("human_ratios", "mixed strategies need ratios");
  for (const auto& hp : hyperparams) {
    if (!(hp.learning_rate > 0.0) || hp.epochs == 0 || hp.batch_size == 0) {
      config_error("hyperparams", "learning_rate, epochs and batch_size must be positive");
    }
  }
  if (parallelism == 0) config_error("parallelism", "must be >= 1");
  try {
    costs.validate();
    learner.validate();
  } catch (const Error& e) {
    config_error("config", e.what());
  }
  switch (backend.kind) {
    case BackendKind::kSimulated:
      if (!(backend.sim_floor >= 0.0 && backend.sim_floor <= backend.sim_ceiling &&
            backend.sim_ceiling <= 1.0)) {
        config_error("backend.calibration", "need 0 <= floor <= ceiling <= 1");
      }
      break;
    case BackendKind::kLive:
      if (backend.http.endpoint.empty()) config_error("backend.endpoint", "required for the live backend");
      if (backend.http.credential_env.empty()) {
        config_error("backend.credential_env", "required for the live backend");
      }
      break;
    case BackendKind::kRecorded:
      if (backend.recording.empty()) config_error("backend.recording", "required for the recorded backend");
      break;
  }
}

std::vector<std::size_t> RunConfig::effective_shots() const {
  if (!shots.empty()) return shots;
  if (task.config.kind == TaskKind::kGeneration) return {1, 2, 3};
  return {2, 4, 8};
}

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, std::string("run config: ") + e.what());
  }
  check_keys(j, "config",
             {"task", "costs", "strategies", "shots", "human_ratios", "budgets", "seeds", "alphas",
              "learner", "hyperparams", "backend", "prompt", "parallelism", "cost_datasets"});
  RunConfig cfg;
  if (j.contains("task")) parse_task(j["task"], base_dir, cfg.task);
  if (j.contains("costs")) parse_costs(j["costs"], cfg.costs);
  if (j.contains("strategies")) {
    cfg.strategies.clear();
    for (const auto& s : get_as<std::vector<std::string>>(j, "strategies", "config")) {
      try {
        cfg.strategies.push_back(parse_strategy(s));
      } catch (const Error& e) {
        config_error("strategies", e.what());
      }
    }
  }
  if (j.contains("shots")) cfg.shots = get_as<std::vector<std::size_t>>(j, "shots", "config");
  if (j.contains("human_ratios")) cfg.human_ratios = get_as<std::vector<double>>(j, "human_ratios", "config");
  if (j.contains("budgets")) {
    if (!j["budgets"].is_array()) config_error("budgets", "expected an array");
    for (const auto& b : j["budgets"]) cfg.budgets.push_back(parse_money(b, "budgets"));
  }
  if (j.contains("seeds")) cfg.seeds = get_as<std::vector<std::uint64_t>>(j, "seeds", "config");
  if (j.contains("alphas")) cfg.alphas = get_as<std::vector<double>>(j, "alphas", "config");
  if (j.contains("learner")) {
    const json& l = j["learner"];
    check_keys(l, "learner", {"dimension", "ngram_orders", "hash_seed"});
    if (l.contains("dimension")) cfg.learner.dimension = get_count(l, "dimension", "learner");
    if (l.contains("ngram_orders")) {
      cfg.learner.ngram_orders = get_as<std::vector<std::size_t>>(l, "ngram_orders", "learner");
    }
    if (l.contains("hash_seed")) cfg.learner.hash_seed = get_as<std::uint64_t>(l, "hash_seed", "learner");
  }
  if (j.contains("hyperparams")) {
    if (!j["hyperparams"].is_array()) config_error("hyperparams", "expected an array");
    cfg.hyperparams.clear();
    for (const auto& h : j["hyperparams"]) {
      check_keys(h, "hyperparams", {"learning_rate", "epochs", "batch_size"});
      Hyperparams hp;
      if (h.contains("learning_rate")) hp.learning_rate = get_number(h, "learning_rate", "hyperparams");
      if (h.contains("epochs")) hp.epochs = get_count(h, "epochs", "hyperparams");
      if (h.contains("batch_size")) hp.batch_size = get_count(h, "batch_size", "hyperparams");
      cfg.hyperparams.push_back(hp);
    }
  }
  if (j.contains("backend")) parse_backend(j["backend"], base_dir, cfg.backend);
  if (j.contains("prompt")) parse_prompt(j["prompt"], cfg.prompt);
  if (j.contains("parallelism")) cfg.parallelism = get_count(j, "parallelism", "config");
  if (j.contains("cost_datasets")) {
    if (!j["cost_datasets"].is_array()) config_error("cost_datasets", "expected an array");
    for (const auto& d : j["cost_datasets"]) {
      check_keys(d, "cost_datasets", {"name", "kind", "avg_tokens", "shots"});
      DatasetCostProfile p;
      p.name = get_as<std::string>(d, "name", "cost_datasets");
      try {
        p.kind = parse_task_kind(get_as<std::string>(d, "kind", "cost_datasets"));
      } catch (const Error& e) {
        config_error("cost_datasets.kind", e.what());
      }
      p.avg_tokens = get_number(d, "avg_tokens", "cost_datasets");
      if (d.contains("shots")) {
        p.shots = get_as<std::vector<std::size_t>>(d, "shots", "cost_datasets");
      } else {
        p.shots = p.kind == TaskKind::kGeneration ? std::vector<std::size_t>{1, 2, 3}
                                                  : std::vector<std::size_t>{2, 4, 8};
      }
      cfg.cost_datasets.push_back(std::move(p));
    }
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str(), path.parent_path());
}

// ---------------------------------------------------------------------------
// Cost table

std::vector<CostRow> cost_rows(const std::vector<DatasetCostProfile>& datasets, const CostSchedule& costs) {
  std::vector<CostRow> rows;
  rows.reserve(datasets.size());
  for (const auto& d : datasets) {
    CostRow row{d.name, d.kind, d.avg_tokens, {}, human_label_cost(d.avg_tokens, d.kind, costs)};
    for (std::size_t n : d.shots) row.llm.emplace_back(n, llm_label_cost(d.avg_tokens, n, costs));
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_cost_table(const std::vector<CostRow>& rows, std::ostream& out) {
  std::vector<std::size_t> printed(rows.size(), 0);
  bool first_group = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (printed[i]) continue;
    std::vector<std::size_t> shots;
    for (const auto& [n, _] : rows[i].llm) shots.push_back(n);
    const auto same_group = [&](const CostRow& r) {
      if (r.kind != rows[i].kind || r.llm.size() != shots.size()) return false;
      for (std::size_t k = 0; k < shots.size(); ++k) {
        if (r.llm[k].first != shots[k]) return false;
      }
      return true;
    };
    if (!first_group) out << '\n';
    first_group = false;
    out << "# " << to_string(rows[i].kind) << '\n';
    out << std::left << std::setw(12) << "dataset" << std::setw(8) << "#tok";
    for (std::size_t n : shots) out << std::setw(10) << (std::to_string(n) + "-shot");
    out << "human\n";
    for (std::size_t k = i; k < rows.size(); ++k) {
      if (printed[k] || !same_group(rows[k])) continue;
      printed[k] = 1;
      const auto& r = rows[k];
      out << std::setw(12) << r.dataset << std::setw(8) << plain_number(r.avg_tokens);
      for (const auto& [_, cost] : r.llm) out << std::setw(10) << format_sig2(cost);
      out << format_sig2(r.human) << '\n';
    }
  }
  out << std::right;
}

// ---------------------------------------------------------------------------
// Labeling

LabelerFactory::LabelerFactory(const RunConfig& config, bool allow_live_spend) : config_(config) {
  switch (config.backend.kind) {
    case BackendKind::kSimulated:
      break;
    case BackendKind::kLive: {
      backend_ = std::make_unique<HttpCompletionBackend>(config.backend.http);
      const Money cap = allow_live_spend
                            ? Money::from_micros(std::numeric_limits<std::int64_t>::max() / 4)
                            : config.backend.spend_cap;
      spend_guard_ = std::make_unique<BudgetLedger>(cap);
      break;
    }
    case BackendKind::kRecorded:
      backend_ = std::make_unique<RecordedBackend>(config.backend.recording);
      break;
  }
}

LabelerFactory::~LabelerFactory() = default;

std::unique_ptr<LlmLabeler> LabelerFactory::make(const Pool& pool, const StrategyConfig& strategy) const {
  const Money unit = llm_label_cost(pool.avg_tokens(), std::max<std::size_t>(1, strategy.shots), config_.costs);
  const std::uint64_t seed = derive_seed(strategy.seed, "llm-labeler");
  if (config_.backend.kind == BackendKind::kSimulated) {
    const auto cal = SimCalibration::affine(config_.backend.sim_floor, config_.backend.sim_ceiling);
    if (pool.task_kind() == TaskKind::kGeneration) {
      return std::make_unique<SimulatedGenerationLabeler>(cal, seed, unit);
    }
    return std::make_unique<SimulatedLlmLabeler>(pool.vocabulary(), cal, seed, unit);
  }
  PromptTemplate tmpl = config_.prompt;
  tmpl.tokenizer = config_.task.config.tokenizer;
  if (!tmpl.label_vocabulary && pool.has_vocabulary()) tmpl.label_vocabulary = pool.vocabulary();
  LlmLabelingContext ctx;
  ctx.kind = pool.task_kind();
  ctx.schedule = config_.costs;
  ctx.avg_tokens = pool.avg_tokens();
  ctx.accounting = config_.backend.accounting;
  ctx.retry = config_.backend.retry;
  auto prompted = std::make_unique<PromptedLlmLabeler>(*backend_, std::move(tmpl), ctx);
  if (!spend_guard_) return prompted;
  return std::make_unique<SpendCappedLabeler>(std::move(prompted), *spend_guard_);
}

Money LabelerFactory::live_spend() const { return spend_guard_ ? spend_guard_->settled() : Money{}; }

LabelingOutcome run_labeling(const RunConfig& config, const Pool& pool, const StrategyConfig& strategy,
                             Money budget, double alpha, const LabelerFactory& labelers) {
  auto cell = label_cell(config, pool, strategy, budget, labelers);
  LabelingOutcome out{std::move(cell.plan), std::move(cell.report), {}, std::nullopt, std::nullopt};
  out.set = assemble(out.report.records, alpha);
  out.set.set_metadata("task", config.task.name);
  out.set.set_metadata("strategy", std::string(to_string(strategy.strategy)));
  out.set.set_metadata("shots", std::to_string(strategy.shots));
  out.set.set_metadata("human_ratio", fixed6(strategy.human_ratio));
  out.set.set_metadata("budget", format_fixed(budget));
  out.set.set_metadata("seed", std::to_string(strategy.seed));
  if (!out.report.records.empty() && all_gold(pool)) {
    if (pool.task_kind() == TaskKind::kClassification) {
      out.label_accuracy = label_accuracy(out.report.records, pool);
    } else {
      out.rouge_l = mean_rouge_l(out.report.records, pool);
    }
  }
  return out;
}

void write_run_summary(const LabelingOutcome& o, std::ostream& out) {
  const auto& r = o.report;
  out << "strategy      " << to_string(o.plan.strategy) << '\n';
  out << "shots         " << o.plan.shots << '\n';
  out << "seed          " << o.plan.seed << '\n';
  out << "budget        " << format_fixed(o.plan.total_budget) << '\n';
  out << "records       " << r.records.size() << '\n';
  out << "  llm         " << r.count(LabelSource::kLlm) << '\n';
  out << "  human       " << r.count(LabelSource::kHuman) << '\n';
  out << "spent_llm     " << format_fixed(r.spent_llm) << '\n';
  out << "spent_human   " << format_fixed(r.spent_human) << '\n';
  out << "unspent       " << format_fixed(r.unspent) << '\n';
  if (o.plan.strategy == Strategy::kActiveLabeling) {
    out << "relabeled     " << r.relabeled << '\n';
    out << "fresh_human   " << r.fresh_human << '\n';
  }
  if (!r.failed.empty()) {
    out << "failed        " << r.failed.size() << '\n';
    for (const auto& f : r.failed) out << "  " << f.id << ": " << f.reason << '\n';
  }
  if (r.budget_exhausted) out << "budget exhausted before the plan finished\n";
  if (r.uncharged_overrun.micros() > 0) {
    out << "uncharged     " << format_fixed(r.uncharged_overrun) << '\n';
  }
  if (o.label_accuracy) out << "label_accuracy " << fixed6(*o.label_accuracy) << '\n';
  if (o.rouge_l) out << "rouge_l       " << fixed6(*o.rouge_l) << '\n';
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<SweepCell> enumerate_cells(const RunConfig& config, const Pool& pool) {
  std::vector<Money> budgets = config.budgets;
  if (budgets.empty()) {
    budgets = budget_ladder(human_label_cost(pool.avg_tokens(), pool.task_kind(), config.costs));
  }
  const auto shots = config.effective_shots();
  std::vector<SweepCell> cells;
  const auto push = [&](Strategy s, std::size_t n, double ratio) {
    for (Money b : budgets) {
      for (std::uint64_t seed : config.seeds) cells.push_back({s, n, ratio, b, seed});
    }
  };
  for (Strategy s : config.strategies) {
    switch (s) {
      case Strategy::kHumanOnly:
        push(s, 0, 1.0);
        break;
      case Strategy::kLlmOnly:
        for (std::size_t n : shots) push(s, n, 0.0);
        break;
      case Strategy::kRandomMix:
      case Strategy::kActiveLabeling:
        for (std::size_t k = 0; k < shots.size(); ++k) {
          for (double ratio : config.human_ratios) {
            // A pure-human mix never prompts, so one shot setting covers it.
            if (s == Strategy::kRandomMix && ratio == 1.0) {
              if (k == 0) push(s, 0, ratio);
              continue;
            }
            push(s, shots[k], ratio);
          }
        }
        break;
    }
  }
  return cells;
}

SweepReport run_sweep(const RunConfig& config, const SweepOptions& options) {
  config.validate();
  const Pool pool = load_pool_file(config.task.train_pool, config.task.config);
  const bool classification = pool.task_kind() == TaskKind::kClassification;

  std::optional<Pool> test;
  std::optional<Pool> dev;
  if (config.task.test_pool) test.emplace(load_pool_file(*config.task.test_pool, config.task.config));
  if (config.task.dev_pool) dev.emplace(load_pool_file(*config.task.dev_pool, config.task.config));
  if (classification && test && test->vocabulary() != pool.vocabulary()) {
    throw Error(ErrorKind::kConfig, "test pool vocabulary differs from the training pool");
  }

  FeatureCache train_cache;
  FeatureCache test_cache;
  std::vector<TrainingExample> dev_examples;
  if (classification) {
    train_cache = featurize_pool(pool, config.learner, false);
    if (test) test_cache = featurize_pool(*test, config.learner, true);
    if (dev) dev_examples = cached_examples(featurize_pool(*dev, config.learner, true));
  }
  const bool gold = all_gold(pool);

  const LabelerFactory labelers(config, options.allow_live_spend);
  const auto cells = enumerate_cells(config, pool);
  const std::vector<double> alphas = classification ? config.alphas : std::vector<double>{config.alphas.front()};
  const std::size_t n_hp = classification ? config.hyperparams.size() : 1;

  std::vector<CellResult> results(cells.size());
  std::mutex progress_mu;

  const auto run_cell = [&](std::size_t index) {
    const SweepCell& c = cells[index];
    CellResult& res = results[index];
    const auto row = [&](double alpha, std::string metric, double value) {
      res.rows.push_back({c.strategy, c.shots, c.human_ratio, alpha, c.budget, c.seed, std::move(metric), value});
    };
    try {
      const StrategyConfig sc{c.strategy, c.human_ratio, c.shots, c.seed};
      const auto cell = label_cell(config, pool, sc, c.budget, labelers);
      const auto& records = cell.report.records;
      if (records.empty()) throw Error(ErrorKind::kTraining, "no labels were produced");
      std::optional<double> label_acc;
      std::optional<double> rouge;
      if (gold) {
        if (classification) label_acc = label_accuracy(records, pool);
        else rouge = mean_rouge_l(records, pool);
      }

      std::vector<TrainingExample> base;
      if (classification) {
        base.reserve(records.size());
        for (const auto& r : records) {
          base.push_back({train_cache.features[train_cache.row_of.at(r.id)], class_index(pool.vocabulary(), r.label), 1.0});
        }
      }
      for (double alpha : alphas) {
        for (std::size_t h = 0; h < n_hp; ++h) {
          if (classification && test) {
            for (std::size_t i = 0; i < records.size(); ++i) {
              base[i].weight = records[i].source == LabelSource::kHuman ? alpha : 1.0;
            }
            const auto model = train_examples(base, pool.vocabulary(), config.learner, config.hyperparams[h],
                                              derive_seed(c.seed, "learner"), dev_examples, alpha);
            row(alpha, "accuracy", cached_accuracy(model, test_cache));
          }
          if (label_acc) row(alpha, "label_accuracy", *label_acc);
          if (rouge) row(alpha, "rouge_l", *rouge);
        }
      }
    } catch (const std::exception& e) {
      res.rows.clear();
      res.failed = true;
      res.reason = e.what();
      for (double alpha : alphas) {
        for (std::size_t h = 0; h < n_hp; ++h) row(alpha, "failed", 1.0);
      }
    }
    if (options.progress) {
      std::lock_guard lock(progress_mu);
      *options.progress << "[" << (index + 1) << "/" << cells.size() << "] " << to_string(c.strategy)
                        << " shots=" << c.shots << " ratio=" << fixed6(c.human_ratio)
                        << " budget=" << format_fixed(c.budget) << " seed=" << c.seed
                        << (res.failed ? " FAILED: " + res.reason : std::string(" ok")) << '\n';
    }
  };

  const std::size_t workers = std::min(config.parallelism, std::max<std::size_t>(1, cells.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool_threads;
    for (std::size_t w = 0; w < workers; ++w) {
      pool_threads.emplace_back([&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) run_cell(i);
      });
    }
    for (auto& t : pool_threads) t.join();
  }

  SweepReport report;
  report.labeling_cells = cells.size();
  for (auto& r : results) {
    report.failed_cells += r.failed ? 1 : 0;
    for (auto& row : r.rows) report.rows.push_back(std::move(row));
  }
  report.live_spend = labelers.live_spend();

  // Max over labeling and training hyperparameters per seed, then mean and
  // stddev over seeds.
  const std::string metric = primary_metric(config);
  std::vector<Money> budgets;
  for (const auto& c : cells) {
    if (std::find(budgets.begin(), budgets.end(), c.budget) == budgets.end()) budgets.push_back(c.budget);
  }
  for (Strategy s : config.strategies) {
    for (Money b : budgets) {
      std::vector<double> best;
      for (std::uint64_t seed : config.seeds) {
        std::optional<double> m;
        for (const auto& row : report.rows) {
          if (row.strategy != s || row.budget != b || row.seed != seed || row.metric != metric) continue;
          m = m ? std::max(*m, row.value) : row.value;
        }
        if (m) best.push_back(*m);
      }
      if (best.empty()) continue;
      const auto ms = mean_stddev(best);
      report.summary.push_back({s, b, metric, best.size(), ms.mean, ms.stddev});
    }
  }
  return report;
}

void write_report_csv(const SweepReport& report, std::ostream& out) {
  out << "strategy,shots,human_ratio,alpha,budget_dollars,seed,metric,value\n";
  for (const auto& r : report.rows) {
    out << to_string(r.strategy) << ',' << r.shots << ',' << fixed6(r.human_ratio) << ',' << fixed6(r.alpha)
        << ',' << format_fixed(r.budget) << ',' << r.seed << ',' << r.metric << ',' << fixed6(r.value) << '\n';
  }
}

void write_summary_csv(const SweepReport& report, std::ostream& out) {
  out << "strategy,budget_dollars,metric,seeds,mean,stddev\n";
  for (const auto& r : report.summary) {
    out << to_string(r.strategy) << ',' << format_fixed(r.budget) << ',' << r.metric << ',' << r.seeds << ','
        << fixed6(r.mean) << ',' << fixed6(r.stddev) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Confidence analysis

DecileReport analyze_deciles(const SupervisionSet& set, const Pool& pool) {
  std::vector<LabeledExample> labeled;
  labeled.reserve(set.size());
  for (const auto& r : set.records()) labeled.push_back(r.example);
  auto scored = score_llm_labels(labeled, pool);
  if (scored.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "labeled set has no LLM labels to analyze");
  }
  DecileReport report;
  report.labels = scored.size();
  std::vector<double> conf;
  std::vector<double> hit;
  for (const auto& s : scored) {
    conf.push_back(s.confidence);
    hit.push_back(s.correct ? 1.0 : 0.0);
  }
  report.spearman = spearman(conf, hit);
  report.deciles = decile_accuracy(std::move(scored));
  return report;
}

void write_decile_report(const DecileReport& report, std::ostream& out) {
  out << "decile,accuracy\n";
  for (std::size_t i = 0; i < kDeciles; ++i) out << (i + 1) << ',' << fixed6(report.deciles[i]) << '\n';
  out << "# labels " << report.labels << '\n';
  out << "# spearman " << fixed6(report.spearman) << '\n';
}

}  // namespace labelcost
