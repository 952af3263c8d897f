// SPDX-License-Identifier: Apache-2.0
#include "labelcost/learner.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "labelcost/data_pool.hpp"
#include "labelcost/errors.hpp"
#include "labelcost/rng.hpp"
#include "labelcost/supervision_set.hpp"

namespace labelcost {
namespace {

using nlohmann::json;

constexpr char kModelMagic[4] = {'L', 'C', 'L', 'M'};
constexpr std::uint32_t kModelVersion = 1;

std::vector<std::string> lowercase_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// Softmax of `scores` in place; returns log-sum-exp.
double softmax_inplace(std::vector<double>& scores) {
  const double top = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double& s : scores) {
    s = std::exp(s - top);
    sum += s;
  }
  for (double& s : scores) s /= sum;
  return top + std::log(sum);
}

std::vector<double> raw_scores(std::span<const double> weights, std::size_t num_classes,
                               std::size_t dimension, const SparseVector& x) {
  std::vector<double> scores(num_classes, 0.0);
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double* row = weights.data() + c * dimension;
    double s = 0.0;
    for (const auto& f : x) s += row[f.index] * f.value;
    scores[c] = s;
  }
  return scores;
}

double dev_accuracy(const LinearModel& model, std::span<const TrainingExample> dev) {
  std::size_t hits = 0;
  for (const auto& ex : dev) hits += model.predict_index(ex.features) == ex.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(dev.size());
}

template <typename T>
void write_raw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorKind::kParse, "truncated model checkpoint");
  return value;
}

}  // namespace

void HashedFeatureSpec::validate() const {
  if (dimension < 2 || !std::has_single_bit(dimension)) {
    throw Error(ErrorKind::kInvalidArgument, "feature dimension must be a power of two >= 2");
  }
  if (dimension > (std::size_t{1} << 31)) {
    throw Error(ErrorKind::kInvalidArgument, "feature dimension too large");
  }
  if (ngram_orders.empty() ||
      std::any_of(ngram_orders.begin(), ngram_orders.end(), [](std::size_t n) { return n == 0; })) {
    throw Error(ErrorKind::kInvalidArgument, "n-gram orders must be non-empty and positive");
  }
}

SparseVector featurize(std::string_view text, const HashedFeatureSpec& spec) {
  const auto tokens = lowercase_tokens(text);
  std::map<std::uint32_t, double> counts;
  for (std::size_t order : spec.ngram_orders) {
    const std::uint64_t basis = splitmix64(spec.hash_seed ^ (0x51ed27a1ULL * order));
    for (std::size_t start = 0; start + order <= tokens.size(); ++start) {
      std::string gram = tokens[start];
      for (std::size_t k = 1; k < order; ++k) {
        gram.push_back('\x1f');
        gram += tokens[start + k];
      }
      const auto index = static_cast<std::uint32_t>(fnv1a64(gram, basis) & (spec.dimension - 1));
      counts[index] += 1.0;
    }
  }
  SparseVector out;
  out.reserve(counts.size());
  for (const auto& [index, value] : counts) out.push_back({index, value});
  return out;
}

LinearModel::LinearModel(std::vector<std::string> classes, HashedFeatureSpec spec)
    : classes_(std::move(classes)), spec_(std::move(spec)) {
  spec_.validate();
  if (classes_.empty()) throw Error(ErrorKind::kInvalidArgument, "a model needs at least one class");
  if (!std::is_sorted(classes_.begin(), classes_.end()) ||
      std::adjacent_find(classes_.begin(), classes_.end()) != classes_.end()) {
    throw Error(ErrorKind::kInvalidArgument, "class order must be sorted and unique");
  }
  weights_.assign(classes_.size() * spec_.dimension, 0.0);
}

std::vector<double> LinearModel::scores(const SparseVector& x) const {
  return raw_scores(weights_, classes_.size(), spec_.dimension, x);
}

std::vector<double> LinearModel::probabilities(const SparseVector& x) const {
  auto s = scores(x);
  softmax_inplace(s);
  return s;
}

std::size_t LinearModel::predict_index(const SparseVector& x) const {
  const auto s = scores(x);
  std::size_t best = 0;
  for (std::size_t c = 1; c < s.size(); ++c) {
    if (s[c] > s[best]) best = c;
  }
  return best;
}

const std::string& LinearModel::predict(std::string_view text) const {
  return classes_[predict_index(featurize(text, spec_))];
}

double weighted_cross_entropy(std::span<const double> weights, std::size_t num_classes,
                              std::size_t dimension, std::span<const TrainingExample> examples,
                              std::vector<double>* gradient) {
  if (weights.size() != num_classes * dimension) {
    throw Error(ErrorKind::kInvalidArgument, "weight matrix has the wrong shape");
  }
  if (gradient != nullptr) gradient->assign(weights.size(), 0.0);
  double loss = 0.0;
  for (const auto& ex : examples) {
    auto p = raw_scores(weights, num_classes, dimension, ex.features);
    const double lse = softmax_inplace(p);
    const double target_score = [&] {
      double s = 0.0;
      const double* row = weights.data() + ex.label * dimension;
      for (const auto& f : ex.features) s += row[f.index] * f.value;
      return s;
    }();
    loss += ex.weight * (lse - target_score);
    if (gradient != nullptr && ex.weight != 0.0) {
      for (std::size_t c = 0; c < num_classes; ++c) {
        const double coeff = ex.weight * (p[c] - (c == ex.label ? 1.0 : 0.0));
        double* row = gradient->data() + c * dimension;
        for (const auto& f : ex.features) row[f.index] += coeff * f.value;
      }
    }
  }
  return loss;
}

LinearModel train_examples(std::span<const TrainingExample> examples,
                           std::vector<std::string> classes, const HashedFeatureSpec& spec,
                           const Hyperparams& hp, std::uint64_t seed,
                           std::span<const TrainingExample> dev, double alpha) {
  if (examples.empty()) throw Error(ErrorKind::kTraining, "cannot train on an empty set");
  if (hp.batch_size == 0 || hp.epochs == 0 || !(hp.learning_rate > 0.0)) {
    throw Error(ErrorKind::kInvalidArgument, "learning rate, epochs and batch size must be positive");
  }
  LinearModel model(std::move(classes), spec);
  const std::size_t num_classes = model.classes().size();
  const std::size_t dim = spec.dimension;
  for (const auto& ex : examples) {
    if (ex.label >= num_classes) throw Error(ErrorKind::kTraining, "example label out of range");
  }

  auto weights = model.mutable_weights();
  std::vector<double> grad(weights.size(), 0.0);
  std::vector<std::uint32_t> touched;
  std::vector<char> is_touched(dim, 0);
  const double step_scale = hp.learning_rate / static_cast<double>(hp.batch_size);

  std::vector<double> best_weights;
  double best_dev = -1.0;
  std::size_t best_epoch = 0;
  std::size_t step = 0;
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= hp.epochs; ++epoch) {
    Rng rng(derive_seed(seed, "epoch-" + std::to_string(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.below(i))]);
    }
    for (std::size_t begin = 0; begin < order.size(); begin += hp.batch_size) {
      ++step;
      const std::size_t end = std::min(order.size(), begin + hp.batch_size);
      double batch_loss = 0.0;
      for (std::size_t k = begin; k < end; ++k) {
        const auto& ex = examples[order[k]];
        auto p = raw_scores(weights, num_classes, dim, ex.features);
        const double lse = softmax_inplace(p);
        double target = 0.0;
        for (const auto& f : ex.features) target += weights[ex.label * dim + f.index] * f.value;
        batch_loss += ex.weight * (lse - target);
        if (ex.weight == 0.0) continue;
        for (const auto& f : ex.features) {
          if (!is_touched[f.index]) {
            is_touched[f.index] = 1;
            touched.push_back(f.index);
          }
        }
        for (std::size_t c = 0; c < num_classes; ++c) {
          const double coeff = ex.weight * (p[c] - (c == ex.label ? 1.0 : 0.0));
          double* row = grad.data() + c * dim;
          for (const auto& f : ex.features) row[f.index] += coeff * f.value;
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw Error(ErrorKind::kDivergence, "loss became non-finite at step " + std::to_string(step) +
                                                " (epoch " + std::to_string(epoch) + ")");
      }
      for (std::uint32_t j : touched) {
        for (std::size_t c = 0; c < num_classes; ++c) {
          double& g = grad[c * dim + j];
          weights[c * dim + j] -= step_scale * g;
          g = 0.0;
        }
        is_touched[j] = 0;
      }
      touched.clear();
    }
    if (!dev.empty()) {
      const double acc = dev_accuracy(model, dev);
      if (acc > best_dev) {
        best_dev = acc;
        best_epoch = epoch;
        best_weights.assign(weights.begin(), weights.end());
      }
    }
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw Error(ErrorKind::kDivergence, "weights became non-finite");
  }
  if (!dev.empty() && best_epoch != hp.epochs) {
    std::copy(best_weights.begin(), best_weights.end(), weights.begin());
  }
  model.set_meta({hp, alpha, seed, hp.epochs, dev.empty() ? hp.epochs : best_epoch});
  return model;
}

std::vector<TrainingExample> gold_examples(const Pool& pool, const std::vector<std::string>& classes,
                                           const HashedFeatureSpec& spec) {
  std::vector<TrainingExample> out;
  for (const auto& ex : pool.examples()) {
    if (!ex.gold_label) continue;
    auto it = std::lower_bound(classes.begin(), classes.end(), *ex.gold_label);
    if (it == classes.end() || *it != *ex.gold_label) {
      throw Error(ErrorKind::kInvalidArgument, "gold label '" + *ex.gold_label + "' is not a model class");
    }
    out.push_back({featurize(ex.text, spec), static_cast<std::size_t>(it - classes.begin()), 1.0});
  }
  return out;
}

LinearModel train(const SupervisionSet& set, const Pool& texts, const HashedFeatureSpec& spec,
                  const Hyperparams& hyperparams, std::uint64_t seed, const Pool* dev) {
  if (set.empty()) throw Error(ErrorKind::kTraining, "cannot train on an empty supervision set");
  if (!texts.has_vocabulary()) {
    throw Error(ErrorKind::kTraining, "training needs a classification pool with a vocabulary");
  }
  const auto& classes = texts.vocabulary();
  std::vector<TrainingExample> examples;
  examples.reserve(set.size());
  for (const auto& r : set.records()) {
    auto it = std::lower_bound(classes.begin(), classes.end(), r.example.label);
    if (it == classes.end() || *it != r.example.label) {
      throw Error(ErrorKind::kTraining, "label '" + r.example.label + "' of '" + r.example.id +
                                            "' is not in the vocabulary");
    }
    const std::string& text = r.inline_text ? *r.inline_text : texts.get(r.example.id).text;
    examples.push_back({featurize(text, spec), static_cast<std::size_t>(it - classes.begin()), r.weight});
  }
  std::vector<TrainingExample> dev_examples;
  if (dev != nullptr) dev_examples = gold_examples(*dev, classes, spec);
  return train_examples(examples, classes, spec, hyperparams, seed, dev_examples, set.alpha());
}

double accuracy(const LinearModel& model, const Pool& eval) {
  if (eval.empty()) throw Error(ErrorKind::kInvalidArgument, "accuracy over an empty pool is undefined");
  if (!eval.has_vocabulary() || eval.vocabulary() != model.classes()) {
    throw Error(ErrorKind::kInvalidArgument, "model classes do not match the pool vocabulary");
  }
  std::size_t hits = 0;
  std::size_t total = 0;
  for (const auto& ex : eval.examples()) {
    if (!ex.gold_label) {
      throw Error(ErrorKind::kInvalidArgument, "evaluation example '" + ex.id + "' has no gold label");
    }
    ++total;
    if (model.predict(ex.text) == *ex.gold_label) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

void save_model(const LinearModel& model, std::ostream& out) {
  static_assert(std::endian::native == std::endian::little, "checkpoints are little-endian");
  json header;
  header["classes"] = model.classes();
  header["dimension"] = model.spec().dimension;
  header["ngram_orders"] = model.spec().ngram_orders;
  header["hash_seed"] = model.spec().hash_seed;
  const auto& meta = model.meta();
  header["training"] = {{"learning_rate", meta.hyperparams.learning_rate},
                        {"epochs", meta.hyperparams.epochs},
                        {"batch_size", meta.hyperparams.batch_size},
                        {"alpha", meta.alpha},
                        {"seed", meta.seed},
                        {"epochs_run", meta.epochs_run},
                        {"best_epoch", meta.best_epoch}};
  const std::string text = header.dump();
  out.write(kModelMagic, sizeof(kModelMagic));
  write_raw(out, kModelVersion);
  write_raw(out, static_cast<std::uint64_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  const auto w = model.weights();
  out.write(reinterpret_cast<const char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(double)));
}

LinearModel load_model(std::istream& in) {
  char magic[4];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
    throw Error(ErrorKind::kParse, "not a labelcost model checkpoint");
  }
  if (read_raw<std::uint32_t>(in) != kModelVersion) {
    throw Error(ErrorKind::kParse, "unsupported checkpoint version");
  }
  const auto length = read_raw<std::uint64_t>(in);
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw Error(ErrorKind::kParse, "truncated model checkpoint");
  try {
    const auto header = json::parse(text);
    HashedFeatureSpec spec{header.at("dimension").get<std::size_t>(),
                           header.at("ngram_orders").get<std::vector<std::size_t>>(),
                           header.at("hash_seed").get<std::uint64_t>()};
    LinearModel model(header.at("classes").get<std::vector<std::string>>(), spec);
    const auto& t = header.at("training");
    model.set_meta({{t.at("learning_rate").get<double>(), t.at("epochs").get<std::size_t>(),
                     t.at("batch_size").get<std::size_t>()},
                    t.at("alpha").get<double>(),
                    t.at("seed").get<std::uint64_t>(),
                    t.at("epochs_run").get<std::size_t>(),
                    t.at("best_epoch").get<std::size_t>()});
    auto w = model.mutable_weights();
    in.read(reinterpret_cast<char*>(w.data()), static_cast<std::streamsize>(w.size() * sizeof(double)));
    if (!in) throw Error(ErrorKind::kParse, "truncated model weights");
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, std::string("bad checkpoint header: ") + e.what());
  }
}

}  // namespace labelcost
