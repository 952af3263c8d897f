// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace labelcost {

class Pool;
class SupervisionSet;

struct HashedFeatureSpec {
  std::size_t dimension = std::size_t{1} << 18;
  std::vector<std::size_t> ngram_orders{1, 2};
  std::uint64_t hash_seed = 0;

  void validate() const;
  bool operator==(const HashedFeatureSpec&) const = default;
};

struct SparseFeature {
  std::uint32_t index;
  double value;

  bool operator==(const SparseFeature&) const = default;
};

/// Sorted by index, one entry per index.
using SparseVector = std::vector<SparseFeature>;

/// Counts of hashed word n-grams over lowercased whitespace tokens.
SparseVector featurize(std::string_view text, const HashedFeatureSpec& spec);

struct Hyperparams {
  double learning_rate = 0.5;
  std::size_t epochs = 10;
  std::size_t batch_size = 32;

  bool operator==(const Hyperparams&) const = default;
};

struct TrainingMeta {
  Hyperparams hyperparams;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  std::size_t epochs_run = 0;
  /// Epoch whose weights were kept (the last one without a dev split).
  std::size_t best_epoch = 0;

  bool operator==(const TrainingMeta&) const = default;
};

/// Multinomial linear classifier over hashed features. Weights are a dense
/// row-major [classes x dimension] matrix; classes are kept in sorted order
/// so score ties resolve to the lexicographically first label.
class LinearModel {
 public:
  LinearModel(std::vector<std::string> classes, HashedFeatureSpec spec);

  const std::vector<std::string>& classes() const { return classes_; }
  const HashedFeatureSpec& spec() const { return spec_; }
  std::span<const double> weights() const { return weights_; }
  std::span<double> mutable_weights() { return weights_; }
  const TrainingMeta& meta() const { return meta_; }
  void set_meta(TrainingMeta meta) { meta_ = meta; }

  std::vector<double> scores(const SparseVector& x) const;
  std::vector<double> probabilities(const SparseVector& x) const;
  std::size_t predict_index(const SparseVector& x) const;
  const std::string& predict(std::string_view text) const;

  bool operator==(const LinearModel&) const = default;

 private:
  std::vector<std::string> classes_;
  HashedFeatureSpec spec_;
  std::vector<double> weights_;
  TrainingMeta meta_;
};

struct TrainingExample {
  SparseVector features;
  std::size_t label = 0;
  double weight = 1.0;
};

/// Sum over examples of weight * -log softmax(W x)[label]. When `gradient`
/// is non-null it receives dL/dW with the same layout as the weights.
double weighted_cross_entropy(std::span<const double> weights, std::size_t num_classes,
                              std::size_t dimension, std::span<const TrainingExample> examples,
                              std::vector<double>* gradient);

/// Mini-batch gradient descent on the weighted cross-entropy, starting from
/// zero weights. Each step moves by learning_rate / batch_size times the
/// summed weighted gradient of the batch; batch order is reshuffled every
/// epoch from `seed`. With a non-empty `dev` set the best-accuracy epoch is
/// returned instead of the last one.
LinearModel train_examples(std::span<const TrainingExample> examples,
                           std::vector<std::string> classes, const HashedFeatureSpec& spec,
                           const Hyperparams& hyperparams, std::uint64_t seed,
                           std::span<const TrainingExample> dev = {}, double alpha = 1.0);

/// Trains on a supervision set whose texts live in `texts` (or inline).
LinearModel train(const SupervisionSet& set, const Pool& texts, const HashedFeatureSpec& spec,
                  const Hyperparams& hyperparams, std::uint64_t seed, const Pool* dev = nullptr);

/// Featurizes every gold-labeled example of `pool` against `classes`.
std::vector<TrainingExample> gold_examples(const Pool& pool, const std::vector<std::string>& classes,
                                           const HashedFeatureSpec& spec);

/// Exact-match accuracy against gold labels. Throws on an empty pool or a
/// class/vocabulary mismatch.
double accuracy(const LinearModel& model, const Pool& eval);

void save_model(const LinearModel& model, std::ostream& out);
LinearModel load_model(std::istream& in);

}  // namespace labelcost
