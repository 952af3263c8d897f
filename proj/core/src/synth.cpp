// SPDX-License-Identifier: Apache-2.0
#include "labelcost/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "labelcost/errors.hpp"
#include "labelcost/rng.hpp"

namespace labelcost {

std::vector<UnlabeledExample> generate_word_clusters(const WordClusterSpec& spec) {
  if (spec.labels.size() < 2) {
    throw Error(ErrorKind::kInvalidArgument, "word clusters need at least two labels");
  }
  if (spec.noise_sd < 0.0 || spec.base_rate < 0.0) {
    throw Error(ErrorKind::kInvalidArgument, "rates and noise must be non-negative");
  }
  const std::size_t classes = spec.labels.size();
  const std::size_t vocab = spec.shared_words + classes * spec.words_per_class;
  std::vector<std::string> words(vocab);
  for (std::size_t j = 0; j < spec.shared_words; ++j) words[j] = "w" + std::to_string(j);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < spec.words_per_class; ++k) {
      words[spec.shared_words + c * spec.words_per_class + k] =
          "c" + std::to_string(c) + "w" + std::to_string(k);
    }
  }

  const int width = static_cast<int>(std::to_string(spec.num_items == 0 ? 0 : spec.num_items - 1).size());
  Rng rng(derive_seed(spec.seed, "word-clusters"));
  std::vector<UnlabeledExample> out;
  out.reserve(spec.num_items);
  std::vector<const std::string*> bag;
  for (std::size_t i = 0; i < spec.num_items; ++i) {
    const auto label = static_cast<std::size_t>(rng.below(classes));
    bag.clear();
    for (std::size_t j = 0; j < vocab; ++j) {
      double mean = spec.base_rate;
      if (j >= spec.shared_words && (j - spec.shared_words) / spec.words_per_class == label) {
        mean += spec.separation;
      }
      const long count = std::lround(mean + spec.noise_sd * rng.normal());
      for (long k = 0; k < count; ++k) bag.push_back(&words[j]);
    }
    for (std::size_t k = bag.size(); k > 1; --k) {
      std::swap(bag[k - 1], bag[static_cast<std::size_t>(rng.below(k))]);
    }
    std::string text;
    for (const auto* w : bag) {
      if (!text.empty()) text.push_back(' ');
      text += *w;
    }
    char id[64];
    std::snprintf(id, sizeof(id), "%s-%0*zu", spec.id_prefix.c_str(), width, i);
    out.push_back({id, text, bag.size(), spec.labels[label]});
  }
  return out;
}

Pool make_word_cluster_pool(const WordClusterSpec& spec, std::optional<double> avg_tokens,
                            std::size_t cap) {
  return Pool(generate_word_clusters(spec), TaskKind::kClassification, spec.labels, avg_tokens, cap);
}

}  // namespace labelcost
