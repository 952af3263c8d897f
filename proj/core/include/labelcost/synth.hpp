// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "labelcost/data_pool.hpp"

namespace labelcost {

/// Bag-of-words documents drawn from Gaussian word-frequency clusters.
///
/// Every class shares `shared_words` background words with mean count
/// `base_rate`; each class also owns `words_per_class` words whose mean is
/// raised by `separation` for documents of that class. A document's count
/// for each word is max(0, round(mean + noise_sd * N(0, 1))), and the words
/// are written out in shuffled order.
struct WordClusterSpec {
  std::size_t num_items = 1000;
  std::vector<std::string> labels{"Negative", "Positive"};
  std::size_t shared_words = 60;
  std::size_t words_per_class = 10;
  double base_rate = 1.0;
  double separation = 1.0;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
  std::string id_prefix = "ex";
};

/// Gold labels are set on every example; ids are `<prefix>-<zero-padded index>`.
std::vector<UnlabeledExample> generate_word_clusters(const WordClusterSpec& spec);

/// Convenience wrapper producing a classification pool.
Pool make_word_cluster_pool(const WordClusterSpec& spec, std::optional<double> avg_tokens = std::nullopt,
                            std::size_t cap = 5120);

}  // namespace labelcost
