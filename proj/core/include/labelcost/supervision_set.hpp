// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labelcost/labelers.hpp"

namespace labelcost {

class Pool;

struct SupervisionRecord {
  LabeledExample example;
  /// 1 for LLM labels, alpha for human labels.
  double weight = 1.0;
  /// Inline copy of the text; when absent the text is found in the pool
  /// by id.
  std::optional<std::string> inline_text;

  bool operator==(const SupervisionRecord&) const = default;
};

/// Weighted union of LLM- and human-labeled examples. Records are sorted by
/// id and ids are unique.
class SupervisionSet {
 public:
  SupervisionSet() = default;

  const std::vector<SupervisionRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  double alpha() const { return alpha_; }
  /// Free-form run metadata (strategy, budget, seed, ...), exported in the
  /// header line.
  const std::map<std::string, std::string>& metadata() const { return metadata_; }
  void set_metadata(std::string key, std::string value) { metadata_[std::move(key)] = std::move(value); }

  double weight_sum() const;
  std::size_t count(LabelSource source) const;

  bool operator==(const SupervisionSet&) const = default;

 private:
  friend SupervisionSet assemble(std::span<const LabeledExample>, double);
  friend SupervisionSet import_set(std::istream&);

  std::vector<SupervisionRecord> records_;
  double alpha_ = 1.0;
  std::map<std::string, std::string> metadata_;
};

/// Weights records by source. Throws Error(kInvalidArgument) on duplicate
/// ids or a negative alpha.
SupervisionSet assemble(std::span<const LabeledExample> labeled, double alpha);

/// Line-delimited export. The first line is a "# " header carrying the
/// format tag, alpha and metadata; each further line is one record with
/// keys confidence, cost, id, label, shots_used, source, text_ref, weight.
/// `inline_from`, when given, inlines each record's text from the pool.
void export_set(const SupervisionSet& set, std::ostream& out, const Pool* inline_from = nullptr);

/// Inverse of export_set. Schema violations raise Error(kSchema) with the
/// line number.
SupervisionSet import_set(std::istream& in);

}  // namespace labelcost
