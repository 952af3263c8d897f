// SPDX-License-Identifier: Apache-2.0
#include "labelcost/supervision_set.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <set>

#include <json.hpp>

#include "labelcost/data_pool.hpp"
#include "labelcost/errors.hpp"

namespace labelcost {
namespace {

using nlohmann::json;

constexpr std::string_view kFormatTag = "labelcost-supervision";
constexpr int kFormatVersion = 1;
constexpr std::string_view kPoolRef = "pool:";
constexpr std::string_view kInlineRef = "inline:";

Error schema(std::size_t line, const std::string& what) {
  return Error(ErrorKind::kSchema, "line " + std::to_string(line) + ": " + what);
}

}  // namespace

double SupervisionSet::weight_sum() const {
  double sum = 0.0;
  for (const auto& r : records_) sum += r.weight;
  return sum;
}

std::size_t SupervisionSet::count(LabelSource source) const {
  return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(),
                                                [source](const SupervisionRecord& r) {
                                                  return r.example.source == source;
                                                }));
}

SupervisionSet assemble(std::span<const LabeledExample> labeled, double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw Error(ErrorKind::kInvalidArgument, "alpha must be finite and non-negative");
  }
  SupervisionSet set;
  set.alpha_ = alpha;
  set.records_.reserve(labeled.size());
  for (const auto& ex : labeled) {
    set.records_.push_back({ex, ex.source == LabelSource::kHuman ? alpha : 1.0, std::nullopt});
  }
  std::sort(set.records_.begin(), set.records_.end(),
            [](const SupervisionRecord& a, const SupervisionRecord& b) {
              return a.example.id < b.example.id;
            });
  for (std::size_t i = 1; i < set.records_.size(); ++i) {
    if (set.records_[i].example.id == set.records_[i - 1].example.id) {
      throw Error(ErrorKind::kInvalidArgument,
                  "duplicate id '" + set.records_[i].example.id + "' in supervision set");
    }
  }
  return set;
}

void export_set(const SupervisionSet& set, std::ostream& out, const Pool* inline_from) {
  json header;
  header["format"] = kFormatTag;
  header["version"] = kFormatVersion;
  header["alpha"] = set.alpha();
  header["metadata"] = set.metadata();
  out << "# " << header.dump() << '\n';

  for (const auto& r : set.records()) {
    json line;
    line["id"] = r.example.id;
    line["label"] = r.example.label;
    line["source"] = to_string(r.example.source);
    line["confidence"] = r.example.confidence;
    line["cost"] = format_fixed(r.example.cost);
    line["shots_used"] = r.example.shots_used;
    line["weight"] = r.weight;
    std::optional<std::string> text = r.inline_text;
    if (!text && inline_from != nullptr) text = inline_from->get(r.example.id).text;
    line["text_ref"] = text ? std::string(kInlineRef) + *text : std::string(kPoolRef) + r.example.id;
    out << line.dump() << '\n';
  }
}

SupervisionSet import_set(std::istream& in) {
  SupervisionSet set;
  std::string line;
  if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
    throw schema(1, "missing header line");
  }
  try {
    auto header = json::parse(line.substr(2));
    if (header.at("format") != kFormatTag || header.at("version") != kFormatVersion) {
      throw schema(1, "unsupported format or version");
    }
    set.alpha_ = header.at("alpha").get<double>();
    if (!(set.alpha_ >= 0.0)) throw schema(1, "alpha must be non-negative");
    set.metadata_ = header.value("metadata", std::map<std::string, std::string>{});
  } catch (const json::exception& e) {
    throw schema(1, e.what());
  }

  std::set<std::string> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    SupervisionRecord r;
    try {
      auto doc = json::parse(line);
      static const std::set<std::string> kKeys = {"confidence", "cost",   "id",       "label",
                                                  "shots_used", "source", "text_ref", "weight"};
      for (const auto& [key, _] : doc.items()) {
        if (!kKeys.contains(key)) throw schema(line_no, "unknown key \"" + key + "\"");
      }
      r.example.id = doc.at("id").get<std::string>();
      r.example.label = doc.at("label").get<std::string>();
      r.example.source = parse_label_source(doc.at("source").get<std::string>());
      if (!doc.at("confidence").is_number()) throw schema(line_no, "confidence must be a number");
      r.example.confidence = doc["confidence"].get<double>();
      r.example.cost = Money::parse(doc.at("cost").get<std::string>());
      r.example.shots_used = doc.at("shots_used").get<std::size_t>();
      r.weight = doc.at("weight").get<double>();
      const auto ref = doc.at("text_ref").get<std::string>();
      if (ref.rfind(kInlineRef, 0) == 0) {
        r.inline_text = ref.substr(kInlineRef.size());
      } else if (ref != std::string(kPoolRef) + r.example.id) {
        throw schema(line_no, "text_ref must be \"pool:<id>\" or \"inline:<text>\"");
      }
    } catch (const json::exception& e) {
      throw schema(line_no, e.what());
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kSchema) throw;
      throw schema(line_no, e.what());
    }
    if (r.example.id.empty()) throw schema(line_no, "empty id");
    if (!(r.weight >= 0.0) || !std::isfinite(r.weight)) throw schema(line_no, "weight must be non-negative");
    const double expected = r.example.source == LabelSource::kHuman ? set.alpha_ : 1.0;
    if (r.weight != expected) throw schema(line_no, "weight does not match the record's source");
    if (r.example.cost.micros() < 0) throw schema(line_no, "cost must be non-negative");
    if (!seen.insert(r.example.id).second) throw schema(line_no, "duplicate id '" + r.example.id + "'");
    if (!set.records_.empty() && r.example.id < set.records_.back().example.id) {
      throw schema(line_no, "records must be sorted by id");
    }
    set.records_.push_back(std::move(r));
  }
  return set;
}

}  // namespace labelcost
