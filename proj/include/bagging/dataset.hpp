#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bagging/error.hpp"
#include "bagging/rng.hpp"

namespace bagging {

struct Example {
  std::string id;
  std::string text_a;
  std::optional<std::string> text_b;
  int label = 0;

  bool operator==(const Example&) const = default;
};

/// Ordered, labeled examples. Immutable by convention once built; copies are
/// cheap enough at desk scale that operations return new Datasets.
class Dataset {
 public:
  Dataset() = default;

  // Validates labels against num_classes and id uniqueness.
  Dataset(std::string name, std::vector<Example> examples, int num_classes)
      : name_(std::move(name)), examples_(std::move(examples)), num_classes_(num_classes) {
    if (num_classes_ < 2)
      throw ValidationError("dataset '" + name_ + "': num_classes must be >= 2");
    std::unordered_set<std::string> seen;
    for (const auto& ex : examples_) {
      if (ex.label < 0 || ex.label >= num_classes_)
        throw ValidationError("dataset '" + name_ + "': example '" + ex.id + "' has label " +
                              std::to_string(ex.label) + " outside [0, " +
                              std::to_string(num_classes_) + ")");
      if (ex.text_a.empty())
        throw ValidationError("dataset '" + name_ + "': example '" + ex.id + "' has empty text_a");
      if (!seen.insert(ex.id).second)
        throw ValidationError("dataset '" + name_ + "': duplicate id '" + ex.id + "'");
    }
  }

  // Skips the uniqueness check; used for bootstrap materialization where
  // repeated examples are the point.
  static Dataset with_repeats(std::string name, std::vector<Example> examples, int num_classes) {
    Dataset d;
    d.name_ = std::move(name);
    d.examples_ = std::move(examples);
    d.num_classes_ = num_classes;
    return d;
  }

  const std::string& name() const noexcept { return name_; }
  const std::vector<Example>& examples() const noexcept { return examples_; }
  int num_classes() const noexcept { return num_classes_; }
  std::size_t size() const noexcept { return examples_.size(); }
  bool empty() const noexcept { return examples_.empty(); }
  const Example& operator[](std::size_t i) const { return examples_[i]; }

  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(examples_.size());
    for (const auto& ex : examples_) out.push_back(ex.label);
    return out;
  }

  bool operator==(const Dataset&) const = default;

 private:
  std::string name_;
  std::vector<Example> examples_;
  int num_classes_ = 2;
};

struct SplitSpec {
  double fraction = 0.5;
  std::uint64_t seed = 0;
  bool stratified = true;

  void validate() const {
    if (!(fraction > 0.0 && fraction < 1.0))
      throw ValidationError("split fraction must lie in (0, 1), got " + std::to_string(fraction));
  }
};

/// Reads one JSON record per line. Blank lines are skipped; unknown keys are
/// ignored. Errors carry the 1-based line number.
inline Dataset load_jsonl(const std::filesystem::path& path, int num_classes,
                          const std::map<std::string, int>& label_map) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path.string());

  std::vector<Example> examples;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  const std::string where = path.string() + ":";
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(where + std::to_string(line_no) + ": malformed record: " + e.what());
    }
    auto need_string = [&](const char* key) -> std::string {
      if (!rec.is_object() || !rec.contains(key) || !rec[key].is_string())
        throw ValidationError(where + std::to_string(line_no) + ": missing or non-string key '" +
                              key + "'");
      return rec[key].get<std::string>();
    };
    Example ex;
    ex.id = need_string("id");
    ex.text_a = need_string("text_a");
    if (ex.text_a.empty())
      throw ValidationError(where + std::to_string(line_no) + ": empty text_a");
    if (rec.contains("text_b") && !rec["text_b"].is_null()) {
      if (!rec["text_b"].is_string())
        throw ValidationError(where + std::to_string(line_no) + ": text_b must be a string");
      ex.text_b = rec["text_b"].get<std::string>();
    }
    const std::string label = need_string("label");
    const auto it = label_map.find(label);
    if (it == label_map.end())
      throw ValidationError(where + std::to_string(line_no) + ": unknown label '" + label + "'");
    ex.label = it->second;
    if (ex.label < 0 || ex.label >= num_classes)
      throw ValidationError(where + std::to_string(line_no) + ": label '" + label +
                            "' maps outside [0, num_classes)");
    if (!ids.insert(ex.id).second)
      throw ValidationError(where + std::to_string(line_no) + ": duplicate id '" + ex.id + "'");
    examples.push_back(std::move(ex));
  }
  if (examples.empty()) throw ValidationError(where + " empty dataset");
  return Dataset(path.stem().string(), std::move(examples), num_classes);
}

// Round half up.
inline std::size_t split_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
}

/// Partition into (first, second) with |first| = round(fraction * N).
/// Both parts keep the input's relative order. Stratified splits give each
/// class floor or ceil of its proportional share, assigning the leftover
/// slots to the classes with the largest fractional remainders.
inline std::pair<Dataset, Dataset> split(const Dataset& dataset, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = dataset.size();
  if (n < 2) throw ValidationError("split needs at least 2 examples, got " + std::to_string(n));
  const std::size_t target = split_count(n, spec.fraction);
  Rng rng(spec.seed);

  std::vector<char> in_first(n, 0);
  if (!spec.stratified) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t i = 0; i < target; ++i) in_first[order[i]] = 1;
  } else {
    const auto classes = static_cast<std::size_t>(dataset.num_classes());
    std::vector<std::vector<std::size_t>> members(classes);
    for (std::size_t i = 0; i < n; ++i) members[dataset[i].label].push_back(i);
    for (std::size_t c = 0; c < classes; ++c)
      if (members[c].empty())
        throw ValidationError("dataset '" + dataset.name() + "' too small to stratify: class " +
                              std::to_string(c) + " has no examples");

    std::vector<std::size_t> quota(classes);
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double share = spec.fraction * static_cast<double>(members[c].size());
      quota[c] = static_cast<std::size_t>(std::floor(share));
      assigned += quota[c];
      remainders.emplace_back(share - std::floor(share), c);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < target && r < remainders.size(); ++r) {
      ++quota[remainders[r].second];
      ++assigned;
    }
    for (std::size_t c = 0; c < classes; ++c) {
      rng.shuffle(members[c]);
      for (std::size_t k = 0; k < quota[c]; ++k) in_first[members[c][k]] = 1;
    }
  }

  std::vector<Example> first, second;
  for (std::size_t i = 0; i < n; ++i) (in_first[i] ? first : second).push_back(dataset[i]);
  return {Dataset::with_repeats(dataset.name() + "/a", std::move(first), dataset.num_classes()),
          Dataset::with_repeats(dataset.name() + "/b", std::move(second), dataset.num_classes())};
}

}  // namespace bagging
