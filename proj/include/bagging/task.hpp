#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bagging/dataset.hpp"
#include "bagging/error.hpp"

namespace bagging {

enum class Metric { accuracy, macro_f1 };

inline constexpr std::string_view to_string(Metric m) {
  return m == Metric::accuracy ? "accuracy" : "macro_f1";
}

inline Metric parse_metric(std::string_view s) {
  if (s == "accuracy") return Metric::accuracy;
  if (s == "macro_f1") return Metric::macro_f1;
  throw ValidationError("unknown metric '" + std::string(s) + "'");
}

struct TaskData {
  std::string name;
  Metric metric = Metric::accuracy;  // selection metric; macro_f1 tasks also report F1
  Dataset train;
  Dataset val;
  Dataset test;
};

using TaskMap = std::map<std::string, TaskData>;

/// Loads <dir>/task.json plus train.jsonl, val.jsonl and optionally
/// test.jsonl. task.json:
///   { "labels": ["false", "true"], "metric": "accuracy", "split_seed": 7 }
/// Label i maps to class i. Without test.jsonl the validation file is split
/// in half (stratified, seeded by split_seed): one half becomes the test set.
inline TaskData load_task(const std::filesystem::path& dir) {
  const auto meta_path = dir / "task.json";
  std::ifstream in(meta_path);
  if (!in) throw IoError("cannot open task description: " + meta_path.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(meta_path.string() + ": " + e.what());
  }
  if (!meta.is_object() || !meta.contains("labels") || !meta["labels"].is_array())
    throw ValidationError(meta_path.string() + ": missing 'labels' array");
  for (const auto& [key, _] : meta.items())
    if (key != "labels" && key != "metric" && key != "split_seed")
      throw ValidationError(meta_path.string() + ": unknown field '" + key + "'");

  std::map<std::string, int> label_map;
  for (const auto& l : meta["labels"]) {
    if (!l.is_string()) throw ValidationError(meta_path.string() + ": labels must be strings");
    if (!label_map.emplace(l.get<std::string>(), static_cast<int>(label_map.size())).second)
      throw ValidationError(meta_path.string() + ": duplicate label");
  }
  const int num_classes = static_cast<int>(label_map.size());

  TaskData task;
  task.name = dir.filename().string();
  if (meta.contains("metric")) task.metric = parse_metric(meta["metric"].get<std::string>());
  const std::uint64_t split_seed = meta.value("split_seed", std::uint64_t{0});

  task.train = load_jsonl(dir / "train.jsonl", num_classes, label_map);
  const auto val = load_jsonl(dir / "val.jsonl", num_classes, label_map);
  if (std::filesystem::exists(dir / "test.jsonl")) {
    task.val = val;
    task.test = load_jsonl(dir / "test.jsonl", num_classes, label_map);
  } else {
    auto [test, rest] = split(val, SplitSpec{0.5, split_seed, true});
    task.test = std::move(test);
    task.val = std::move(rest);
  }
  return task;
}

}  // namespace bagging
