#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "bagging/dataset.hpp"
#include "bagging/error.hpp"
#include "bagging/rng.hpp"

namespace bagging {

struct BootstrapSample {
  std::size_t source_size = 0;
  std::vector<std::size_t> indices;
  std::uint64_t seed = 0;

  bool operator==(const BootstrapSample&) const = default;
};

// Two-level plan for double bootstrapping. second_level[i][j] indexes into
// first_level[i], not into the original dataset.
struct BootstrapPlan {
  std::size_t n = 0;
  std::size_t m = 0;
  std::uint64_t base_seed = 0;
  std::size_t dataset_size = 0;
  std::vector<BootstrapSample> first_level;
  std::vector<std::vector<BootstrapSample>> second_level;

  // Positions in the original dataset for second-level sample (i, j).
  std::vector<std::size_t> composed_indices(std::size_t i, std::size_t j) const {
    const auto& parent = first_level.at(i).indices;
    const auto& child = second_level.at(i).at(j).indices;
    std::vector<std::size_t> out;
    out.reserve(child.size());
    for (auto k : child) out.push_back(parent[k]);
    return out;
  }

  bool operator==(const BootstrapPlan&) const = default;
};

/// N draws uniformly with replacement from [0, N).
inline BootstrapSample bootstrap(std::size_t dataset_size, std::uint64_t seed) {
  if (dataset_size == 0) throw ValidationError("bootstrap: dataset_size must be >= 1");
  BootstrapSample s{dataset_size, {}, seed};
  s.indices.resize(dataset_size);
  Rng rng(seed);
  for (auto& idx : s.indices) idx = static_cast<std::size_t>(rng.below(dataset_size));
  return s;
}

inline std::uint64_t plan_seed(std::uint64_t base_seed, int level, std::size_t i, std::size_t j) {
  return derive_seed(base_seed, level == 0 ? SeedLevel::first_level : SeedLevel::second_level, i, j);
}

inline BootstrapPlan make_plan(std::size_t n, std::size_t m, std::size_t dataset_size,
                               std::uint64_t base_seed) {
  if (n == 0 || m == 0 || dataset_size == 0)
    throw ValidationError("make_plan: n, m and dataset_size must all be >= 1");
  BootstrapPlan plan{n, m, base_seed, dataset_size, {}, {}};
  std::unordered_set<std::uint64_t> seeds;
  auto take = [&](std::uint64_t seed) {
    if (!seeds.insert(seed).second)
      throw Error("make_plan: derived seed collision for base_seed " + std::to_string(base_seed));
    return seed;
  };
  plan.first_level.reserve(n);
  plan.second_level.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    plan.first_level.push_back(bootstrap(dataset_size, take(plan_seed(base_seed, 0, i, 0))));
    for (std::size_t j = 0; j < m; ++j)
      plan.second_level[i].push_back(bootstrap(dataset_size, take(plan_seed(base_seed, 1, i, j))));
  }
  return plan;
}

inline Dataset materialize(const Dataset& dataset, const BootstrapSample& sample) {
  if (sample.source_size != dataset.size())
    throw ValidationError("materialize: sample drawn for " + std::to_string(sample.source_size) +
                          " examples applied to dataset of " + std::to_string(dataset.size()));
  std::vector<Example> out;
  out.reserve(sample.indices.size());
  for (auto idx : sample.indices) {
    if (idx >= dataset.size()) throw ValidationError("materialize: index out of range");
    out.push_back(dataset[idx]);
  }
  return Dataset::with_repeats(dataset.name() + "*", std::move(out), dataset.num_classes());
}

// Text manifest. Samples are regenerated from their seeds on load, so the
// file stays small and the indices cannot drift from the seeds.
//
//   bootstrap-plan 1
//   n <n>
//   m <m>
//   base_seed <seed>
//   dataset_size <N>
//   sample <level> <i> <j> <seed>      (one line per sample)
inline void write_manifest(std::ostream& os, const BootstrapPlan& plan) {
  os << "bootstrap-plan 1\n"
     << "n " << plan.n << "\n"
     << "m " << plan.m << "\n"
     << "base_seed " << plan.base_seed << "\n"
     << "dataset_size " << plan.dataset_size << "\n";
  for (std::size_t i = 0; i < plan.n; ++i) {
    os << "sample 0 " << i << " 0 " << plan.first_level[i].seed << "\n";
    for (std::size_t j = 0; j < plan.m; ++j)
      os << "sample 1 " << i << " " << j << " " << plan.second_level[i][j].seed << "\n";
  }
}

inline BootstrapPlan read_manifest(std::istream& is) {
  auto fail = [](const std::string& what) -> BootstrapPlan {
    throw ValidationError("bootstrap manifest: " + what);
  };
  std::string tag;
  int version = 0;
  if (!(is >> tag >> version) || tag != "bootstrap-plan" || version != 1) return fail("bad header");
  BootstrapPlan plan;
  auto read_field = [&](const char* name, auto& value) {
    std::string key;
    if (!(is >> key >> value) || key != name) fail(std::string("expected '") + name + "'");
  };
  read_field("n", plan.n);
  read_field("m", plan.m);
  read_field("base_seed", plan.base_seed);
  read_field("dataset_size", plan.dataset_size);
  if (plan.n == 0 || plan.m == 0 || plan.dataset_size == 0) return fail("zero n, m or dataset_size");
  plan.first_level.resize(plan.n);
  plan.second_level.assign(plan.n, std::vector<BootstrapSample>(plan.m));
  std::vector<char> seen(plan.n * (plan.m + 1), 0);
  std::string key;
  while (is >> key) {
    if (key != "sample") return fail("unexpected token '" + key + "'");
    int level = 0;
    std::size_t i = 0, j = 0;
    std::uint64_t seed = 0;
    if (!(is >> level >> i >> j >> seed)) return fail("truncated sample line");
    if (i >= plan.n || (level == 0 && j != 0) || (level == 1 && j >= plan.m) ||
        (level != 0 && level != 1))
      return fail("sample address out of range");
    const std::size_t slot = i * (plan.m + 1) + (level == 0 ? 0 : j + 1);
    if (seen[slot]++) return fail("duplicate sample line");
    auto& target = level == 0 ? plan.first_level[i] : plan.second_level[i][j];
    target = bootstrap(plan.dataset_size, seed);
  }
  for (char s : seen)
    if (!s) return fail("missing sample lines");
  return plan;
}

inline void write_manifest(const std::filesystem::path& path, const BootstrapPlan& plan) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write manifest: " + path.string());
  write_manifest(os, plan);
  if (!os) throw IoError("error writing manifest: " + path.string());
}

inline BootstrapPlan read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest: " + path.string());
  return read_manifest(is);
}

}  // namespace bagging
