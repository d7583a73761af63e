#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "bagging/error.hpp"
#include "bagging/predictor.hpp"

namespace bagging {

struct PruneSpec {
  double fraction = 0.0;

  void validate() const {
    if (!(fraction >= 0.0 && fraction <= 1.0))
      throw ValidationError("prune fraction must lie in [0, 1], got " + std::to_string(fraction));
  }
};

// floor(fraction * W)
inline std::size_t prune_count(std::size_t total, double fraction) {
  return std::min(total, static_cast<std::size_t>(std::floor(fraction * static_cast<double>(total))));
}

/// One-shot global magnitude pruning. Ranks every parameter of every array
/// (biases included) by |value| and zeroes the k = floor(fraction * W)
/// smallest. Ties go to ascending (array name, index), which makes the
/// ranking a strict total order: the zero set grows monotonically with the
/// fraction.
inline Model prune_magnitude(const Model& model, const PruneSpec& spec) {
  spec.validate();
  Model out = model;
  const std::size_t total = param_count(model);
  const std::size_t k = prune_count(total, spec.fraction);
  if (k == 0) return out;

  // Array rank by name, for the tie-break.
  std::vector<std::size_t> by_name(model.params.size());
  std::iota(by_name.begin(), by_name.end(), 0);
  std::sort(by_name.begin(), by_name.end(), [&](std::size_t a, std::size_t b) {
    return model.params[a].name < model.params[b].name;
  });
  std::vector<std::uint32_t> name_rank(model.params.size());
  for (std::size_t r = 0; r < by_name.size(); ++r) name_rank[by_name[r]] = static_cast<std::uint32_t>(r);

  struct Slot {
    double magnitude;
    std::uint32_t rank;
    std::uint32_t array;
    std::size_t index;
  };
  std::vector<Slot> slots;
  slots.reserve(total);
  for (std::size_t a = 0; a < model.params.size(); ++a) {
    const auto& v = model.params[a].values;
    for (std::size_t i = 0; i < v.size(); ++i)
      slots.push_back({std::fabs(v[i]), name_rank[a], static_cast<std::uint32_t>(a), i});
  }
  auto before = [](const Slot& x, const Slot& y) {
    if (x.magnitude != y.magnitude) return x.magnitude < y.magnitude;
    if (x.rank != y.rank) return x.rank < y.rank;
    return x.index < y.index;
  };
  if (k < slots.size()) std::nth_element(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(k), slots.end(), before);
  for (std::size_t s = 0; s < k; ++s) out.params[slots[s].array].values[slots[s].index] = 0.0;
  return out;
}

// Fraction of parameters exactly equal to zero.
inline double sparsity(const Model& model) {
  const std::size_t total = param_count(model);
  if (total == 0) throw ValidationError("sparsity: model has no parameters");
  std::size_t zeros = 0;
  for (const auto& p : model.params)
    zeros += static_cast<std::size_t>(std::count(p.values.begin(), p.values.end(), 0.0));
  return static_cast<double>(zeros) / static_cast<double>(total);
}

}  // namespace bagging
