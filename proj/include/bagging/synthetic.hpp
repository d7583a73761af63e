#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bagging/dataset.hpp"
#include "bagging/rng.hpp"

namespace bagging {

// Generator for desk-scale text classification tasks with controllable
// difficulty. Each class owns a set of cue words; every token is a cue for
// the true class with probability cue_rate and a shared filler word
// otherwise. Labels are then flipped to a different class with probability
// label_noise.
struct SyntheticSpec {
  std::string name = "synthetic";
  std::size_t size = 200;
  int num_classes = 2;
  std::size_t cue_words = 8;
  std::size_t filler_words = 200;
  std::size_t length = 12;
  double cue_rate = 0.3;
  double label_noise = 0.0;
  bool pairs = false;  // also fill text_b
  std::uint64_t seed = 0;
};

inline Dataset make_synthetic(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  auto sentence = [&](int cls) {
    std::string s;
    for (std::size_t t = 0; t < spec.length; ++t) {
      if (!s.empty()) s += ' ';
      if (rng.uniform() < spec.cue_rate)
        s += "c" + std::to_string(cls) + "w" + std::to_string(rng.below(spec.cue_words));
      else
        s += "f" + std::to_string(rng.below(spec.filler_words));
    }
    return s;
  };
  std::vector<Example> examples;
  examples.reserve(spec.size);
  const auto classes = static_cast<std::uint64_t>(spec.num_classes);
  for (std::size_t i = 0; i < spec.size; ++i) {
    const int truth = static_cast<int>(rng.below(classes));
    Example ex;
    ex.id = spec.name + "-" + std::to_string(i);
    ex.text_a = sentence(truth);
    if (spec.pairs) ex.text_b = sentence(truth);
    ex.label = truth;
    if (spec.label_noise > 0.0 && rng.uniform() < spec.label_noise)
      ex.label = static_cast<int>((static_cast<std::uint64_t>(truth) + 1 + rng.below(classes - 1)) % classes);
    examples.push_back(std::move(ex));
  }
  return Dataset(spec.name, std::move(examples), spec.num_classes);
}

}  // namespace bagging
