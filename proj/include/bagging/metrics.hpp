#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bagging/error.hpp"

namespace bagging {

struct EvalResult {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::size_t num_examples = 0;
  std::vector<double> per_class_f1;
};

namespace detail {
inline void check_pairs(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.empty() || labels.empty()) throw ValidationError("metrics: empty input");
  if (predictions.size() != labels.size())
    throw ValidationError("metrics: " + std::to_string(predictions.size()) + " predictions vs " +
                          std::to_string(labels.size()) + " labels");
}
}  // namespace detail

inline double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  detail::check_pairs(predictions, labels);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

/// Per-class F1 = 2PR / (P + R), computed as 2TP / (2TP + FP + FN). A class
/// that never occurs in labels or predictions scores 0 and still counts in
/// the unweighted macro average.
inline std::pair<double, std::vector<double>> macro_f1(std::span<const int> predictions,
                                                       std::span<const int> labels,
                                                       int num_classes) {
  detail::check_pairs(predictions, labels);
  if (num_classes < 1) throw ValidationError("macro_f1: num_classes must be >= 1");
  const auto c = static_cast<std::size_t>(num_classes);
  std::vector<std::size_t> tp(c, 0), fp(c, 0), fn(c, 0);
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i], y = labels[i];
    if (p < 0 || p >= num_classes || y < 0 || y >= num_classes)
      throw ValidationError("macro_f1: class index out of range at position " + std::to_string(i));
    if (p == y) {
      ++tp[static_cast<std::size_t>(p)];
    } else {
      ++fp[static_cast<std::size_t>(p)];
      ++fn[static_cast<std::size_t>(y)];
    }
  }
  std::vector<double> per_class(c, 0.0);
  double sum = 0.0;
  for (std::size_t k = 0; k < c; ++k) {
    const std::size_t denom = 2 * tp[k] + fp[k] + fn[k];
    per_class[k] = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp[k]) / static_cast<double>(denom);
    sum += per_class[k];
  }
  return {sum / static_cast<double>(c), std::move(per_class)};
}

inline EvalResult evaluate(std::span<const int> predictions, std::span<const int> labels,
                           int num_classes) {
  EvalResult r;
  r.accuracy = accuracy(predictions, labels);
  auto [macro, per_class] = macro_f1(predictions, labels, num_classes);
  r.macro_f1 = macro;
  r.per_class_f1 = std::move(per_class);
  r.num_examples = predictions.size();
  return r;
}

inline double mean(std::span<const double> values) {
  if (values.empty()) throw ValidationError("mean: empty input");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

/// Arithmetic mean and sample standard deviation (divisor n - 1), two-pass.
inline std::pair<double, double> mean_std(std::span<const double> values) {
  if (values.size() < 2)
    throw ValidationError("mean_std: standard deviation needs at least 2 values, got " +
                          std::to_string(values.size()));
  const double mu = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - mu) * (v - mu);
  return {mu, std::sqrt(ss / static_cast<double>(values.size() - 1))};
}

}  // namespace bagging
