#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bagging/error.hpp"
#include "bagging/predictor.hpp"

namespace bagging {

struct VoteResult {
  int winner = 0;
  ProbVector combined;
};

namespace detail {

// Pairwise (tree) sum of rows [lo, hi) of an already canonically ordered set.
inline void pairwise_sum(std::span<const ProbVector* const> rows, std::vector<double>& out) {
  if (rows.size() == 1) {
    out = rows[0]->probs;
    return;
  }
  const std::size_t half = rows.size() / 2;
  std::vector<double> right;
  pairwise_sum(rows.first(half), out);
  pairwise_sum(rows.subspan(half), right);
  for (std::size_t c = 0; c < out.size(); ++c) out[c] += right[c];
}

}  // namespace detail

/// Equal-weighted soft majority vote. The winner is the class with the
/// highest summed probability (lowest index on exact ties); combined holds
/// the mean. Members are summed pairwise in lexicographic order of their
/// probability vectors, so any permutation of the inputs gives bit-identical
/// output.
inline VoteResult soft_vote(std::span<const ProbVector> member_probs) {
  if (member_probs.empty()) throw ValidationError("soft_vote: no member predictions");
  const std::size_t classes = member_probs.front().size();
  if (classes == 0) throw ValidationError("soft_vote: empty probability vector");
  std::vector<const ProbVector*> rows;
  rows.reserve(member_probs.size());
  for (const auto& p : member_probs) {
    if (p.size() != classes)
      throw ValidationError("soft_vote: probability vectors of length " + std::to_string(classes) +
                            " and " + std::to_string(p.size()));
    rows.push_back(&p);
  }
  std::sort(rows.begin(), rows.end(),
            [](const ProbVector* a, const ProbVector* b) { return a->probs < b->probs; });
  std::vector<double> sums;
  detail::pairwise_sum(rows, sums);

  VoteResult r;
  r.winner = 0;
  for (std::size_t c = 1; c < classes; ++c)
    if (sums[c] > sums[static_cast<std::size_t>(r.winner)]) r.winner = static_cast<int>(c);
  const double n = static_cast<double>(member_probs.size());
  r.combined.probs = std::move(sums);
  for (auto& v : r.combined.probs) v /= n;
  return r;
}

class Ensemble {
 public:
  explicit Ensemble(std::vector<Model> members) : members_(std::move(members)) {
    if (members_.empty()) throw ValidationError("ensemble needs at least one member");
    for (const auto& m : members_)
      if (m.num_classes != members_.front().num_classes)
        throw ValidationError("ensemble members disagree on num_classes");
  }

  const std::vector<Model>& members() const noexcept { return members_; }
  int num_classes() const noexcept { return members_.front().num_classes; }
  std::size_t size() const noexcept { return members_.size(); }

  VoteResult predict(const Example& example) const {
    std::vector<ProbVector> probs;
    probs.reserve(members_.size());
    for (const auto& m : members_) probs.push_back(predict_proba(m, example));
    return soft_vote(probs);
  }

  std::vector<int> predict_all(const Dataset& data) const {
    // Featurize once per distinct FeatureSpec rather than once per member.
    std::vector<std::pair<FeatureSpec, std::vector<FeatureVector>>> cache;
    cache.reserve(members_.size());
    auto features_for = [&](const FeatureSpec& spec) -> const std::vector<FeatureVector>& {
      for (const auto& [s, f] : cache)
        if (s == spec) return f;
      cache.emplace_back(spec, featurize_all(data, spec));
      return cache.back().second;
    };
    std::vector<const std::vector<FeatureVector>*> per_member;
    for (const auto& m : members_) per_member.push_back(&features_for(m.spec));

    std::vector<int> out;
    out.reserve(data.size());
    std::vector<ProbVector> probs(members_.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      for (std::size_t k = 0; k < members_.size(); ++k)
        probs[k] = predict_proba(members_[k], (*per_member[k])[i]);
      out.push_back(soft_vote(probs).winner);
    }
    return out;
  }

 private:
  std::vector<Model> members_;
};

}  // namespace bagging
