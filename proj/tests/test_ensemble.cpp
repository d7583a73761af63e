#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "bagging/ensemble.hpp"
#include "bagging/synthetic.hpp"
#include "oracles.hpp"

using namespace bagging;

namespace {

ProbVector pv(std::vector<double> v) { return ProbVector{std::move(v)}; }

ProbVector random_probs(std::mt19937_64& gen, std::size_t classes) {
  std::gamma_distribution<double> g(1.0, 1.0);
  std::vector<double> v(classes);
  double s = 0;
  for (auto& x : v) s += x = g(gen);
  for (auto& x : v) x /= s;
  return pv(v);
}

Model random_model(std::uint64_t seed, int hidden, int classes) {
  Hyperparams h;
  h.seed = seed;
  h.hidden_size = hidden;
  Model m = initialize(FeatureSpec{128, 2, true}, h, classes);
  for (auto& p : m.params)
    for (auto& v : p.values) v *= 50;  // spread the outputs
  return m;
}

}  // namespace

TEST_CASE("soft_vote on hand-built member sets", "[ensemble][vote]") {
  const std::vector<ProbVector> one{pv({0.7, 0.3})};
  auto r = soft_vote(one);
  CHECK(r.winner == 0);
  CHECK(r.combined.probs == std::vector<double>{0.7, 0.3});

  const std::vector<ProbVector> three{pv({0.6, 0.4}), pv({0.3, 0.7}), pv({0.55, 0.45})};
  r = soft_vote(three);
  CHECK(r.winner == 1);
  const auto oracle_vote = oracle::brute_force_vote({{0.6, 0.4}, {0.3, 0.7}, {0.55, 0.45}});
  CHECK(oracle_vote.winner == 1);
  CHECK(r.combined[0] * 3 == Catch::Approx(1.45).margin(1e-12));
  CHECK(r.combined[1] * 3 == Catch::Approx(1.55).margin(1e-12));

  const std::vector<ProbVector> tie{pv({0.5, 0.5}), pv({0.5, 0.5})};
  CHECK(soft_vote(tie).winner == 0);
}

TEST_CASE("soft_vote rejects empty and ragged input", "[ensemble][vote]") {
  CHECK_THROWS_AS(soft_vote(std::vector<ProbVector>{}), ValidationError);
  const std::vector<ProbVector> ragged{pv({0.5, 0.5}), pv({0.2, 0.3, 0.5})};
  CHECK_THROWS_AS(soft_vote(ragged), ValidationError);
}

TEST_CASE("soft_vote is bit-identical under member permutation", "[ensemble][vote][property]") {
  std::mt19937_64 gen(17);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 1 + gen() % 9, c = 2 + gen() % 4;
    std::vector<ProbVector> members;
    for (std::size_t i = 0; i < n; ++i) members.push_back(random_probs(gen, c));
    const auto base = soft_vote(members);
    std::shuffle(members.begin(), members.end(), gen);
    const auto shuffled = soft_vote(members);
    REQUIRE(shuffled.winner == base.winner);
    REQUIRE(shuffled.combined == base.combined);

    double s = 0;
    for (double v : base.combined.probs) {
      REQUIRE(v >= 0.0);
      s += v;
    }
    REQUIRE(std::fabs(s - 1.0) <= 1e-6);

    auto doubled = members;
    doubled.insert(doubled.end(), members.begin(), members.end());
    REQUIRE(soft_vote(doubled).winner == base.winner);
  }
}

TEST_CASE("Ensemble construction invariants", "[ensemble]") {
  CHECK_THROWS_AS(Ensemble({}), ValidationError);
  CHECK_THROWS_AS(Ensemble({random_model(1, 0, 2), random_model(2, 0, 3)}), ValidationError);
}

TEST_CASE("ensemble of one and of copies equals the single model", "[ensemble]") {
  SyntheticSpec s;
  s.size = 100;
  s.num_classes = 3;
  const Dataset d = make_synthetic(s);
  const Model m = random_model(5, 4, 3);
  const Ensemble solo({m});
  const Ensemble copies({m, m, m, m});
  for (const auto& ex : d.examples()) {
    const int single = predict_class(m, ex);
    CHECK(solo.predict(ex).winner == single);
    CHECK(copies.predict(ex).winner == single);
  }
  std::vector<int> expected;
  for (const auto& ex : d.examples()) expected.push_back(predict_class(m, ex));
  CHECK(copies.predict_all(d) == expected);
}

TEST_CASE("ensemble predict matches a raw-sum re-implementation", "[ensemble][oracle]") {
  SyntheticSpec s;
  s.size = 1000;
  s.num_classes = 3;
  s.pairs = true;
  s.seed = 99;
  const Dataset d = make_synthetic(s);
  std::mt19937_64 gen(3);
  for (int e = 0; e < 4; ++e) {
    std::vector<Model> members;
    for (int k = 0; k < 5; ++k) members.push_back(random_model(gen(), static_cast<int>(gen() % 2) * 6, 3));
    const Ensemble ens(members);
    const auto batch = ens.predict_all(d);
    for (std::size_t i = 0; i < d.size(); ++i) {
      std::vector<std::vector<double>> probs;
      for (const auto& m : members) probs.push_back(predict_proba(m, d[i]).probs);
      const auto o = oracle::brute_force_vote(probs);
      const auto r = ens.predict(d[i]);
      REQUIRE(r.winner == o.winner);
      REQUIRE(batch[i] == o.winner);
      for (std::size_t c = 0; c < 3; ++c) REQUIRE(std::fabs(r.combined[c] - o.sums[c] / 5) <= 1e-12);
    }
  }
}
