#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <sstream>

#include "bagging/predictor.hpp"
#include "bagging/prune.hpp"
#include "bagging/synthetic.hpp"
#include "oracles.hpp"

using namespace bagging;

namespace {

double train_accuracy(const Model& m, const Dataset& d) {
  std::size_t hits = 0;
  for (const auto& ex : d.examples()) hits += predict_class(m, ex) == ex.label;
  return static_cast<double>(hits) / d.size();
}

double mean_true_class_prob(const Model& m, const Dataset& d) {
  double s = 0.0;
  for (const auto& ex : d.examples()) s += predict_proba(m, ex)[ex.label];
  return s / d.size();
}

SyntheticSpec separable(std::size_t size, std::uint64_t seed) {
  SyntheticSpec s;
  s.size = size;
  s.cue_rate = 0.3;
  s.label_noise = 0.0;
  s.seed = seed;
  return s;
}

FeatureSpec small_features() {
  FeatureSpec f;
  f.dims = 1024;
  return f;
}

}  // namespace

TEST_CASE("featurize is deterministic and canonical", "[predictor][features]") {
  const FeatureSpec spec;
  const Example ex{"1", "The cat sat on the mat.", std::string("A dog barked"), 0};
  CHECK(featurize(ex, spec) == featurize(ex, spec));

  const Example empty_b{"2", "hello world", std::string(""), 0};
  const Example absent_b{"3", "hello world", std::nullopt, 0};
  CHECK(featurize(empty_b, spec) == featurize(absent_b, spec));

  for (const auto& f : featurize(ex, FeatureSpec{64, 3, true})) CHECK(f.index < 64);
}

TEST_CASE("featurize counts repeated unigrams", "[predictor][features]") {
  const Example ex{"1", "a b a", std::nullopt, 0};
  const auto fv = featurize(ex, FeatureSpec{1u << 15, 1, true});
  REQUIRE(fv.size() == 2);
  std::vector<double> counts{fv[0].count, fv[1].count};
  std::sort(counts.begin(), counts.end());
  CHECK(counts == std::vector<double>{1.0, 2.0});
}

TEST_CASE("featurize bigrams, case folding and field salts", "[predictor][features]") {
  const FeatureSpec bigrams{1u << 15, 2, true};
  const auto fv = featurize(Example{"1", "a b a", std::nullopt, 0}, bigrams);
  double total = 0;
  for (const auto& f : fv) total += f.count;
  CHECK(total == 5.0);  // 3 unigrams + 2 bigrams

  const FeatureSpec lower{1u << 15, 1, true}, cased{1u << 15, 1, false};
  CHECK(featurize(Example{"1", "Word", std::nullopt, 0}, lower) ==
        featurize(Example{"1", "word", std::nullopt, 0}, lower));
  CHECK_FALSE(featurize(Example{"1", "Word", std::nullopt, 0}, cased) ==
              featurize(Example{"1", "word", std::nullopt, 0}, cased));

  const auto in_a = featurize(Example{"1", "alpha", std::nullopt, 0}, lower);
  const auto in_b = featurize(Example{"1", "zzz", std::string("alpha"), 0}, lower);
  bool shared = false;
  for (const auto& f : in_b) shared = shared || f.index == in_a[0].index;
  CHECK_FALSE(shared);
}

TEST_CASE("FeatureSpec and Hyperparams validation", "[predictor]") {
  CHECK_THROWS_AS((FeatureSpec{1000, 1, true}.validate()), ValidationError);
  CHECK_THROWS_AS((FeatureSpec{1, 1, true}.validate()), ValidationError);
  CHECK_THROWS_AS((FeatureSpec{1024, 4, true}.validate()), ValidationError);
  Hyperparams h;
  h.epochs = 0;
  CHECK_THROWS_AS(h.validate(), ValidationError);
  const Dataset d = make_synthetic(separable(20, 1));
  CHECK_THROWS_AS(fit(d, small_features(), h), ValidationError);
  h = Hyperparams{};
  h.learning_rate = 0.0;
  CHECK_THROWS_AS(h.validate(), ValidationError);
  h = Hyperparams{};
  h.l2 = -1;
  CHECK_THROWS_AS(h.validate(), ValidationError);
}

TEST_CASE("param_count matches shape arithmetic", "[predictor]") {
  Hyperparams h;
  const Model lr = initialize(FeatureSpec{1024, 1, true}, h, 2);
  CHECK(param_count(lr) == 2050);
  h.hidden_size = 16;
  const Model mlp = initialize(FeatureSpec{1024, 1, true}, h, 3);
  CHECK(param_count(mlp) == 16451);
  CHECK(param_count(1024, 16, 3) == 16451);
  CHECK(param_count(prune_magnitude(mlp, PruneSpec{0.7})) == 16451);
}

TEST_CASE("predict_proba returns a distribution", "[predictor]") {
  const Dataset d = make_synthetic(separable(50, 3));
  for (int hidden : {0, 5}) {
    Hyperparams h;
    h.hidden_size = hidden;
    h.seed = 17;
    const Model m = initialize(small_features(), h, 3);
    for (const auto& ex : d.examples()) {
      const auto p = predict_proba(m, ex);
      REQUIRE(p.size() == 3);
      double s = 0;
      for (double v : p.probs) {
        CHECK(v >= 0.0);
        s += v;
      }
      CHECK(std::fabs(s - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("all-zero parameters predict uniformly", "[predictor]") {
  for (int hidden : {0, 4}) {
    Hyperparams h;
    h.hidden_size = hidden;
    Model m = initialize(small_features(), h, 4);
    for (auto& p : m.params) std::fill(p.values.begin(), p.values.end(), 0.0);
    const auto p = predict_proba(m, Example{"x", "anything at all", std::string("more"), 0});
    for (double v : p.probs) CHECK(v == Catch::Approx(0.25).margin(1e-15));
  }
}

TEST_CASE("fit separates a separable task and is bit-reproducible", "[predictor][fit]") {
  const Dataset train = make_synthetic(separable(200, 8));
  const Hyperparams h;
  const Model m = fit(train, small_features(), h);
  CHECK(train_accuracy(m, train) >= 0.95);
  CHECK(fit(train, small_features(), h) == m);

  Hyperparams mh = h;
  mh.hidden_size = 8;
  const Model mlp = fit(train, small_features(), mh);
  CHECK(train_accuracy(mlp, train) >= 0.95);
  CHECK(fit(train, small_features(), mh) == mlp);
}

TEST_CASE("training moves probability toward the true class on held-out data", "[predictor][fit]") {
  const Dataset train = make_synthetic(separable(200, 10));
  SyntheticSpec held = separable(200, 11);
  held.name = "held";
  const Dataset test = make_synthetic(held);
  for (int hidden : {0, 8}) {
    Hyperparams h;
    h.hidden_size = hidden;
    h.seed = 3;
    const Model before = initialize(small_features(), h, 2);
    const Model after = fit(train, small_features(), h);
    CHECK(mean_true_class_prob(after, test) > mean_true_class_prob(before, test) + 0.1);
    CHECK(training_loss(after, train) <= training_loss(before, train));
  }
}

TEST_CASE("diverging learning rate raises TrainingError", "[predictor][fit]") {
  const Dataset train = make_synthetic(separable(50, 2));
  Hyperparams h;
  h.learning_rate = 1e308;
  CHECK_THROWS_AS(fit(train, small_features(), h), TrainingError);
}

TEST_CASE("analytic gradients match central differences", "[predictor][gradient]") {
  SyntheticSpec s = separable(12, 4);
  s.num_classes = 2;
  const Dataset d = make_synthetic(s);
  const std::vector<int> ys = d.labels();

  SECTION("logistic regression, 10 parameters") {
    const FeatureSpec f{4, 1, true};
    Hyperparams h;
    h.l2 = 0.05;
    h.seed = 9;
    const Model m = initialize(f, h, 2);
    REQUIRE(param_count(m) == 10);
    const auto xs = featurize_all(d, f);
    std::vector<std::size_t> all(xs.size());
    std::iota(all.begin(), all.end(), 0);
    std::vector<std::vector<double>> g;
    loss_and_gradient(m, xs, ys, all, &g);
    const auto num = oracle::numeric_gradient(m, xs, ys, 1e-5);
    for (std::size_t a = 0; a < g.size(); ++a)
      for (std::size_t k = 0; k < g[a].size(); ++k) {
        const double denom = std::max({std::fabs(g[a][k]), std::fabs(num[a][k]), 1e-7});
        CHECK(std::fabs(g[a][k] - num[a][k]) / denom <= 1e-4);
      }
  }
  SECTION("mlp") {
    const FeatureSpec f{8, 2, true};
    Hyperparams h;
    h.hidden_size = 3;
    h.l2 = 0.01;
    h.seed = 21;
    const Model m = initialize(f, h, 2);
    const auto xs = featurize_all(d, f);
    std::vector<std::size_t> all(xs.size());
    std::iota(all.begin(), all.end(), 0);
    std::vector<std::vector<double>> g;
    loss_and_gradient(m, xs, ys, all, &g);
    const auto num = oracle::numeric_gradient(m, xs, ys, 1e-5);
    for (std::size_t a = 0; a < g.size(); ++a)
      for (std::size_t k = 0; k < g[a].size(); ++k) {
        const double denom = std::max({std::fabs(g[a][k]), std::fabs(num[a][k]), 1e-7});
        CHECK(std::fabs(g[a][k] - num[a][k]) / denom <= 1e-4);
      }
  }
}

TEST_CASE("model serialization reproduces predictions bit-exactly", "[predictor][io]") {
  const Dataset train = make_synthetic(separable(60, 12));
  Hyperparams h;
  h.hidden_size = 4;
  h.learning_rate = 0.3;
  const Model m = fit(train, small_features(), h);
  std::stringstream ss;
  save_model(ss, m);
  const Model back = load_model(ss);
  CHECK(back == m);
  for (const auto& ex : train.examples()) CHECK(predict_proba(back, ex) == predict_proba(m, ex));
}

TEST_CASE("model loader rejects inconsistent files", "[predictor][io]") {
  const Model m = initialize(FeatureSpec{4, 1, true}, Hyperparams{}, 2);
  std::stringstream ss;
  save_model(ss, m);
  std::string text = ss.str();

  std::stringstream wrong_magic("not-a-model 1\n");
  CHECK_THROWS_AS(load_model(wrong_magic), ValidationError);
  std::string shape = text;
  shape.replace(shape.find("array W 8"), 9, "array W 7");
  std::stringstream wrong_shape(shape);
  CHECK_THROWS_AS(load_model(wrong_shape), ValidationError);
  std::stringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(load_model(truncated), ValidationError);
}
