#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bagging/dataset.hpp"
#include "bagging/error.hpp"
#include "bagging/rng.hpp"

namespace bagging {

struct FeatureSpec {
  std::uint32_t dims = 1u << 15;
  int ngram_max = 1;
  bool lowercase = true;

  void validate() const {
    if (dims < 2 || (dims & (dims - 1)) != 0)
      throw ValidationError("FeatureSpec.dims must be a power of two >= 2, got " +
                            std::to_string(dims));
    if (ngram_max < 1 || ngram_max > 3)
      throw ValidationError("FeatureSpec.ngram_max must be in [1, 3], got " +
                            std::to_string(ngram_max));
  }

  bool operator==(const FeatureSpec&) const = default;
};

struct Hyperparams {
  double learning_rate = 0.1;
  int epochs = 10;
  double l2 = 1e-4;
  int hidden_size = 0;  // 0 = logistic regression, > 0 = one-hidden-layer MLP
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw ValidationError("Hyperparams.learning_rate must be positive and finite");
    if (epochs < 1) throw ValidationError("Hyperparams.epochs must be >= 1");
    if (!(l2 >= 0.0) || !std::isfinite(l2))
      throw ValidationError("Hyperparams.l2 must be non-negative and finite");
    if (hidden_size < 0) throw ValidationError("Hyperparams.hidden_size must be >= 0");
    if (batch_size < 1) throw ValidationError("Hyperparams.batch_size must be >= 1");
  }

  bool operator==(const Hyperparams&) const = default;
};

struct ParamArray {
  std::string name;
  std::vector<double> values;

  bool operator==(const ParamArray&) const = default;
};

/// Trained (or freshly initialized) classifier. Parameter arrays are stored in
/// a fixed order: {W, b} for logistic regression, {W1, b1, W2, b2} for the MLP.
/// Weight matrices are row-major with the input dimension as rows.
struct Model {
  FeatureSpec spec;
  Hyperparams hyper;
  int num_classes = 2;
  std::vector<ParamArray> params;

  bool is_mlp() const noexcept { return hyper.hidden_size > 0; }

  const std::vector<double>& array(std::string_view name) const {
    for (const auto& p : params)
      if (p.name == name) return p.values;
    throw Error("model has no parameter array '" + std::string(name) + "'");
  }
  std::vector<double>& array(std::string_view name) {
    return const_cast<std::vector<double>&>(std::as_const(*this).array(name));
  }

  bool operator==(const Model&) const = default;
};

struct ProbVector {
  std::vector<double> probs;

  std::size_t size() const noexcept { return probs.size(); }
  double operator[](std::size_t i) const { return probs[i]; }
  bool operator==(const ProbVector&) const = default;
};

struct Feature {
  std::uint32_t index;
  double count;

  bool operator==(const Feature&) const = default;
};

// Sorted by index, unique indices.
using FeatureVector = std::vector<Feature>;

namespace detail {

constexpr std::uint64_t fnv_offset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t fnv_prime = 0x100000001b3ULL;

inline std::uint64_t fnv1a(std::uint64_t h, std::string_view s) {
  for (unsigned char c : s) {
    h ^= c;
    h *= fnv_prime;
  }
  return h;
}

inline std::vector<std::string> tokenize(std::string_view text, bool lowercase) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    const bool separator = c < 0x80 && (std::isspace(c) || std::ispunct(c) || std::iscntrl(c));
    if (separator) {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(lowercase && c < 0x80 ? static_cast<char>(std::tolower(c))
                                          : static_cast<char>(c));
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

inline void add_field(std::map<std::uint32_t, double>& acc, std::string_view text, char salt,
                      const FeatureSpec& spec) {
  const auto tokens = tokenize(text, spec.lowercase);
  const std::uint32_t mask = spec.dims - 1;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::uint64_t h = fnv1a(fnv_offset, std::string_view(&salt, 1));
    for (int n = 1; n <= spec.ngram_max && i + n <= tokens.size(); ++n) {
      // Unit separator between tokens so "ab c" and "a bc" differ.
      if (n > 1) h = fnv1a(h, "\x1f");
      h = fnv1a(h, tokens[i + n - 1]);
      acc[static_cast<std::uint32_t>(mix64(h)) & mask] += 1.0;
    }
  }
}

}  // namespace detail

/// Hashed bag of word n-grams. text_a and text_b are salted differently so a
/// word means different things in each field. An empty text_b is treated as
/// absent.
inline FeatureVector featurize(const Example& example, const FeatureSpec& spec) {
  std::map<std::uint32_t, double> acc;
  detail::add_field(acc, example.text_a, 'a', spec);
  if (example.text_b && !example.text_b->empty()) detail::add_field(acc, *example.text_b, 'b', spec);
  FeatureVector out;
  out.reserve(acc.size());
  for (const auto& [idx, count] : acc) out.push_back({idx, count});
  return out;
}

inline std::vector<FeatureVector> featurize_all(const Dataset& data, const FeatureSpec& spec) {
  std::vector<FeatureVector> out;
  out.reserve(data.size());
  for (const auto& ex : data.examples()) out.push_back(featurize(ex, spec));
  return out;
}

inline std::size_t param_count(const Model& model) {
  std::size_t total = 0;
  for (const auto& p : model.params) total += p.values.size();
  return total;
}

// Same count without building the model.
inline std::size_t param_count(std::uint32_t dims, int hidden_size, int num_classes) {
  const std::size_t d = dims, c = static_cast<std::size_t>(num_classes);
  if (hidden_size == 0) return d * c + c;
  const std::size_t h = static_cast<std::size_t>(hidden_size);
  return d * h + h + h * c + c;
}

/// Shapes the parameter arrays and fills them from hyper.seed. Weights and
/// biases are drawn uniformly, so no parameter is zero with probability 1.
inline Model initialize(const FeatureSpec& spec, const Hyperparams& hyper, int num_classes) {
  spec.validate();
  hyper.validate();
  if (num_classes < 2) throw ValidationError("num_classes must be >= 2");
  Model m{spec, hyper, num_classes, {}};
  Rng rng(hyper.seed);
  const std::size_t d = spec.dims, c = static_cast<std::size_t>(num_classes);
  auto fill = [&](std::string name, std::size_t size, double scale) {
    ParamArray p{std::move(name), std::vector<double>(size)};
    for (auto& v : p.values) v = rng.uniform(-scale, scale);
    m.params.push_back(std::move(p));
  };
  if (!m.is_mlp()) {
    fill("W", d * c, 0.01);
    fill("b", c, 0.01);
  } else {
    const std::size_t h = static_cast<std::size_t>(hyper.hidden_size);
    fill("W1", d * h, std::sqrt(6.0 / static_cast<double>(d + h)));
    fill("b1", h, 0.01);
    fill("W2", h * c, std::sqrt(6.0 / static_cast<double>(h + c)));
    fill("b2", c, 0.01);
  }
  return m;
}

namespace detail {

inline void softmax_inplace(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (auto& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : z) v /= sum;
}

// Hidden activations (MLP only) and class logits for one example.
struct Forward {
  std::vector<double> hidden;
  std::vector<double> logits;
};

inline Forward forward(const Model& m, const FeatureVector& x) {
  const std::size_t c = static_cast<std::size_t>(m.num_classes);
  Forward f;
  if (!m.is_mlp()) {
    const auto& W = m.params[0].values;
    f.logits = m.params[1].values;
    for (const auto& [idx, val] : x)
      for (std::size_t k = 0; k < c; ++k) f.logits[k] += val * W[idx * c + k];
    return f;
  }
  const std::size_t h = static_cast<std::size_t>(m.hyper.hidden_size);
  const auto& W1 = m.params[0].values;
  f.hidden = m.params[1].values;
  for (const auto& [idx, val] : x)
    for (std::size_t j = 0; j < h; ++j) f.hidden[j] += val * W1[idx * h + j];
  for (auto& v : f.hidden) v = std::tanh(v);
  const auto& W2 = m.params[2].values;
  f.logits = m.params[3].values;
  for (std::size_t j = 0; j < h; ++j)
    for (std::size_t k = 0; k < c; ++k) f.logits[k] += f.hidden[j] * W2[j * c + k];
  return f;
}

inline bool is_weight_array(std::string_view name) { return !name.empty() && name[0] == 'W'; }

}  // namespace detail

inline ProbVector predict_proba(const Model& model, const FeatureVector& x) {
  auto f = detail::forward(model, x);
  detail::softmax_inplace(f.logits);
  return ProbVector{std::move(f.logits)};
}

inline ProbVector predict_proba(const Model& model, const Example& example) {
  return predict_proba(model, featurize(example, model.spec));
}

inline int argmax(const std::vector<double>& v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline int predict_class(const Model& model, const Example& example) {
  return argmax(predict_proba(model, example).probs);
}

/// Mean cross-entropy over the batch plus (l2 / 2) * sum of squared weights.
/// Biases are not penalized. When grads is non-null it receives dLoss/dparam
/// with the same layout as model.params.
inline double loss_and_gradient(const Model& m, const std::vector<FeatureVector>& xs,
                                const std::vector<int>& ys, std::span<const std::size_t> batch,
                                std::vector<std::vector<double>>* grads) {
  const std::size_t c = static_cast<std::size_t>(m.num_classes);
  const std::size_t h = static_cast<std::size_t>(m.hyper.hidden_size);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  if (grads) {
    grads->resize(m.params.size());
    for (std::size_t a = 0; a < m.params.size(); ++a)
      (*grads)[a].assign(m.params[a].values.size(), 0.0);
  }
  double loss = 0.0;
  std::vector<double> delta(c), dhidden(h);
  for (auto i : batch) {
    const auto& x = xs[i];
    auto f = detail::forward(m, x);
    detail::softmax_inplace(f.logits);
    const auto y = static_cast<std::size_t>(ys[i]);
    loss -= std::log(std::max(f.logits[y], 1e-300)) * inv_b;
    if (!grads) continue;
    for (std::size_t k = 0; k < c; ++k) delta[k] = (f.logits[k] - (k == y ? 1.0 : 0.0)) * inv_b;
    if (!m.is_mlp()) {
      auto& gW = (*grads)[0];
      auto& gb = (*grads)[1];
      for (const auto& [idx, val] : x)
        for (std::size_t k = 0; k < c; ++k) gW[idx * c + k] += val * delta[k];
      for (std::size_t k = 0; k < c; ++k) gb[k] += delta[k];
    } else {
      const auto& W2 = m.params[2].values;
      auto& gW1 = (*grads)[0];
      auto& gb1 = (*grads)[1];
      auto& gW2 = (*grads)[2];
      auto& gb2 = (*grads)[3];
      for (std::size_t j = 0; j < h; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
          gW2[j * c + k] += f.hidden[j] * delta[k];
          s += W2[j * c + k] * delta[k];
        }
        dhidden[j] = s * (1.0 - f.hidden[j] * f.hidden[j]);
      }
      for (std::size_t k = 0; k < c; ++k) gb2[k] += delta[k];
      for (const auto& [idx, val] : x)
        for (std::size_t j = 0; j < h; ++j) gW1[idx * h + j] += val * dhidden[j];
      for (std::size_t j = 0; j < h; ++j) gb1[j] += dhidden[j];
    }
  }
  const double l2 = m.hyper.l2;
  if (l2 > 0.0) {
    for (std::size_t a = 0; a < m.params.size(); ++a) {
      if (!detail::is_weight_array(m.params[a].name)) continue;
      const auto& w = m.params[a].values;
      double sq = 0.0;
      for (std::size_t k = 0; k < w.size(); ++k) {
        sq += w[k] * w[k];
        if (grads) (*grads)[a][k] += l2 * w[k];
      }
      loss += 0.5 * l2 * sq;
    }
  }
  return loss;
}

// Full-dataset training objective; used to check that fit made progress.
inline double training_loss(const Model& model, const Dataset& data) {
  const auto xs = featurize_all(data, model.spec);
  const auto ys = data.labels();
  std::vector<std::size_t> all(xs.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return loss_and_gradient(model, xs, ys, all, nullptr);
}

/// Mini-batch gradient descent on cross-entropy with L2. Batch order is
/// reshuffled each epoch from a stream seeded by hyper.seed, so the result is
/// bit-identical for identical inputs. Throws TrainingError if the loss turns
/// non-finite.
inline Model fit(const Dataset& train, const FeatureSpec& spec, const Hyperparams& hyper) {
  if (train.empty()) throw ValidationError("fit: training set is empty");
  Model m = initialize(spec, hyper, train.num_classes());
  const auto xs = featurize_all(train, spec);
  const auto ys = train.labels();
  std::vector<std::size_t> order(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(hyper.seed, 0x5eed, 0, 0));
  std::vector<std::vector<double>> grads;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += hyper.batch_size) {
      const std::size_t len = std::min(hyper.batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, len);
      const double loss = loss_and_gradient(m, xs, ys, batch, &grads);
      bool finite = std::isfinite(loss);
      for (std::size_t a = 0; a < m.params.size(); ++a) {
        auto& w = m.params[a].values;
        const auto& g = grads[a];
        for (std::size_t k = 0; k < w.size(); ++k) {
          w[k] -= hyper.learning_rate * g[k];
          finite = finite && std::isfinite(w[k]);
        }
      }
      if (!finite)
        throw TrainingError("fit: non-finite loss at epoch " + std::to_string(epoch) +
                            ", batch starting at " + std::to_string(start) +
                            " (learning_rate=" + std::to_string(hyper.learning_rate) + ")");
    }
  }
  return m;
}

// Text container. Doubles are written as hex floats so a reload is bit-exact.
//
//   bagging-model 1
//   num_classes <c>
//   features <dims> <ngram_max> <lowercase>
//   hyper <learning_rate> <epochs> <l2> <hidden_size> <batch_size> <seed>
//   arrays <k>
//   array <name> <length>
//   <values, one per line>
inline void save_model(std::ostream& os, const Model& m) {
  auto hex = [](double v) {
    std::ostringstream s;
    s << std::hexfloat << v;
    return s.str();
  };
  os << "bagging-model 1\n"
     << "num_classes " << m.num_classes << "\n"
     << "features " << m.spec.dims << " " << m.spec.ngram_max << " " << (m.spec.lowercase ? 1 : 0)
     << "\n"
     << "hyper " << hex(m.hyper.learning_rate) << " " << m.hyper.epochs << " " << hex(m.hyper.l2)
     << " " << m.hyper.hidden_size << " " << m.hyper.batch_size << " " << m.hyper.seed << "\n"
     << "arrays " << m.params.size() << "\n";
  for (const auto& p : m.params) {
    os << "array " << p.name << " " << p.values.size() << "\n";
    for (double v : p.values) os << hex(v) << "\n";
  }
}

inline Model load_model(std::istream& is) {
  auto fail = [](const std::string& what) { throw ValidationError("model file: " + what); };
  auto expect = [&](const char* key) {
    std::string k;
    if (!(is >> k) || k != key) fail(std::string("expected '") + key + "'");
  };
  // operator>> does not parse hex floats; strtod does.
  auto read_double = [&]() {
    std::string tok;
    if (!(is >> tok)) fail("truncated");
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size()) fail("bad number '" + tok + "'");
    return v;
  };
  expect("bagging-model");
  int version = 0;
  if (!(is >> version) || version != 1) fail("unsupported version");
  Model m;
  int lower = 0;
  expect("num_classes");
  is >> m.num_classes;
  expect("features");
  is >> m.spec.dims >> m.spec.ngram_max >> lower;
  m.spec.lowercase = lower != 0;
  expect("hyper");
  m.hyper.learning_rate = read_double();
  is >> m.hyper.epochs;
  m.hyper.l2 = read_double();
  is >> m.hyper.hidden_size >> m.hyper.batch_size >> m.hyper.seed;
  std::size_t arrays = 0;
  expect("arrays");
  is >> arrays;
  if (!is) fail("bad header");
  for (std::size_t a = 0; a < arrays; ++a) {
    ParamArray p;
    std::size_t len = 0;
    expect("array");
    if (!(is >> p.name >> len)) fail("bad array header");
    p.values.resize(len);
    for (auto& v : p.values) v = read_double();
    m.params.push_back(std::move(p));
  }
  m.spec.validate();
  m.hyper.validate();
  const Model shape = initialize(m.spec, m.hyper, m.num_classes);
  if (shape.params.size() != m.params.size()) fail("wrong number of arrays");
  for (std::size_t a = 0; a < m.params.size(); ++a)
    if (shape.params[a].name != m.params[a].name ||
        shape.params[a].values.size() != m.params[a].values.size())
      fail("array '" + m.params[a].name + "' has inconsistent shape");
  return m;
}

inline void save_model(const std::filesystem::path& path, const Model& m) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write model: " + path.string());
  save_model(os, m);
  if (!os) throw IoError("error writing model: " + path.string());
}

inline Model load_model(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open model: " + path.string());
  return load_model(is);
}

}  // namespace bagging
