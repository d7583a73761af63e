#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bagging/error.hpp"
#include "bagging/predictor.hpp"

namespace bagging {

enum class ModelKind { logreg, mlp };

enum class ConfigType {
  single,
  homo,
  homo_pruned,
  hetero_same_family,
  hetero_diff_family,
  hetero_diff_family_pruned,
};

inline constexpr std::string_view to_string(ModelKind k) {
  return k == ModelKind::logreg ? "logreg" : "mlp";
}

inline constexpr std::string_view to_string(ConfigType t) {
  switch (t) {
    case ConfigType::single: return "single";
    case ConfigType::homo: return "homo";
    case ConfigType::homo_pruned: return "homo_pruned";
    case ConfigType::hetero_same_family: return "hetero_same_family";
    case ConfigType::hetero_diff_family: return "hetero_diff_family";
    case ConfigType::hetero_diff_family_pruned: return "hetero_diff_family_pruned";
  }
  return "?";
}

// Human-readable label used in the results table.
inline constexpr std::string_view type_label(ConfigType t) {
  switch (t) {
    case ConfigType::single: return "Single Model";
    case ConfigType::homo: return "Ensemble - Homogeneous Model Type";
    case ConfigType::homo_pruned: return "Ensemble - Homogeneous Model Type (Pruned Models)";
    case ConfigType::hetero_same_family:
      return "Ensemble - Heterogeneous Model Type - Same Model Family";
    case ConfigType::hetero_diff_family:
      return "Ensemble - Heterogeneous Model Type - Different Model Families";
    case ConfigType::hetero_diff_family_pruned:
      return "Ensemble - Heterogeneous Model Type - Different Model Families (Pruned Models)";
  }
  return "?";
}

inline ConfigType parse_config_type(std::string_view s) {
  for (auto t : {ConfigType::single, ConfigType::homo, ConfigType::homo_pruned,
                 ConfigType::hetero_same_family, ConfigType::hetero_diff_family,
                 ConfigType::hetero_diff_family_pruned})
    if (to_string(t) == s) return t;
  throw ValidationError("unknown config type '" + std::string(s) + "'");
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "logreg") return ModelKind::logreg;
  if (s == "mlp") return ModelKind::mlp;
  throw ValidationError("unknown model kind '" + std::string(s) + "' (expected logreg or mlp)");
}

/// One ensemble member. The "model type" (analogous to a named pretrained
/// checkpoint) is the architecture: kind, hidden width and feature space.
/// Training hyperparameters come from the grid search unless overridden.
struct MemberSpec {
  ModelKind kind = ModelKind::logreg;
  FeatureSpec features;
  int hidden_size = 16;  // used only by mlp
  std::optional<Hyperparams> hyper_override;
  double prune_fraction = 0.0;
  bool bagged = false;

  int effective_hidden() const { return kind == ModelKind::mlp ? hidden_size : 0; }

  // Architecture key: members with equal keys are the same model type.
  std::string type_key() const {
    std::string s(to_string(kind));
    if (kind == ModelKind::mlp) s += std::to_string(hidden_size);
    s += "/d" + std::to_string(features.dims);
    if (features.ngram_max != 1) s += "/n" + std::to_string(features.ngram_max);
    if (!features.lowercase) s += "/cased";
    return s;
  }

  // type_key plus prune and bagging markers, e.g. "mlp16/d4096/n2/p0.05/bag".
  std::string describe() const {
    std::string s = type_key();
    if (prune_fraction > 0.0) {
      std::ostringstream p;
      p << prune_fraction;
      s += "/p" + p.str();
    }
    if (bagged) s += "/bag";
    return s;
  }

  std::size_t param_count(int num_classes) const {
    return bagging::param_count(features.dims, effective_hidden(), num_classes);
  }

  void validate() const {
    features.validate();
    if (kind == ModelKind::mlp && hidden_size < 1)
      throw ValidationError("mlp member needs hidden_size >= 1");
    if (!(prune_fraction >= 0.0 && prune_fraction <= 1.0))
      throw ValidationError("prune_fraction must lie in [0, 1]");
    if (hyper_override) hyper_override->validate();
  }
};

/// Inverse of MemberSpec::describe. Segments after the kind may appear in
/// any order: d<dims>, n<ngram_max>, cased, p<fraction>, bag.
inline MemberSpec parse_member_description(std::string_view text) {
  MemberSpec m;
  std::vector<std::string> parts;
  {
    std::string cur;
    for (char c : text) {
      if (c == '/') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    parts.push_back(cur);
  }
  auto bad = [&]() -> ValidationError {
    return ValidationError("bad member description '" + std::string(text) + "'");
  };
  auto number = [&](const std::string& s, auto& out) {
    std::istringstream is(s);
    if (!(is >> out) || !is.eof()) throw bad();
  };
  const std::string& head = parts.front();
  if (head == "logreg") {
    m.kind = ModelKind::logreg;
  } else if (head.rfind("mlp", 0) == 0) {
    m.kind = ModelKind::mlp;
    if (head.size() > 3) number(head.substr(3), m.hidden_size);
  } else {
    throw bad();
  }
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const std::string& p = parts[i];
    if (p == "bag") m.bagged = true;
    else if (p == "cased") m.features.lowercase = false;
    else if (p.size() > 1 && p[0] == 'd') number(p.substr(1), m.features.dims);
    else if (p.size() > 1 && p[0] == 'n') number(p.substr(1), m.features.ngram_max);
    else if (p.size() > 1 && p[0] == 'p') number(p.substr(1), m.prune_fraction);
    else throw bad();
  }
  m.validate();
  return m;
}

struct EnsembleConfig {
  std::string config_id;
  ConfigType type = ConfigType::single;
  std::vector<MemberSpec> members;
  std::vector<std::string> tasks;
  std::optional<std::uint64_t> base_seed;  // falls back to the batch seed

  std::size_t param_count(int num_classes) const {
    std::size_t total = 0;
    for (const auto& m : members) total += m.param_count(num_classes);
    return total;
  }
};

/// Member constraints per configuration type:
///   single                    exactly one member
///   homo / homo_pruned        >= 2 members, one model type; unpruned / >= 1 pruned
///   hetero_same_family        >= 2 members, one kind, >= 2 model types
///   hetero_diff_family(_pruned) >= 2 members, >= 2 kinds; unpruned / >= 1 pruned
inline void check_structure(const EnsembleConfig& cfg) {
  auto fail = [&](const std::string& why) {
    throw ValidationError("config '" + cfg.config_id + "' (" + std::string(to_string(cfg.type)) +
                          "): " + why);
  };
  if (cfg.config_id.empty()) throw ValidationError("config with empty id");
  if (cfg.members.empty()) fail("no members");
  if (cfg.tasks.empty()) fail("no tasks");
  for (std::size_t i = 0; i < cfg.members.size(); ++i) {
    try {
      cfg.members[i].validate();
    } catch (const ValidationError& e) {
      fail("member " + std::to_string(i) + ": " + e.what());
    }
  }
  std::set<std::string> types;
  std::set<ModelKind> kinds;
  std::size_t pruned = 0;
  for (const auto& m : cfg.members) {
    types.insert(m.type_key());
    kinds.insert(m.kind);
    pruned += m.prune_fraction > 0.0;
  }
  const std::size_t n = cfg.members.size();
  switch (cfg.type) {
    case ConfigType::single:
      if (n != 1) fail("expects exactly 1 member, got " + std::to_string(n));
      break;
    case ConfigType::homo:
    case ConfigType::homo_pruned:
      if (n < 2) fail("expects at least 2 members");
      if (types.size() != 1) fail("members must share one model type");
      break;
    case ConfigType::hetero_same_family:
      if (n < 2) fail("expects at least 2 members");
      if (kinds.size() != 1) fail("members must share one model family");
      if (types.size() < 2) fail("members must span at least 2 model types");
      break;
    case ConfigType::hetero_diff_family:
    case ConfigType::hetero_diff_family_pruned:
      if (n < 2) fail("expects at least 2 members");
      if (kinds.size() < 2) fail("members must span at least 2 model families");
      break;
  }
  const bool wants_pruning =
      cfg.type == ConfigType::homo_pruned || cfg.type == ConfigType::hetero_diff_family_pruned;
  const bool forbids_pruning =
      cfg.type == ConfigType::homo || cfg.type == ConfigType::hetero_diff_family;
  if (wants_pruning && pruned == 0) fail("pruned type needs a member with prune_fraction > 0");
  if (forbids_pruning && pruned > 0) fail("unpruned type has pruned members");
}

struct ExperimentBatch {
  std::vector<Hyperparams> grid;  // empty = default_grid()
  std::vector<EnsembleConfig> configs;
};

// Default search space. A toolkit choice sized for the built-in learners.
inline std::vector<Hyperparams> default_grid() {
  std::vector<Hyperparams> grid;
  for (double lr : {0.5, 0.1})
    for (int epochs : {5, 15}) {
      Hyperparams h;
      h.learning_rate = lr;
      h.epochs = epochs;
      h.l2 = 1e-4;
      grid.push_back(h);
    }
  return grid;
}

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::string& where,
                           std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ValidationError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) throw ValidationError(where + ": unknown field '" + key + "'");
  }
}

template <typename T>
T field(const nlohmann::json& obj, const char* key, const std::string& where, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(where + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
T required(const nlohmann::json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ValidationError(where + ": missing field '" + key + "'");
  return field<T>(obj, key, where, T{});
}

inline Hyperparams parse_hyper(const nlohmann::json& j, const std::string& where) {
  reject_unknown(j, where, {"learning_rate", "epochs", "l2", "batch_size", "seed"});
  Hyperparams h;
  h.learning_rate = field(j, "learning_rate", where, h.learning_rate);
  h.epochs = field(j, "epochs", where, h.epochs);
  h.l2 = field(j, "l2", where, h.l2);
  h.batch_size = field(j, "batch_size", where, h.batch_size);
  h.seed = field(j, "seed", where, h.seed);
  try {
    h.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
  return h;
}

inline MemberSpec parse_member(const nlohmann::json& j, const std::string& where) {
  reject_unknown(j, where,
                 {"model", "dims", "ngram_max", "lowercase", "hidden_size", "hyper", "prune", "bagged"});
  MemberSpec m;
  try {
    m.kind = parse_model_kind(required<std::string>(j, "model", where));
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
  m.features.dims = field(j, "dims", where, m.features.dims);
  m.features.ngram_max = field(j, "ngram_max", where, m.features.ngram_max);
  m.features.lowercase = field(j, "lowercase", where, m.features.lowercase);
  m.hidden_size = field(j, "hidden_size", where, m.hidden_size);
  m.prune_fraction = field(j, "prune", where, m.prune_fraction);
  m.bagged = field(j, "bagged", where, m.bagged);
  if (j.contains("hyper")) m.hyper_override = parse_hyper(j["hyper"], where + ".hyper");
  return m;
}

}  // namespace detail

/// JSON batch document:
///   { "grid": [ {hyper}, ... ],            (optional)
///     "configs": [ { "id", "type", "tasks": [..], "base_seed"?, "members": [
///         { "model": "logreg"|"mlp", "dims"?, "ngram_max"?, "lowercase"?,
///           "hidden_size"?, "hyper"?, "prune"?, "bagged"? } ] } ] }
/// Unknown fields anywhere are errors. Structural checks are not applied
/// here; see check_structure.
inline ExperimentBatch parse_batch(std::string_view text, const std::string& source = "config") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(source + ": parse error at byte " + std::to_string(e.byte) + ": " +
                          e.what());
  }
  detail::reject_unknown(doc, source, {"grid", "configs"});
  ExperimentBatch batch;
  if (doc.contains("grid")) {
    if (!doc["grid"].is_array() || doc["grid"].empty())
      throw ValidationError(source + ": 'grid' must be a non-empty array");
    for (std::size_t i = 0; i < doc["grid"].size(); ++i)
      batch.grid.push_back(
          detail::parse_hyper(doc["grid"][i], source + ".grid[" + std::to_string(i) + "]"));
  }
  if (!doc.contains("configs") || !doc["configs"].is_array())
    throw ValidationError(source + ": missing 'configs' array");
  std::set<std::string> ids;
  for (std::size_t i = 0; i < doc["configs"].size(); ++i) {
    const auto& c = doc["configs"][i];
    const std::string where = source + ".configs[" + std::to_string(i) + "]";
    detail::reject_unknown(c, where, {"id", "type", "tasks", "base_seed", "members"});
    EnsembleConfig cfg;
    cfg.config_id = detail::required<std::string>(c, "id", where);
    if (!ids.insert(cfg.config_id).second)
      throw ValidationError(where + ": duplicate config id '" + cfg.config_id + "'");
    try {
      cfg.type = parse_config_type(detail::required<std::string>(c, "type", where));
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    cfg.tasks = detail::required<std::vector<std::string>>(c, "tasks", where);
    if (c.contains("base_seed")) cfg.base_seed = detail::field<std::uint64_t>(c, "base_seed", where, 0);
    if (!c.contains("members") || !c["members"].is_array())
      throw ValidationError(where + ": missing 'members' array");
    for (std::size_t k = 0; k < c["members"].size(); ++k)
      cfg.members.push_back(
          detail::parse_member(c["members"][k], where + ".members[" + std::to_string(k) + "]"));
    batch.configs.push_back(std::move(cfg));
  }
  return batch;
}

inline ExperimentBatch load_batch(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_batch(ss.str(), path.string());
}

}  // namespace bagging
