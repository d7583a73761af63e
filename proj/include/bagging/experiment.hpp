#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bagging/config.hpp"
#include "bagging/dataset.hpp"
#include "bagging/ensemble.hpp"
#include "bagging/error.hpp"
#include "bagging/metrics.hpp"
#include "bagging/parallel.hpp"
#include "bagging/predictor.hpp"
#include "bagging/prune.hpp"
#include "bagging/resample.hpp"
#include "bagging/rng.hpp"
#include "bagging/task.hpp"

namespace bagging {

inline double score(Metric metric, std::span<const int> predictions, std::span<const int> labels,
                    int num_classes) {
  return metric == Metric::accuracy ? accuracy(predictions, labels)
                                    : macro_f1(predictions, labels, num_classes).first;
}

inline std::vector<int> predict_all(const Model& model, const Dataset& data) {
  std::vector<int> out;
  out.reserve(data.size());
  for (const auto& x : featurize_all(data, model.spec)) out.push_back(argmax(predict_proba(model, x).probs));
  return out;
}

/// Fits one model per candidate on train and returns the position of the one
/// scoring highest on val. A candidate whose training diverges scores -inf.
/// Exact ties keep the earliest candidate. Throws TrainingError if every
/// candidate diverges.
inline std::size_t grid_search_index(std::span<const Hyperparams> space, const Dataset& train,
                                     const Dataset& val, const FeatureSpec& features, Metric metric) {
  if (space.empty()) throw ValidationError("grid_search: empty search space");
  if (train.empty() || val.empty()) throw ValidationError("grid_search: empty train or val set");
  if (space.size() == 1) return 0;
  const auto labels = val.labels();
  std::size_t best = space.size();
  double best_score = -std::numeric_limits<double>::infinity();
  std::string last_error;
  for (std::size_t i = 0; i < space.size(); ++i) {
    double s = -std::numeric_limits<double>::infinity();
    try {
      const Model m = fit(train, features, space[i]);
      s = score(metric, predict_all(m, val), labels, val.num_classes());
    } catch (const TrainingError& e) {
      last_error = e.what();
      continue;
    }
    if (best == space.size() || s > best_score) {
      best = i;
      best_score = s;
    }
  }
  if (best == space.size())
    throw TrainingError("grid_search: every candidate diverged; last error: " + last_error);
  return best;
}

inline Hyperparams grid_search(std::span<const Hyperparams> space, const Dataset& train,
                               const Dataset& val, const FeatureSpec& features, Metric metric) {
  return space[grid_search_index(space, train, val, features, metric)];
}

/// Memoizes grid-search winners per (model type, task) so that every member
/// of one type reuses the same hyperparameters. Thread-safe.
class HyperparamCache {
 public:
  template <typename Search>
  Hyperparams get(const std::string& key, Search&& search) {
    {
      std::lock_guard lock(mu_);
      if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    Hyperparams h = search();
    std::lock_guard lock(mu_);
    return cache_.emplace(key, h).first->second;
  }

 private:
  std::mutex mu_;
  std::map<std::string, Hyperparams> cache_;
};

struct RunOptions {
  std::vector<Hyperparams> grid = default_grid();
  std::uint64_t base_seed = 0;  // used when the config carries none
  std::size_t jobs = 1;
  bool keep_models = false;
  HyperparamCache* cache = nullptr;  // optional, shared across configs
};

struct MemberRecord {
  std::string task;
  std::size_t member = 0;
  std::string description;
  bool bagged = false;
  std::uint64_t sample_seed = 0;  // 0 when trained on the full set
  std::uint64_t init_seed = 0;
  Hyperparams hyper;
  std::size_t train_size = 0;
  double sparsity = 0.0;
};

struct TaskScore {
  std::string task;
  double accuracy = 0.0;
  std::optional<double> macro_f1;  // present for macro_f1 tasks
  std::size_t total_params = 0;
};

struct ConfigResult {
  std::string config_id;
  ConfigType type = ConfigType::single;
  std::vector<TaskScore> tasks;
  double avg_accuracy = 0.0;
  std::vector<std::string> models;
  std::size_t total_params = 0;
  std::uint64_t base_seed = 0;
  std::vector<MemberRecord> members;
  std::map<std::string, std::vector<Model>> trained;  // only with keep_models
};

inline Hyperparams member_hyper(const MemberSpec& spec, const TaskData& task, const RunOptions& opt) {
  Hyperparams h;
  if (spec.hyper_override) {
    h = *spec.hyper_override;
  } else {
    std::vector<Hyperparams> space = opt.grid.empty() ? default_grid() : opt.grid;
    for (auto& c : space) c.hidden_size = spec.effective_hidden();
    auto search = [&] { return grid_search(space, task.train, task.val, spec.features, task.metric); };
    h = opt.cache ? opt.cache->get(spec.type_key() + "@" + task.name, search) : search();
  }
  h.hidden_size = spec.effective_hidden();
  return h;
}

/// Runs one configuration on every listed task: per-type grid search on the
/// full training set, member training (bagged members on their own bootstrap
/// sample), per-member pruning, soft-vote evaluation on the test set.
/// Seeds derive from the config's base seed and the member index only.
inline ConfigResult run_config(const EnsembleConfig& config, const TaskMap& data,
                               const RunOptions& opt = {}) {
  check_structure(config);
  for (const auto& t : config.tasks)
    if (!data.count(t))
      throw ValidationError("config '" + config.config_id + "': unknown task '" + t + "'");

  ConfigResult result;
  result.config_id = config.config_id;
  result.type = config.type;
  result.base_seed = config.base_seed.value_or(opt.base_seed);
  for (const auto& m : config.members) result.models.push_back(m.describe());

  const std::size_t members = config.members.size();
  for (const auto& task_name : config.tasks) {
    const TaskData& task = data.at(task_name);

    // Search sequentially so the cache sees types in member order.
    std::vector<Hyperparams> hypers;
    for (const auto& spec : config.members) {
      try {
        hypers.push_back(member_hyper(spec, task, opt));
      } catch (const Error& e) {
        throw TrainingError("config '" + config.config_id + "' task '" + task_name +
                            "' member " + std::to_string(hypers.size()) + ": " + e.what());
      }
    }

    std::vector<Model> models(members);
    std::vector<MemberRecord> records(members);
    parallel_for(members, opt.jobs, [&](std::size_t i) {
      const MemberSpec& spec = config.members[i];
      MemberRecord& rec = records[i];
      rec.task = task_name;
      rec.member = i;
      rec.description = spec.describe();
      rec.bagged = spec.bagged;
      rec.hyper = hypers[i];
      rec.hyper.seed = rec.init_seed = derive_seed(result.base_seed, SeedLevel::member_init, i, 0);
      try {
        if (spec.bagged) {
          rec.sample_seed = derive_seed(result.base_seed, SeedLevel::member_sample, i, 0);
          const Dataset sample = materialize(task.train, bootstrap(task.train.size(), rec.sample_seed));
          models[i] = fit(sample, spec.features, rec.hyper);
        } else {
          models[i] = fit(task.train, spec.features, rec.hyper);
        }
      } catch (const Error& e) {
        throw TrainingError("config '" + config.config_id + "' task '" + task_name + "' member " +
                            std::to_string(i) + ": " + e.what());
      }
      rec.train_size = task.train.size();
      if (spec.prune_fraction > 0.0) models[i] = prune_magnitude(models[i], PruneSpec{spec.prune_fraction});
      rec.sparsity = sparsity(models[i]);
    });

    std::size_t params = 0;
    for (const auto& m : models) params += param_count(m);
    const Ensemble ensemble(std::move(models));
    const auto predictions = ensemble.predict_all(task.test);
    const auto labels = task.test.labels();

    TaskScore ts;
    ts.task = task_name;
    ts.accuracy = accuracy(predictions, labels);
    if (task.metric == Metric::macro_f1)
      ts.macro_f1 = macro_f1(predictions, labels, task.test.num_classes()).first;
    ts.total_params = params;
    result.tasks.push_back(ts);
    result.total_params = std::max(result.total_params, params);
    result.members.insert(result.members.end(), records.begin(), records.end());
    if (opt.keep_models) result.trained[task_name] = ensemble.members();
  }

  double sum = 0.0;
  for (const auto& t : result.tasks) sum += t.accuracy;
  result.avg_accuracy = sum / static_cast<double>(result.tasks.size());
  return result;
}

struct VarianceReport {
  std::string task;
  std::string model;
  std::size_t n = 0;
  std::size_t m = 0;
  Metric metric = Metric::accuracy;
  std::vector<double> singles;
  std::vector<double> ensembles;
  double single_mean = 0.0, single_std = 0.0;
  double ensemble_mean = 0.0, ensemble_std = 0.0;
  BootstrapPlan plan;
};

struct VarianceOptions {
  std::vector<Hyperparams> grid = default_grid();
  std::size_t jobs = 1;
  Metric metric = Metric::accuracy;
  // Called with (level, i, j, training set) right before each fit; level 0 is
  // a single model, level 1 an ensemble member. May be called concurrently.
  std::function<void(int, std::size_t, std::size_t, const Dataset&)> on_train;
};

/// Double-bootstrap comparison. Single model i trains on first-level sample
/// i; ensemble i averages m models trained on the second-level samples drawn
/// from that same first-level sample. All are scored on the fixed test set.
inline VarianceReport variance_analysis(const TaskData& task, const MemberSpec& member, std::size_t n,
                                        std::size_t m, std::uint64_t base_seed,
                                        const VarianceOptions& opt = {}) {
  if (n < 2) throw ValidationError("variance_analysis: n must be >= 2");
  if (m < 1) throw ValidationError("variance_analysis: m must be >= 1");
  member.validate();

  VarianceReport report;
  report.task = task.name;
  report.model = member.describe();
  report.n = n;
  report.m = m;
  report.metric = opt.metric;
  report.plan = make_plan(n, m, task.train.size(), base_seed);

  RunOptions ro;
  ro.grid = opt.grid;
  const Hyperparams hyper = member_hyper(member, task, ro);

  const auto labels = task.test.labels();
  const int classes = task.test.num_classes();
  auto train_one = [&](const Dataset& data, std::uint64_t seed) {
    Hyperparams h = hyper;
    h.seed = seed;
    Model model = fit(data, member.features, h);
    if (member.prune_fraction > 0.0) model = prune_magnitude(model, PruneSpec{member.prune_fraction});
    return model;
  };

  report.singles.assign(n, 0.0);
  report.ensembles.assign(n, 0.0);
  // One unit per single model and per ensemble.
  parallel_for(2 * n, opt.jobs, [&](std::size_t unit) {
    const std::size_t i = unit / 2;
    const Dataset first = materialize(task.train, report.plan.first_level[i]);
    if (unit % 2 == 0) {
      if (opt.on_train) opt.on_train(0, i, 0, first);
      const Model single = train_one(first, derive_seed(base_seed, SeedLevel::single_init, i, 0));
      report.singles[i] = score(opt.metric, predict_all(single, task.test), labels, classes);
      return;
    }
    std::vector<Model> members;
    for (std::size_t j = 0; j < m; ++j) {
      const Dataset second = materialize(first, report.plan.second_level[i][j]);
      if (opt.on_train) opt.on_train(1, i, j, second);
      members.push_back(train_one(second, derive_seed(base_seed, SeedLevel::ensemble_init, i, j)));
    }
    const Ensemble ensemble(std::move(members));
    report.ensembles[i] = score(opt.metric, ensemble.predict_all(task.test), labels, classes);
  });

  std::tie(report.single_mean, report.single_std) = mean_std(report.singles);
  std::tie(report.ensemble_mean, report.ensemble_std) = mean_std(report.ensembles);
  return report;
}

/// Nearest baseline B with |total - B| <= 10% of B, if any. Equal distances
/// resolve to the smaller baseline.
inline std::optional<std::uint64_t> equivalence_group(std::uint64_t total,
                                                      std::span<const std::uint64_t> baselines) {
  if (baselines.empty()) throw ValidationError("equivalence_group: no baselines");
  std::optional<std::uint64_t> best;
  std::uint64_t best_dist = 0;
  for (auto b : baselines) {
    if (b == 0) throw ValidationError("equivalence_group: baselines must be positive");
    const std::uint64_t dist = total > b ? total - b : b - total;
    // Integer form of dist <= 0.10 * b.
    if (dist * 10 > b) continue;
    if (!best || dist < best_dist || (dist == best_dist && b < *best)) {
      best = b;
      best_dist = dist;
    }
  }
  return best;
}

}  // namespace bagging
