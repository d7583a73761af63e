#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bagging/config.hpp"
#include "bagging/error.hpp"
#include "bagging/experiment.hpp"
#include "bagging/predictor.hpp"
#include "bagging/prune.hpp"
#include "bagging/report.hpp"
#include "bagging/task.hpp"

namespace bagging::cli {

enum ExitCode : int {
  ok = 0,
  internal = 1,
  usage = 2,
  validation = 3,
  partial_failure = 4,
  io = 5,
};

struct ValidateArgs {
  std::string config;
  std::string data;
};

struct RunArgs {
  std::string config;
  std::string data;
  std::string out;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
  std::size_t top = 15;
  bool save_models = false;
};

struct VarianceArgs {
  std::string data;
  std::string task;
  std::string member = "logreg";
  std::size_t n = 10;
  std::size_t m = 5;
  std::uint64_t seed = 0;
  std::string out;
  std::size_t jobs = 1;
  std::string metric = "accuracy";
};

struct PruneArgs {
  std::string model;
  double fraction = 0.0;
  std::string out;
};

struct ReportArgs {
  std::string results;
  std::size_t top = 15;
  std::vector<std::uint64_t> baselines;
};

namespace detail {

// Classes per task when the data directory is available, else 2.
inline int classes_for(const EnsembleConfig& cfg, const std::string& data_dir) {
  int classes = 2;
  if (data_dir.empty()) return classes;
  for (const auto& t : cfg.tasks) {
    const auto meta = std::filesystem::path(data_dir) / t / "task.json";
    std::ifstream in(meta);
    if (!in) continue;
    try {
      const auto j = nlohmann::json::parse(in);
      classes = std::max(classes, static_cast<int>(j.at("labels").size()));
    } catch (const nlohmann::json::exception&) {
    }
  }
  return classes;
}

inline void print_top(std::ostream& out, const std::vector<ConfigResult>& results, std::size_t top) {
  const auto sorted = sorted_results(results);
  out << std::left << std::setw(26) << "config" << std::setw(10) << "avg_acc" << std::setw(14)
      << "params" << "type / models\n";
  for (std::size_t i = 0; i < sorted.size() && i < top; ++i) {
    const auto& r = sorted[i];
    out << std::left << std::setw(26) << (r.config_id + " ") << std::setw(10) << std::fixed
        << std::setprecision(4) << r.avg_accuracy << std::setw(14) << r.total_params
        << type_label(r.type) << " / " << bagging::detail::join(r.models, ", ") << "\n";
  }
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

}  // namespace detail

inline int cmd_validate(const ValidateArgs& a, std::ostream& out, std::ostream& err) {
  const ExperimentBatch batch = load_batch(a.config);
  int status = ok;
  for (const auto& cfg : batch.configs) {
    try {
      check_structure(cfg);
      out << cfg.config_id << " " << to_string(cfg.type) << " members=" << cfg.members.size()
          << " params=" << cfg.param_count(detail::classes_for(cfg, a.data)) << "\n";
    } catch (const ValidationError& e) {
      err << "invalid: " << e.what() << "\n";
      status = validation;
    }
  }
  return status;
}

inline int cmd_run(const RunArgs& a, std::ostream& out, std::ostream& err) {
  const ExperimentBatch batch = load_batch(a.config);
  detail::ensure_dir(a.out);

  HyperparamCache cache;
  RunOptions opt;
  if (!batch.grid.empty()) opt.grid = batch.grid;
  opt.base_seed = a.seed;
  opt.jobs = a.jobs;
  opt.cache = &cache;
  opt.keep_models = a.save_models;

  std::map<std::string, TaskData> loaded;
  std::map<std::string, std::string> load_errors;
  std::vector<ConfigResult> results;
  std::vector<std::string> failures;
  for (const auto& cfg : batch.configs) {
    try {
      check_structure(cfg);
      TaskMap data;
      for (const auto& t : cfg.tasks) {
        if (!loaded.count(t) && !load_errors.count(t)) {
          try {
            loaded.emplace(t, load_task(std::filesystem::path(a.data) / t));
          } catch (const Error& e) {
            load_errors.emplace(t, e.what());
          }
        }
        if (load_errors.count(t))
          throw ValidationError("config '" + cfg.config_id + "': task '" + t +
                                "' unavailable: " + load_errors.at(t));
        data.emplace(t, loaded.at(t));
      }
      results.push_back(run_config(cfg, data, opt));
    } catch (const Error& e) {
      failures.push_back(e.what());
    }
  }

  if (!results.empty()) {
    write_report(results, std::filesystem::path(a.out) / "results.csv");
    write_atomic(std::filesystem::path(a.out) / "manifest.txt", format_run_manifest(results));
    if (a.save_models)
      for (const auto& r : results)
        for (const auto& [task, models] : r.trained) {
          const auto dir = std::filesystem::path(a.out) / "models" / r.config_id / task;
          detail::ensure_dir(dir.string());
          for (std::size_t i = 0; i < models.size(); ++i)
            save_model(dir / ("member" + std::to_string(i) + ".model"), models[i]);
        }
    detail::print_top(out, results, a.top);
  }
  for (const auto& f : failures) err << "failed: " << f << "\n";
  if (!failures.empty()) {
    err << failures.size() << " of " << batch.configs.size() << " configs failed\n";
    return partial_failure;
  }
  return ok;
}

inline int cmd_variance(const VarianceArgs& a, std::ostream& out, std::ostream&) {
  if (a.n < 2) throw CLI::ValidationError("--n", "must be >= 2");
  if (a.m < 1) throw CLI::ValidationError("--m", "must be >= 1");
  const MemberSpec member = parse_member_description(a.member);
  const TaskData task = load_task(std::filesystem::path(a.data) / a.task);
  detail::ensure_dir(a.out);
  VarianceOptions opt;
  opt.jobs = a.jobs;
  opt.metric = parse_metric(a.metric);
  const auto report = variance_analysis(task, member, a.n, a.m, a.seed, opt);
  write_variance_report({report}, std::filesystem::path(a.out) / "variance.csv");
  std::ostringstream manifest;
  write_manifest(manifest, report.plan);
  write_atomic(std::filesystem::path(a.out) / "variance_plan.txt", manifest.str());
  out << std::fixed << std::setprecision(4) << report.task << " " << report.model << " n=" << a.n
      << " m=" << a.m << " single " << report.single_mean << " +- " << report.single_std
      << " | ensemble " << report.ensemble_mean << " +- " << report.ensemble_std << "\n";
  return ok;
}

inline int cmd_prune(const PruneArgs& a, std::ostream& out, std::ostream&) {
  const Model model = load_model(std::filesystem::path(a.model));
  const Model pruned = prune_magnitude(model, PruneSpec{a.fraction});
  std::ostringstream os;
  save_model(os, pruned);
  write_atomic(a.out, os.str());
  out << "params=" << param_count(pruned) << " sparsity=" << std::fixed << std::setprecision(6)
      << sparsity(pruned) << "\n";
  return ok;
}

inline int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream&) {
  const ReportTable table = read_report(std::filesystem::path(a.results));
  const auto id = table.column("config_id");
  const auto avg = table.column("avg_acc");
  const auto params = table.column("total_params");
  out << std::left << std::setw(26) << "config" << std::setw(10) << "avg_acc" << std::setw(14)
      << "params" << (a.baselines.empty() ? "" : "group") << "\n";
  for (std::size_t i = 0; i < table.rows.size() && i < a.top; ++i) {
    const auto& row = table.rows[i];
    out << std::left << std::setw(26) << (row[id] + " ") << std::setw(10) << row[avg] << std::setw(14)
        << row[params];
    if (!a.baselines.empty()) {
      const auto g = equivalence_group(std::stoull(row[params]), a.baselines);
      out << (g ? std::to_string(*g) : "-");
    }
    out << "\n";
  }
  return ok;
}

/// Parses argv and dispatches. Library errors map to exit codes:
/// usage 2, validation 3, partial failure 4, I/O 5.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bagging, pruning and soft-vote ensembling toolkit", "bagging"};
  app.require_subcommand(1, 1);

  ValidateArgs va;
  auto* validate_cmd = app.add_subcommand("validate", "Check a config batch and summarize it");
  validate_cmd->add_option("--config", va.config, "Config batch (JSON)")->required();
  validate_cmd->add_option("--data", va.data, "Data directory, used for class counts");

  RunArgs ra;
  auto* run_cmd = app.add_subcommand("run", "Run every config in a batch and write results.csv");
  run_cmd->add_option("--config", ra.config, "Config batch (JSON)")->required();
  run_cmd->add_option("--data", ra.data, "Directory with one subdirectory per task")->required();
  run_cmd->add_option("--out", ra.out, "Output directory")->required();
  run_cmd->add_option("--seed", ra.seed, "Base seed for configs without one");
  run_cmd->add_option("--jobs", ra.jobs, "Concurrent training units")->check(CLI::PositiveNumber);
  run_cmd->add_option("--top", ra.top, "Rows to print");
  run_cmd->add_flag("--save-models", ra.save_models, "Write trained members under <out>/models");

  VarianceArgs vr;
  auto* var_cmd = app.add_subcommand("variance", "Double-bootstrap variance analysis");
  var_cmd->add_option("--data", vr.data, "Data directory")->required();
  var_cmd->add_option("--task", vr.task, "Task name")->required();
  var_cmd->add_option("--member", vr.member, "Member description, e.g. logreg/d4096 or mlp16/p0.1");
  var_cmd->add_option("--n", vr.n, "First-level samples");
  var_cmd->add_option("--m", vr.m, "Second-level samples per first-level sample");
  var_cmd->add_option("--seed", vr.seed, "Base seed");
  var_cmd->add_option("--out", vr.out, "Output directory")->required();
  var_cmd->add_option("--jobs", vr.jobs, "Concurrent training units")->check(CLI::PositiveNumber);
  var_cmd->add_option("--metric", vr.metric, "accuracy or macro_f1");

  PruneArgs pa;
  auto* prune_cmd = app.add_subcommand("prune", "Magnitude-prune a saved model");
  prune_cmd->add_option("--model", pa.model, "Input model file")->required();
  prune_cmd->add_option("--fraction", pa.fraction, "Fraction of parameters to zero")
      ->required()
      ->check(CLI::Range(0.0, 1.0));
  prune_cmd->add_option("--out", pa.out, "Output model file")->required();

  ReportArgs rp;
  auto* report_cmd = app.add_subcommand("report", "Print the top rows of a results table");
  report_cmd->add_option("--results", rp.results, "results.csv")->required();
  report_cmd->add_option("--top", rp.top, "Rows to print");
  report_cmd->add_option("--baselines", rp.baselines, "Baseline parameter counts for +-10% grouping")
      ->delimiter(',');

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (validate_cmd->parsed()) return cmd_validate(va, out, err);
    if (run_cmd->parsed()) return cmd_run(ra, out, err);
    if (var_cmd->parsed()) return cmd_variance(vr, out, err);
    if (prune_cmd->parsed()) return cmd_prune(pa, out, err);
    if (report_cmd->parsed()) return cmd_report(rp, out, err);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return ok;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return usage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return io;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return validation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return internal;
  }
  return usage;
}

}  // namespace bagging::cli
