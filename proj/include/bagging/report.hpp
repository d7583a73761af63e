#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "bagging/error.hpp"
#include "bagging/experiment.hpp"

namespace bagging {

/// Writes via a sibling temp file and rename, so readers never observe a
/// partially written file.
inline void write_atomic(const std::filesystem::path& path, std::string_view content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + path.string());
    os.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!os) throw IoError("error writing " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot write " + path.string());
  }
}

namespace detail {

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string fixed6(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(6) << v;
  return s.str();
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  return out;
}

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace detail

// Highest average accuracy first; equal averages by config_id.
inline std::vector<ConfigResult> sorted_results(std::vector<ConfigResult> results) {
  std::stable_sort(results.begin(), results.end(), [](const ConfigResult& a, const ConfigResult& b) {
    if (a.avg_accuracy != b.avg_accuracy) return a.avg_accuracy > b.avg_accuracy;
    return a.config_id < b.config_id;
  });
  return results;
}

/// Results table. Columns: config_id, then per task (in first-seen order)
/// <task>_acc and, for macro-F1 tasks, <task>_macro_f1, then avg_acc,
/// experiment_type, models, total_params. Rows sorted by sorted_results.
/// Cells for tasks a config did not run are left empty.
inline std::string format_report(const std::vector<ConfigResult>& results) {
  if (results.empty()) throw ValidationError("write_report: no results");
  std::vector<std::string> tasks;
  std::map<std::string, bool> has_f1;
  for (const auto& r : results)
    for (const auto& t : r.tasks) {
      if (!has_f1.count(t.task)) tasks.push_back(t.task);
      has_f1[t.task] = has_f1[t.task] || t.macro_f1.has_value();
    }

  std::ostringstream os;
  os << "config_id";
  for (const auto& t : tasks) {
    os << ',' << detail::csv_field(t + "_acc");
    if (has_f1[t]) os << ',' << detail::csv_field(t + "_macro_f1");
  }
  os << ",avg_acc,experiment_type,models,total_params\n";

  for (const auto& r : sorted_results(results)) {
    os << detail::csv_field(r.config_id);
    for (const auto& t : tasks) {
      const TaskScore* s = nullptr;
      for (const auto& ts : r.tasks)
        if (ts.task == t) s = &ts;
      os << ',' << (s ? detail::fixed6(s->accuracy) : "");
      if (has_f1[t]) os << ',' << (s && s->macro_f1 ? detail::fixed6(*s->macro_f1) : "");
    }
    os << ',' << detail::fixed6(r.avg_accuracy) << ',' << detail::csv_field(type_label(r.type)) << ','
       << detail::csv_field(detail::join(r.models, ", ")) << ',' << r.total_params << '\n';
  }
  return os.str();
}

inline void write_report(const std::vector<ConfigResult>& results, const std::filesystem::path& path) {
  write_atomic(path, format_report(results));
}

// Parsed results CSV, kept as text cells keyed by header.
struct ReportTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ValidationError("results table has no column '" + std::string(name) + "'");
  }
};

inline ReportTable read_report(std::istream& is, const std::string& source = "results") {
  ReportTable t;
  std::string line;
  if (!std::getline(is, line)) throw ValidationError(source + ": empty file");
  t.header = detail::split_csv_line(line);
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto row = detail::split_csv_line(line);
    if (row.size() != t.header.size())
      throw ValidationError(source + ":" + std::to_string(line_no) + ": expected " +
                            std::to_string(t.header.size()) + " cells, got " +
                            std::to_string(row.size()));
    t.rows.push_back(std::move(row));
  }
  t.column("config_id");
  t.column("avg_acc");
  t.column("total_params");
  return t;
}

inline ReportTable read_report(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open results file: " + path.string());
  return read_report(is, path.string());
}

/// One row per report. singles / ensembles hold the n raw values joined
/// with ';'.
inline std::string format_variance_report(const std::vector<VarianceReport>& reports) {
  std::ostringstream os;
  os << "task,model,n,m,metric,single_mean,single_std,ensemble_mean,ensemble_std,singles,ensembles\n";
  auto values = [](const std::vector<double>& v) {
    std::vector<std::string> parts;
    for (double x : v) parts.push_back(detail::fixed6(x));
    return detail::join(parts, ";");
  };
  for (const auto& r : reports)
    os << detail::csv_field(r.task) << ',' << detail::csv_field(r.model) << ',' << r.n << ',' << r.m
       << ',' << to_string(r.metric) << ',' << detail::fixed6(r.single_mean) << ','
       << detail::fixed6(r.single_std) << ',' << detail::fixed6(r.ensemble_mean) << ','
       << detail::fixed6(r.ensemble_std) << ',' << values(r.singles) << ',' << values(r.ensembles)
       << '\n';
  return os.str();
}

inline void write_variance_report(const std::vector<VarianceReport>& reports,
                                  const std::filesystem::path& path) {
  write_atomic(path, format_variance_report(reports));
}

/// Seeds for every trained member of a batch run, one line each:
///   member <config_id> <task> <index> <description> <sample_seed> <init_seed>
/// sample_seed is 0 for members trained on the full training set.
inline std::string format_run_manifest(const std::vector<ConfigResult>& results) {
  std::ostringstream os;
  os << "run-manifest 1\n";
  for (const auto& r : results) {
    os << "config " << r.config_id << " base_seed " << r.base_seed << "\n";
    for (const auto& m : r.members)
      os << "member " << r.config_id << ' ' << m.task << ' ' << m.member << ' ' << m.description
         << ' ' << m.sample_seed << ' ' << m.init_seed << "\n";
  }
  return os.str();
}

}  // namespace bagging
