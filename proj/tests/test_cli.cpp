#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "bagging/cli.hpp"
#include "test_util.hpp"

using namespace bagging;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string toy_data() { return (testutil::source_dir() / "data" / "toy").string(); }
std::string toy_batch() { return (testutil::source_dir() / "configs" / "toy_batch.json").string(); }

std::size_t count_lines(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

const char* three_configs = R"({"configs": [
  {"id": "one", "type": "single", "tasks": ["yesno"], "members": [{"model": "logreg", "dims": 256}]},
  {"id": "bag", "type": "homo", "tasks": ["yesno"],
   "members": [{"model": "logreg", "dims": 256, "bagged": true}, {"model": "logreg", "dims": 256, "bagged": true}]},
  {"id": "mix", "type": "hetero_diff_family", "tasks": ["yesno"],
   "members": [{"model": "logreg", "dims": 256}, {"model": "mlp", "dims": 256, "hidden_size": 4}]}
]})";

}  // namespace

TEST_CASE("validate accepts a well-formed batch", "[cli][validate]") {
  testutil::TempDir dir("cli-validate");
  testutil::write_file(dir / "c.json", three_configs);
  const auto r = invoke({"validate", "--config", (dir / "c.json").string()});
  CHECK(r.code == cli::ok);
  CHECK(count_lines(r.out) == 3);
  CHECK(r.out.find("one single members=1 params=514") != std::string::npos);
}

TEST_CASE("validate rejects structural violations and names the config", "[cli][validate]") {
  testutil::TempDir dir("cli-invalid");
  testutil::write_file(dir / "c.json", R"({"configs": [{"id": "lonely-pair", "type": "single", "tasks": ["t"],
      "members": [{"model": "logreg"}, {"model": "logreg"}]}]})");
  const auto r = invoke({"validate", "--config", (dir / "c.json").string()});
  CHECK(r.code == cli::validation);
  CHECK(r.err.find("lonely-pair") != std::string::npos);

  testutil::write_file(dir / "bad.json", R"({"configs": [{"id": "x", "type": "single", "tasks": ["t"], "members": [{"model": "svm"}]}]})");
  CHECK(invoke({"validate", "--config", (dir / "bad.json").string()}).code == cli::validation);
}

TEST_CASE("missing files are I/O errors naming the path", "[cli][io]") {
  const auto r = invoke({"validate", "--config", "/nonexistent/batch.json"});
  CHECK(r.code == cli::io);
  CHECK(r.err.find("/nonexistent/batch.json") != std::string::npos);
  CHECK(invoke({"report", "--results", "/nonexistent/results.csv"}).code == cli::io);
}

TEST_CASE("usage errors exit with the usage code", "[cli][usage]") {
  CHECK(invoke({}).code == cli::usage);
  CHECK(invoke({"frobnicate"}).code == cli::usage);
  CHECK(invoke({"run", "--config", "x.json"}).code == cli::usage);
  CHECK(invoke({"run", "--config", "x", "--data", "d", "--out", "o", "--jobs", "0"}).code == cli::usage);
  CHECK(invoke({"prune", "--model", "m", "--out", "o", "--fraction", "1.5"}).code == cli::usage);
  CHECK(invoke({"--help"}).code == cli::ok);
}

TEST_CASE("run on the toy batch is complete and reproducible", "[cli][run]") {
  testutil::TempDir dir("cli-run");
  const auto a = invoke({"run", "--config", toy_batch(), "--data", toy_data(), "--out", (dir / "a").string(),
                      "--seed", "9", "--top", "3"});
  REQUIRE(a.code == cli::ok);
  const auto b = invoke({"run", "--config", toy_batch(), "--data", toy_data(), "--out", (dir / "b").string(),
                      "--seed", "9", "--jobs", "4"});
  REQUIRE(b.code == cli::ok);
  const std::string csv = testutil::read_file(dir / "a" / "results.csv");
  CHECK(csv == testutil::read_file(dir / "b" / "results.csv"));
  CHECK(testutil::read_file(dir / "a" / "manifest.txt") == testutil::read_file(dir / "b" / "manifest.txt"));
  CHECK(count_lines(csv) == 6);
  CHECK(count_lines(a.out) == 4);  // header + top 3
  CHECK(csv.rfind("config_id,yesno_acc,threeway_acc,threeway_macro_f1,pairs_acc,avg_acc", 0) == 0);
}

TEST_CASE("a config with an absent task fails alone", "[cli][run]") {
  testutil::TempDir dir("cli-partial");
  testutil::write_file(dir / "c.json", R"({"configs": [
    {"id": "ok1", "type": "single", "tasks": ["yesno"], "members": [{"model": "logreg", "dims": 256}]},
    {"id": "ghost", "type": "single", "tasks": ["yesno", "nosuch"], "members": [{"model": "logreg", "dims": 256}]},
    {"id": "ok2", "type": "single", "base_seed": 3, "tasks": ["pairs"], "members": [{"model": "logreg", "dims": 256}]}
  ]})");
  const auto r = invoke({"run", "--config", (dir / "c.json").string(), "--data", toy_data(), "--out",
                      (dir / "out").string()});
  CHECK(r.code == cli::partial_failure);
  CHECK(r.err.find("ghost") != std::string::npos);
  CHECK(r.err.find("nosuch") != std::string::npos);
  const auto table = read_report(dir / "out" / "results.csv");
  CHECK(table.rows.size() == 2);
}

TEST_CASE("variance writes one row and a plan manifest", "[cli][variance]") {
  testutil::TempDir dir("cli-variance");
  auto run = [&](std::string seed, std::string sub) {
    return invoke({"variance", "--data", toy_data(), "--task", "yesno", "--member", "logreg/d512", "--n", "4",
                "--m", "2", "--seed", seed, "--out", (dir / sub).string(), "--jobs", "2"});
  };
  REQUIRE(run("1", "a").code == cli::ok);
  REQUIRE(run("2", "b").code == cli::ok);
  const std::string csv = testutil::read_file(dir / "a" / "variance.csv");
  std::istringstream is(csv);
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  const auto cells = bagging::detail::split_csv_line(row);
  REQUIRE(cells.size() == 11);
  CHECK(cells[2] == "4");
  CHECK(cells[3] == "2");
  CHECK(std::count(cells[9].begin(), cells[9].end(), ';') == 3);
  CHECK(std::count(cells[10].begin(), cells[10].end(), ';') == 3);

  const auto plan = read_manifest(dir / "a" / "variance_plan.txt");
  CHECK(plan.n == 4);
  CHECK(plan.m == 2);
  CHECK(testutil::read_file(dir / "a" / "variance_plan.txt") != testutil::read_file(dir / "b" / "variance_plan.txt"));

  const auto bad = invoke({"variance", "--data", toy_data(), "--task", "yesno", "--n", "1", "--out",
                        (dir / "c").string()});
  CHECK(bad.code == cli::usage);
  CHECK_FALSE(fs::exists(dir / "c"));
}

TEST_CASE("saved models can be pruned and results reported", "[cli][prune][report]") {
  testutil::TempDir dir("cli-prune");
  testutil::write_file(dir / "c.json", three_configs);
  const auto r = invoke({"run", "--config", (dir / "c.json").string(), "--data", toy_data(), "--out",
                      (dir / "out").string(), "--save-models"});
  REQUIRE(r.code == cli::ok);
  const auto model = dir / "out" / "models" / "bag" / "yesno" / "member1.model";
  REQUIRE(fs::exists(model));

  const auto p = invoke({"prune", "--model", model.string(), "--fraction", "0.5", "--out",
                      (dir / "pruned.model").string()});
  REQUIRE(p.code == cli::ok);
  CHECK(p.out.find("params=514 sparsity=0.500000") != std::string::npos);
  CHECK(sparsity(load_model(dir / "pruned.model")) == Catch::Approx(257.0 / 514.0));

  testutil::write_file(dir / "broken.model", "bagging-model 1\ngarbage\n");
  CHECK(invoke({"prune", "--model", (dir / "broken.model").string(), "--fraction", "0.1", "--out",
             (dir / "x.model").string()})
            .code == cli::validation);

  const auto rep = invoke({"report", "--results", (dir / "out" / "results.csv").string(), "--top", "2",
                        "--baselines", "514,1028"});
  REQUIRE(rep.code == cli::ok);
  CHECK(count_lines(rep.out) == 3);
  CHECK(rep.out.find("group") != std::string::npos);
}
