// Writes the bundled toy tasks: three small synthetic text-classification
// tasks shaped like yes/no QA, 3-way commitment and sentence-pair entailment.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bagging/synthetic.hpp"

namespace fs = std::filesystem;
using bagging::Dataset;
using bagging::SyntheticSpec;

namespace {

void write_jsonl(const fs::path& path, const Dataset& data, const std::vector<std::string>& labels) {
  std::ofstream os(path);
  for (const auto& ex : data.examples()) {
    nlohmann::json rec{{"id", ex.id}, {"text_a", ex.text_a}, {"label", labels[static_cast<std::size_t>(ex.label)]}};
    if (ex.text_b) rec["text_b"] = *ex.text_b;
    os << rec.dump() << "\n";
  }
}

void write_task(const fs::path& root, const std::string& name, SyntheticSpec spec,
                const std::vector<std::string>& labels, const std::string& metric,
                std::size_t train_size, std::size_t val_size) {
  const fs::path dir = root / name;
  fs::create_directories(dir);
  spec.name = name + "-train";
  spec.size = train_size;
  write_jsonl(dir / "train.jsonl", bagging::make_synthetic(spec), labels);
  spec.name = name + "-val";
  spec.size = val_size;
  spec.seed += 1000;
  write_jsonl(dir / "val.jsonl", bagging::make_synthetic(spec), labels);
  nlohmann::json meta{{"labels", labels}, {"metric", metric}, {"split_seed", 7}};
  std::ofstream(dir / "task.json") << meta.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? argv[1] : "data/toy";

  SyntheticSpec yesno;
  yesno.num_classes = 2;
  yesno.cue_rate = 0.15;
  yesno.label_noise = 0.15;
  yesno.seed = 11;
  write_task(root, "yesno", yesno, {"false", "true"}, "accuracy", 400, 200);

  SyntheticSpec threeway;
  threeway.num_classes = 3;
  threeway.cue_rate = 0.2;
  threeway.label_noise = 0.1;
  threeway.seed = 22;
  write_task(root, "threeway", threeway, {"contradiction", "entailment", "neutral"}, "macro_f1", 150, 100);

  SyntheticSpec pairs;
  pairs.num_classes = 2;
  pairs.cue_rate = 0.1;
  pairs.label_noise = 0.2;
  pairs.pairs = true;
  pairs.seed = 33;
  write_task(root, "pairs", pairs, {"entailment", "not_entailment"}, "accuracy", 300, 160);

  std::cout << "wrote toy tasks under " << root << "\n";
  return 0;
}
