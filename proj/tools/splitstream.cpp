// Experiment driver: run a config, compare reports, generate synthetic data.
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "splitstream/errors.hpp"
#include "splitstream/harness.hpp"
#include "splitstream/synthetic.hpp"

namespace fs = std::filesystem;
using namespace splitstream;

namespace {

int run(const fs::path& config_path) {
  const ExperimentConfig config = load_config(config_path);
  const ExperimentResult result = run_experiment(config);
  std::cout << "output: " << result.output_dir.string() << '\n';
  for (const auto& [key, value] : result.report.final) {
    std::cout << key << ": " << format_number(value) << '\n';
  }
  return 0;
}

int generate(const std::string& task, std::size_t n, std::uint64_t seed, const fs::path& out) {
  if (task == "cls") {
    write_image_dataset(out, synthetic_images(n, seed));
  } else {
    fs::create_directories(out);
    write_tabular_csv(out / "cholesterol.csv", synthetic_cholesterol(n, seed));
  }
  std::cout << "wrote " << n << " samples to " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"splitstream experiment harness"};
  app.require_subcommand(1);

  fs::path config_path;
  auto* run_cmd = app.add_subcommand("run", "run one experiment");
  run_cmd->add_option("--config", config_path, "experiment config (JSON)")->required()->check(CLI::ExistingFile);

  std::vector<fs::path> reports;
  fs::path compare_out = ".";
  auto* compare_cmd = app.add_subcommand("compare", "tabulate two or more metrics reports");
  compare_cmd->add_option("reports", reports, "metrics.json files or run directories")->required();
  compare_cmd->add_option("--out", compare_out, "directory for comparison.csv and curves.csv");

  std::string task;
  std::size_t n = 0;
  std::uint64_t seed = 1;
  fs::path gen_out;
  auto* gen_cmd = app.add_subcommand("gen-data", "write a synthetic data set");
  gen_cmd->add_option("--task", task)->required()->check(CLI::IsMember({"cls", "reg"}));
  gen_cmd->add_option("--n", n, "sample count (default: 600 cls, 2000 reg)");
  gen_cmd->add_option("--seed", seed);
  gen_cmd->add_option("--out", gen_out)->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run_cmd) return run(config_path);
    if (*compare_cmd) {
      compare_reports(reports, compare_out);
      std::cout << "wrote " << (compare_out / "comparison.csv").string() << " and curves.csv\n";
      return 0;
    }
    if (n == 0) n = task == "cls" ? kSyntheticClassificationSize : kSyntheticRegressionSize;
    return generate(task, n, seed, gen_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
