#include <CLI11.hpp>

#include <iostream>

#include "memiml/cli/runs.hpp"

using namespace memiml::cli;

namespace {

// Flags shared by every subcommand that builds an experiment. Values are
// applied in order: defaults, then the base (a checkpoint for eval), then
// --config, then --set, then the dedicated flags.
struct CommonFlags {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed, steps, neighbors;
  std::optional<double> beta, store_ratio;
  std::optional<std::string> ablation, second_order, out, name, method;
  bool dump_memory = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "override one config key, e.g. --set meta.inner_lr=0.1 (repeatable)");
    app->add_option("--seed", seed, "run.seed");
    app->add_option("--steps", steps, "run.steps (outer steps)");
    app->add_option("--method", method, "meta.method")->check(CLI::IsMember({"memiml", "maml", "finetune"}));
    app->add_option("--ablation", ablation, "meta.ablation")
        ->check(CLI::IsMember({"none", "no-similarity-search", "no-value-predictor", "no-local-adaptation"}));
    app->add_option("--beta", beta, "meta.beta");
    app->add_option("--store-ratio", store_ratio, "memory.store_ratio");
    app->add_option("--neighbors", neighbors, "memory.neighbors");
    app->add_option("--second-order", second_order, "meta.second_order")->check(CLI::IsMember({"on", "off"}));
    app->add_option("--out", out, "output root (default $MEMIML_OUT_DIR or ./runs)");
    app->add_option("--name", name, "run.name (subdirectory of the output root)");
    app->add_flag("--dump-memory", dump_memory, "write the test-task memories as JSONL");
  }

  void apply(ExperimentConfig& cfg) const {
    if (!config_file.empty()) apply_file(cfg, config_file);
    for (const auto& s : sets) apply_assignment(cfg, s);
    auto put = [&](const char* key, const auto& value) {
      if (value) set_key(cfg, key, to_text(*value));
    };
    put("run.seed", seed);
    put("run.steps", steps);
    put("meta.method", method);
    put("meta.ablation", ablation);
    put("meta.beta", beta);
    put("memory.store_ratio", store_ratio);
    put("memory.neighbors", neighbors);
    put("meta.second_order", second_order);
    put("run.out", out);
    put("run.name", name);
    if (dump_memory) cfg.dump_memory = true;
  }

  static std::string to_text(const std::string& s) { return s; }
  static std::string to_text(double v) {
    std::ostringstream o;
    o.precision(17);
    o << v;
    return o.str();
  }
  static std::string to_text(std::uint64_t v) { return std::to_string(v); }
};

std::vector<double> parse_doubles(const std::string& list) {
  std::vector<double> out;
  std::stringstream in(list);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw ConfigError("'" + item + "' is not a number");
    out.push_back(v);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory-imitation meta-learning experiments"};
  app.require_subcommand(1);

  CommonFlags train_flags, eval_flags, sweep_flags;
  auto* train = app.add_subcommand("train", "meta-train, then evaluate on the test tasks");
  train_flags.attach(train);
  bool print_config = false;
  train->add_flag("--print-config", print_config, "print the resolved config and exit");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test tasks");
  eval_flags.attach(eval);
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint, "checkpoint written by train")->required()->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "train + eval for each value of one setting");
  sweep_flags.attach(sweep);
  std::string axis_name, values_text, seeds_text;
  sweep->add_option("--axis", axis_name, "store_ratio, n_neighbors or beta")->required();
  sweep->add_option("--values", values_text, "comma-separated values (default: the standard rows for the axis)");
  sweep->add_option("--seeds", seeds_text, "comma-separated seeds (default: run.seed)");

  auto* diagnose = app.add_subcommand("diagnose", "smoothed pre/post gap report for metrics CSVs");
  std::vector<std::string> csvs, labels;
  std::string diag_out = ".";
  diagnose->add_option("csv", csvs, "metrics.csv files")->required()->check(CLI::ExistingFile);
  diagnose->add_option("--label", labels, "one label per CSV (default: the CSV's directory)");
  diagnose->add_option("--out", diag_out, "directory for gap_summary.csv, gap_curves.csv and gaps.svg");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      ExperimentConfig cfg;
      train_flags.apply(cfg);
      validate(cfg);
      if (print_config) {
        std::cout << echo(cfg);
        return 0;
      }
      const auto out = run_train(cfg, std::cout);
      std::cout << "wrote " << out.dir.string() << '\n';
    } else if (*eval) {
      ExperimentConfig cfg = config_from_checkpoint(checkpoint);
      eval_flags.apply(cfg);
      const auto out = run_eval(cfg, checkpoint, std::cout);
      std::cout << "wrote " << (out.dir / "eval.csv").string() << '\n';
    } else if (*sweep) {
      ExperimentConfig cfg;
      sweep_flags.apply(cfg);
      const auto axis = parse_sweep_axis(axis_name);
      const auto values = values_text.empty() ? default_sweep_values(axis) : parse_doubles(values_text);
      std::vector<std::uint64_t> seeds;
      if (seeds_text.empty()) {
        seeds.push_back(cfg.meta.seed);
      } else {
        for (double s : parse_doubles(seeds_text)) {
          if (s < 0 || s != static_cast<double>(static_cast<std::uint64_t>(s))) throw ConfigError("bad seed");
          seeds.push_back(static_cast<std::uint64_t>(s));
        }
      }
      const auto out = run_sweep(cfg, axis, values, seeds, std::cout);
      std::cout << "wrote " << out.table.string() << '\n';
      if (!out.all_ok) {
        std::cerr << "some sweep cells failed; see " << out.cells_table.string() << '\n';
        return 1;
      }
    } else if (*diagnose) {
      std::vector<std::filesystem::path> paths(csvs.begin(), csvs.end());
      const auto out = run_diagnose(paths, labels, diag_out, std::cout);
      std::cout << "wrote " << out.summary.string() << ", " << out.plot.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
