#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "mcal/harness.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::string format = "csv";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path,
                  "Experiment config JSON (default: built-in synthetic)");
  cmd->add_option("--out", opts.out_dir,
                  "Output directory (default: config output_dir)");
  cmd->add_option("--format", opts.format, "Report format (csv)");
  cmd->add_option("--seed", opts.seed, "Override the config seed")
      ->each([&opts](const std::string&) { opts.seed_set = true; });
}

mcal::ExperimentConfig make_config(const CommonOptions& opts) {
  mcal::ExperimentConfig cfg = opts.config_path.empty()
                                   ? mcal::default_synthetic_config()
                                   : mcal::load_config(opts.config_path);
  if (opts.seed_set) cfg.seed = opts.seed;
  if (opts.format != "csv") {
    throw mcal::ConfigError("unsupported --format '" + opts.format +
                            "' (only 'csv')");
  }
  return cfg;
}

std::string out_dir(const CommonOptions& opts,
                    const mcal::ExperimentConfig& cfg) {
  return opts.out_dir.empty() ? cfg.output_dir : opts.out_dir;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Missingness-bias calibration toolkit"};
  app.require_subcommand(1);

  struct Command {
    const char* name;
    const char* help;
    const char* artifact;
  };
  const Command commands[] = {
      {"gen-data", "Generate the synthetic dataset as CSV", "dataset.csv"},
      {"train-model", "Train the base classifier", "model.json"},
      {"fit-calibrator", "Fit a calibrator or rate ensemble",
       "calibrator.json"},
      {"evaluate", "Bias and accuracy across the ablation grid", "eval.csv"},
      {"explain", "Per-feature attributions for test inputs",
       "attributions.csv"},
      {"bench", "Full baseline comparison benchmark", "report.csv"},
      {"simplex-demo", "Probability-simplex point cloud (3 classes)",
       "simplex.csv"},
      {"sweep", "Calibration-set-size sweep", "sweep.csv"},
  };

  CommonOptions opts[std::size(commands)];
  CLI::App* subs[std::size(commands)];
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    subs[i] = app.add_subcommand(commands[i].name, commands[i].help);
    add_common(subs[i], opts[i]);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    for (std::size_t i = 0; i < std::size(commands); ++i) {
      if (!subs[i]->parsed()) continue;
      const mcal::ExperimentConfig cfg = make_config(opts[i]);
      const std::string dir = out_dir(opts[i], cfg);
      const std::string name = commands[i].name;
      if (name == "gen-data") {
        mcal::run_gen_data(cfg, dir);
      } else if (name == "train-model") {
        mcal::run_train_model(cfg, dir);
      } else if (name == "fit-calibrator") {
        mcal::run_fit_calibrator(cfg, dir);
      } else if (name == "evaluate") {
        mcal::run_evaluate(cfg, dir);
      } else if (name == "explain") {
        mcal::run_explain(cfg, dir);
      } else if (name == "bench") {
        mcal::run_benchmark(cfg, dir);
      } else if (name == "simplex-demo") {
        mcal::run_simplex_demo(cfg, dir);
      } else {
        mcal::run_training_sweep(cfg, dir);
      }
      std::printf("wrote %s/%s\n", dir.empty() ? "." : dir.c_str(),
                  commands[i].artifact);
    }
  } catch (const mcal::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
  return 0;
}
