#include <gencs/cli.hpp>

#include <gencs/config.hpp>
#include <gencs/pipeline.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <string>

namespace gencs {

int cli_main(int argc, char** argv) {
  CLI::App app{"generative compressed sensing experiment pipeline"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir;
  std::string dataset_dir;
  long long seed = 0;
  std::string stage_only;

  app.add_option("--config", config_path, "experiment configuration file (structured text)");
  app.add_option("--out", out_dir, "output directory (overrides config and GENCS_OUT)");
  CLI::Option* seed_opt = app.add_option("--seed", seed, "master seed (overrides config)");
  app.add_option("--dataset", dataset_dir,
                 "directory holding previously generated dataset files");
  app.add_option("--stage-only", stage_only,
                 "run a single stage; its prerequisites must already be on disk");

  for (const std::string& name : Pipeline::stage_names())
    app.add_subcommand(name, "run the " + name + " stage, computing prerequisites as needed");
  app.add_subcommand("all", "run every stage in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::string stage;
  const auto subcommands = app.get_subcommands();
  if (!subcommands.empty()) stage = subcommands.front()->get_name();
  bool strict = false;
  if (!stage_only.empty()) {
    if (!stage.empty()) {
      std::cerr << "choose either a stage subcommand or --stage-only, not both\n";
      return 2;
    }
    const auto& names = Pipeline::stage_names();
    if (std::find(names.begin(), names.end(), stage_only) == names.end()) {
      std::cerr << "unknown stage `" << stage_only << "`\n";
      return 2;
    }
    stage = stage_only;
    strict = true;
  }
  if (stage.empty()) {
    std::cerr << app.help();
    return 2;
  }

  ExperimentConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_experiment_config(config_path);
    if (out_dir.empty()) {
      if (const char* env = std::getenv("GENCS_OUT"); env != nullptr && *env != '\0')
        cfg.out_dir = env;
    } else {
      cfg.out_dir = out_dir;
    }
    if (seed_opt->count() > 0) {
      if (seed < 0) throw FormatError("--seed must be non-negative");
      cfg.seed = static_cast<std::uint64_t>(seed);
    }
    cfg.validate();
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  try {
    Pipeline pipeline(cfg);
    pipeline.set_strict_prerequisites(strict);
    if (!dataset_dir.empty()) pipeline.set_dataset_dir(dataset_dir);
    if (stage == "all") {
      pipeline.run_all();
    } else {
      pipeline.run_stage(stage);
    }
  } catch (const StageError& e) {
    std::cerr << "stage failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace gencs
