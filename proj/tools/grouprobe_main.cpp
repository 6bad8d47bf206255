#include <CLI11.hpp>
#include <cstdio>
#include <string>

#include "grouprobe/experiment.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitConvergence = 4;

int dispatch(const std::string& command, const std::string& config_path,
             const std::string& kind, const std::string& effects_path,
             std::uint64_t seed, int jobs, const std::string& out_dir) {
  using namespace grouprobe;
  if (command == "counterexample") {
    return run_counterexample(kind, seed, out_dir);
  }
  if (command == "report") {
    return run_report(effects_path, out_dir);
  }
  const ExperimentConfig config = load_config(config_path);
  if (command == "train") return run_train(config, out_dir, seed, jobs);
  if (command == "groups") return run_groups_cmd(config, out_dir, seed, jobs);
  if (command == "effects") return run_experiment(config, out_dir, seed, jobs);
  if (command == "sweep") return run_sweep(config, out_dir, seed, jobs);
  throw ConfigError("unknown command '" + command + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Influence, one-step Newton, and exact retraining effects of "
               "removing groups of training points from L2-regularized linear models"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "grouprobe_out";
  std::string kind;
  std::string effects_path;
  std::uint64_t seed = 0;
  int jobs = 0;  // 0: use the config's parallelism

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config) {
      cmd->add_option("--config", config_path, "JSON experiment config")->required();
    }
    cmd->add_option("--seed", seed, "run seed folded into every random stream");
    cmd->add_option("--jobs", jobs, "worker threads for retraining batches");
    cmd->add_option("--out", out_dir, "output directory");
  };

  add_common(app.add_subcommand("train", "fit the model and write a checkpoint"), true);
  add_common(app.add_subcommand("groups", "construct and serialize subset groups"), true);
  add_common(app.add_subcommand("effects",
                                "full run: influence, Newton, parameter-space and "
                                "actual effects plus bound checks"),
             true);
  add_common(app.add_subcommand("sweep", "regularization sweep over lambda/n"), true);

  CLI::App* cex = app.add_subcommand("counterexample", "generate a mog or ortho construction");
  cex->add_option("kind", kind, "mog | ortho")->required();
  add_common(cex, false);

  CLI::App* rep = app.add_subcommand("report", "summarize an effects CSV");
  rep->add_option("csv", effects_path, "effects CSV path")->required();
  add_common(rep, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    return dispatch(app.get_subcommands().front()->get_name(), config_path, kind,
                    effects_path, seed, jobs, out_dir);
  } catch (const grouprobe::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const grouprobe::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const grouprobe::ConvergenceError& e) {
    std::fprintf(stderr, "convergence error: %s\n", e.what());
    return kExitConvergence;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
}
