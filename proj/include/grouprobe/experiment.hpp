#pragma once

#include <filesystem>
#include <optional>

#include "grouprobe/bounds.hpp"
#include "grouprobe/groups.hpp"
#include "grouprobe/retrain.hpp"

namespace grouprobe {

struct SynthSpec {
  int n_per_class = 0;
  int d = 0;
  double mean_offset = 0.0;
  std::uint64_t seed = 0;
};

struct DatasetSpec {
  std::string path;    // mutually exclusive with synth
  std::string format;  // "dense_csv" (default) or "sparse"
  std::optional<SynthSpec> synth;

  Dataset load() const;
};

struct TestPointSelection {
  int random_k = 3;
  int highest_loss_k = 3;
  std::uint64_t seed = 0;
};

struct EvalSpec {
  std::vector<EvalFunction::Kind> kinds;
  TestPointSelection selection;
};

struct GroupsSpec {
  std::vector<GroupMethod> methods = all_group_methods();
  std::vector<double> size_grid;  // empty -> default 100-size grid
  std::uint64_t seed = 0;
};

struct ActualSpec {
  bool enabled = true;
  int parallelism = 1;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  std::optional<DatasetSpec> test_dataset;
  LossKind loss = LossKind::LogisticMargin;
  std::optional<double> lambda;
  std::optional<double> lambda_over_n;
  bool intercept = false;
  EvalSpec eval;
  GroupsSpec groups;
  ActualSpec actual;
  std::vector<double> sweep_grid;  // lambda/n values for the sweep command
  bool emit_spectra = false;       // per-subset error-matrix spectra JSON
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

double resolve_lambda(const ExperimentConfig& config, int n);

// All commands write into out_dir and return a process exit code
// (0 ok; 1 when a check fails; config/data/convergence errors throw).
int run_train(const ExperimentConfig& config, const std::string& out_dir,
              std::uint64_t seed, int jobs);
int run_groups_cmd(const ExperimentConfig& config, const std::string& out_dir,
                   std::uint64_t seed, int jobs);
int run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                   std::uint64_t seed, int jobs);
int run_sweep(const ExperimentConfig& config, const std::string& out_dir,
              std::uint64_t seed, int jobs);
int run_counterexample(const std::string& kind, std::uint64_t seed,
                       const std::string& out_dir);
int run_report(const std::string& effects_csv, const std::string& out_dir);

}  // namespace grouprobe
