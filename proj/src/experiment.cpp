#include "grouprobe/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <json.hpp>

#include "grouprobe/counterexamples.hpp"
#include "grouprobe/rng.hpp"
#include "grouprobe/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace grouprobe {

namespace {

json opt_json(const std::optional<double>& v) {
  return v.has_value() ? json(*v) : json(nullptr);
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  out << text;
}

void require_keys(const json& j, const std::string& where,
                  const std::set<std::string>& allowed) {
  for (const auto& item : j.items()) {
    if (allowed.count(item.key()) == 0) {
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

DatasetSpec parse_dataset_spec(const json& j, const std::string& where) {
  require_keys(j, where, {"path", "format", "synth"});
  DatasetSpec spec;
  if (j.contains("synth")) {
    if (j.contains("path")) {
      throw ConfigError(where + ": path and synth are mutually exclusive");
    }
    const json& s = j["synth"];
    require_keys(s, where + ".synth", {"n_per_class", "d", "mean_offset", "seed"});
    SynthSpec synth;
    synth.n_per_class = s.at("n_per_class").get<int>();
    synth.d = s.at("d").get<int>();
    synth.mean_offset = s.at("mean_offset").get<double>();
    synth.seed = s.value("seed", 0ULL);
    spec.synth = synth;
  } else if (j.contains("path")) {
    spec.path = j["path"].get<std::string>();
    spec.format = j.value("format", std::string("dense_csv"));
    if (spec.format != "dense_csv" && spec.format != "sparse") {
      throw ConfigError(where + ": format must be dense_csv or sparse");
    }
  } else {
    throw ConfigError(where + ": needs either path or synth");
  }
  return spec;
}

}  // namespace

Dataset DatasetSpec::load() const {
  if (synth.has_value()) {
    return synth_gaussian_binary(synth->n_per_class, synth->d, synth->mean_offset,
                                 synth->seed);
  }
  return format == "sparse" ? load_sparse(path) : load_dense_csv(path);
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  require_keys(j, "config",
               {"dataset", "test_dataset", "loss_kind", "lambda", "lambda_over_n",
                "intercept", "eval", "groups", "actual", "sweep", "diagnostics"});

  ExperimentConfig config;
  if (!j.contains("dataset")) throw ConfigError("config needs a dataset");
  config.dataset = parse_dataset_spec(j["dataset"], "dataset");
  if (j.contains("test_dataset")) {
    config.test_dataset = parse_dataset_spec(j["test_dataset"], "test_dataset");
  }
  config.loss = loss_kind_from_name(j.value("loss_kind", std::string("logistic")));
  if (j.contains("lambda")) config.lambda = j["lambda"].get<double>();
  if (j.contains("lambda_over_n")) config.lambda_over_n = j["lambda_over_n"].get<double>();
  if (config.lambda.has_value() == config.lambda_over_n.has_value()) {
    throw ConfigError("exactly one of lambda / lambda_over_n is required");
  }
  config.intercept = j.value("intercept", false);

  if (j.contains("eval")) {
    const json& e = j["eval"];
    require_keys(e, "eval", {"kinds", "test_point_selection"});
    if (e.contains("kinds")) {
      for (const auto& k : e["kinds"]) {
        config.eval.kinds.push_back(EvalFunction::kind_from_name(k.get<std::string>()));
      }
    }
    if (e.contains("test_point_selection")) {
      const json& s = e["test_point_selection"];
      require_keys(s, "eval.test_point_selection", {"random_k", "highest_loss_k", "seed"});
      config.eval.selection.random_k = s.value("random_k", 3);
      config.eval.selection.highest_loss_k = s.value("highest_loss_k", 3);
      config.eval.selection.seed = s.value("seed", 0ULL);
    }
  }
  if (config.eval.kinds.empty()) {
    config.eval.kinds = {EvalFunction::Kind::TestPrediction, EvalFunction::Kind::TestLoss,
                         EvalFunction::Kind::SelfLoss};
  }

  if (j.contains("groups")) {
    const json& g = j["groups"];
    require_keys(g, "groups", {"methods", "size_grid", "seed"});
    if (g.contains("methods")) {
      config.groups.methods.clear();
      for (const auto& m : g["methods"]) {
        config.groups.methods.push_back(group_method_from_name(m.get<std::string>()));
      }
    }
    if (g.contains("size_grid")) {
      config.groups.size_grid = g["size_grid"].get<std::vector<double>>();
    }
    config.groups.seed = g.value("seed", 0ULL);
  }

  if (j.contains("actual")) {
    const json& a = j["actual"];
    require_keys(a, "actual", {"enabled", "parallelism"});
    config.actual.enabled = a.value("enabled", true);
    config.actual.parallelism = a.value("parallelism", 1);
  }

  if (j.contains("sweep")) {
    const json& s = j["sweep"];
    require_keys(s, "sweep", {"lambda_over_n_grid"});
    if (s.contains("lambda_over_n_grid")) {
      config.sweep_grid = s["lambda_over_n_grid"].get<std::vector<double>>();
    }
  }

  if (j.contains("diagnostics")) {
    const json& d = j["diagnostics"];
    require_keys(d, "diagnostics", {"d_spectrum"});
    config.emit_spectra = d.value("d_spectrum", false);
  }
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

double resolve_lambda(const ExperimentConfig& config, int n) {
  const double lambda =
      config.lambda.has_value() ? *config.lambda : *config.lambda_over_n * n;
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  return lambda;
}

namespace {

struct SelectedTestPoint {
  TestPoint point;
  int index = -1;
  double loss = 0.0;
  std::string selection;  // "highest_loss" or "random"
};

bool needs_test_points(const ExperimentConfig& config, bool for_effects) {
  const bool eval_needs =
      for_effects &&
      std::any_of(config.eval.kinds.begin(), config.eval.kinds.end(),
                  [](EvalFunction::Kind k) { return k != EvalFunction::Kind::SelfLoss; });
  const bool tails = std::any_of(
      config.groups.methods.begin(), config.groups.methods.end(), [](GroupMethod m) {
        return m == GroupMethod::PosInfluenceTail || m == GroupMethod::NegInfluenceTail;
      });
  return eval_needs || tails;
}

Dataset load_test_dataset(const ExperimentConfig& config) {
  if (config.test_dataset.has_value()) return config.test_dataset->load();
  if (config.dataset.synth.has_value()) {
    // Derived held-out sample: same generator, shifted seed, capped size.
    SynthSpec spec = *config.dataset.synth;
    spec.seed += 1;
    spec.n_per_class = std::min(spec.n_per_class, 250);
    return synth_gaussian_binary(spec.n_per_class, spec.d, spec.mean_offset, spec.seed);
  }
  throw ConfigError("a test_dataset is required for test-point evaluation");
}

// Highest-loss points first (the paper's debugging-oriented pick), then
// random draws among the rest.
std::vector<SelectedTestPoint> select_test_points(const TrainedModel& model,
                                                  const Dataset& test_data,
                                                  const TestPointSelection& selection,
                                                  std::uint64_t run_seed) {
  const int n = test_data.n();
  std::vector<double> losses(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    losses[static_cast<std::size_t>(i)] = point_loss_at(model, test_data, i, model.theta);
  }
  std::vector<int> by_loss(static_cast<std::size_t>(n));
  std::iota(by_loss.begin(), by_loss.end(), 0);
  std::sort(by_loss.begin(), by_loss.end(), [&losses](int a, int b) {
    if (losses[static_cast<std::size_t>(a)] != losses[static_cast<std::size_t>(b)]) {
      return losses[static_cast<std::size_t>(a)] > losses[static_cast<std::size_t>(b)];
    }
    return a < b;
  });

  std::vector<SelectedTestPoint> selected;
  std::set<int> used;
  const int k_high = std::min(selection.highest_loss_k, n);
  for (int r = 0; r < k_high; ++r) {
    const int idx = by_loss[static_cast<std::size_t>(r)];
    SelectedTestPoint tp;
    tp.point.x = test_data.features.row(idx).transpose();
    tp.point.label = test_data.labels[static_cast<std::size_t>(idx)];
    tp.index = idx;
    tp.loss = losses[static_cast<std::size_t>(idx)];
    tp.selection = "highest_loss";
    selected.push_back(std::move(tp));
    used.insert(idx);
  }
  Rng rng(mix_seed(selection.seed, run_seed));
  int wanted = std::min(selection.random_k, n - static_cast<int>(used.size()));
  while (wanted > 0) {
    const int idx = rng.index(n);
    if (used.count(idx) > 0) continue;
    SelectedTestPoint tp;
    tp.point.x = test_data.features.row(idx).transpose();
    tp.point.label = test_data.labels[static_cast<std::size_t>(idx)];
    tp.index = idx;
    tp.loss = losses[static_cast<std::size_t>(idx)];
    tp.selection = "random";
    selected.push_back(std::move(tp));
    used.insert(idx);
    --wanted;
  }
  if (selected.empty()) throw DataError("test dataset has no usable test points");
  return selected;
}

std::vector<EvalFunction> eval_functions_for(const ExperimentConfig& config,
                                             const SelectedTestPoint* record_tp) {
  std::vector<EvalFunction> fs;
  for (EvalFunction::Kind kind : config.eval.kinds) {
    switch (kind) {
      case EvalFunction::Kind::TestPrediction:
        fs.push_back(EvalFunction::test_prediction(record_tp->point.x));
        break;
      case EvalFunction::Kind::TestLoss:
        fs.push_back(EvalFunction::test_loss(record_tp->point.x, *record_tp->point.label));
        break;
      case EvalFunction::Kind::SelfLoss:
        fs.push_back(EvalFunction::self_loss());
        break;
    }
  }
  return fs;
}

// Retrained optima carry the solver tolerance into the actual effect, so the
// bound comparison gets this much numerical headroom.
double bound_check_floor(const BoundConstants& constants) {
  const double grad_tol = 1e-10 * std::max(1.0, static_cast<double>(constants.n_points));
  return 4.0 * std::max(constants.c_f, 1.0) * grad_tol /
         (constants.sigma_min + constants.lambda);
}

struct KindSummary {
  std::string eval_kind;
  int n_subsets = 0;
  std::optional<double> spearman_inf_actual;
  UnderestStats underest;
  std::vector<int> bound_violations;
  bool bound_checks_local = false;
  std::optional<double> cone_contained_frac;
  std::optional<double> min_actual;  // self-loss floor check
  bool actual_floor_violated = false;
};

ordered_json kind_summary_json(const KindSummary& s) {
  ordered_json k;
  k["eval_kind"] = s.eval_kind;
  k["n_subsets"] = s.n_subsets;
  k["spearman"] = opt_json(s.spearman_inf_actual);
  k["sign_agree_frac"] = opt_json(s.underest.sign_agree_frac);
  k["underest_frac"] = opt_json(s.underest.underest_frac);
  k["underest_frac_pos"] = opt_json(s.underest.underest_frac_pos);
  k["underest_frac_neg"] = opt_json(s.underest.underest_frac_neg);
  k["cone_contained_frac"] = opt_json(s.cone_contained_frac);
  k["bound_violations"] = s.bound_violations;
  k["bound_checks_local"] = s.bound_checks_local;
  if (s.min_actual.has_value()) {
    k["min_actual"] = *s.min_actual;
    k["actual_floor_violated"] = s.actual_floor_violated;
  }
  return k;
}

std::optional<double> spearman_of_records(const std::vector<EffectRecord>& records,
                                          const std::string& kind) {
  std::vector<double> infs, acts;
  for (const EffectRecord& r : records) {
    if (r.eval_kind != kind || !r.influence || !r.actual) continue;
    infs.push_back(*r.influence);
    acts.push_back(*r.actual);
  }
  if (infs.size() < 2) return std::nullopt;
  return spearman(infs, acts);
}

}  // namespace

int run_train(const ExperimentConfig& config, const std::string& out_dir,
              std::uint64_t seed, int jobs) {
  (void)seed;
  (void)jobs;
  fs::create_directories(out_dir);
  const Dataset data = config.dataset.load();
  TrainConfig tc;
  tc.loss = config.loss;
  tc.lambda = resolve_lambda(config, data.n());
  tc.intercept = config.intercept;
  const TrainedModel model = train(data, VectorXd::Ones(data.n()), tc);
  write_text_file(fs::path(out_dir) / "model.json", model.to_checkpoint_json());
  log_info("trained model: gradient norm " + format_double(model.grad_norm_at_opt) +
           " after " + std::to_string(model.iterations) + " iterations");
  return 0;
}

namespace {

struct PreparedRun {
  Dataset data;
  TrainedModel model;
  std::vector<SelectedTestPoint> test_points;
  std::vector<SubsetWeights> groups;
};

PreparedRun prepare_run(const ExperimentConfig& config, std::uint64_t seed,
                        bool for_effects = true,
                        const std::optional<double>& lambda_override = std::nullopt,
                        const VectorXd* warm_start = nullptr) {
  PreparedRun run;
  run.data = config.dataset.load();
  TrainConfig tc;
  tc.loss = config.loss;
  tc.lambda = lambda_override.value_or(resolve_lambda(config, run.data.n()));
  tc.intercept = config.intercept;
  run.model = train(run.data, VectorXd::Ones(run.data.n()), tc, warm_start);

  if (needs_test_points(config, for_effects)) {
    const Dataset test_data = load_test_dataset(config);
    if (test_data.d() != run.data.d()) {
      throw DataError("test dataset dimension does not match training data");
    }
    run.test_points =
        select_test_points(run.model, test_data, config.eval.selection, seed);
  }

  GroupPlan plan;
  plan.size_fractions =
      config.groups.size_grid.empty() ? default_size_grid() : config.groups.size_grid;
  plan.methods = config.groups.methods;
  plan.seed = mix_seed(config.groups.seed, seed);
  for (const SelectedTestPoint& tp : run.test_points) plan.test_points.push_back(tp.point);
  run.groups = build_groups(run.data, run.model, plan);
  return run;
}

}  // namespace

int run_groups_cmd(const ExperimentConfig& config, const std::string& out_dir,
                   std::uint64_t seed, int jobs) {
  (void)jobs;
  fs::create_directories(out_dir);
  const PreparedRun run = prepare_run(config, seed, false);
  write_groups_jsonl((fs::path(out_dir) / "groups.jsonl").string(), run.groups);
  write_text_file(fs::path(out_dir) / "model.json", run.model.to_checkpoint_json());
  log_info("wrote " + std::to_string(run.groups.size()) + " groups");
  return 0;
}

int run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                   std::uint64_t seed, int jobs) {
  fs::create_directories(out_dir);
  const PreparedRun run = prepare_run(config, seed);
  const Dataset& data = run.data;
  const TrainedModel& model = run.model;

  write_text_file(fs::path(out_dir) / "model.json", model.to_checkpoint_json());
  write_groups_jsonl((fs::path(out_dir) / "groups.jsonl").string(), run.groups);

  const SelectedTestPoint* record_tp =
      run.test_points.empty() ? nullptr : &run.test_points.front();
  const std::vector<EvalFunction> fs_list = eval_functions_for(config, record_tp);

  const InfluenceEngine influence(data, model);
  const NewtonEngine newton(influence);

  BatchOptions options;
  options.parallelism = jobs > 0 ? jobs : config.actual.parallelism;
  options.compute_actual = config.actual.enabled;
  const std::vector<EffectRecord> records =
      batch_effects(influence, newton, run.groups, fs_list, options);
  write_effects_csv((fs::path(out_dir) / "effects.csv").string(), records);

  std::map<int, const SubsetWeights*> by_id;
  for (const SubsetWeights& g : run.groups) by_id[g.id] = &g;

  std::vector<int> failed;
  for (const EffectRecord& r : records) {
    if (r.failure.has_value() &&
        (failed.empty() || failed.back() != r.subset_id)) {
      failed.push_back(r.subset_id);
    }
  }

  const BoundConstants base_constants = model_constants(model, data);
  std::vector<KindSummary> summaries;
  for (const EvalFunction& f : fs_list) {
    KindSummary s;
    s.eval_kind = f.kind_name();
    s.spearman_inf_actual = spearman_of_records(records, s.eval_kind);
    s.underest = underestimation_stats(records, s.eval_kind);

    if (f.kind != EvalFunction::Kind::SelfLoss) {
      const BoundConstants constants =
          with_eval_function(base_constants, model, data, f);
      const double floor = bound_check_floor(constants);
      for (const EffectRecord& r : records) {
        if (r.eval_kind != s.eval_kind) continue;
        ++s.n_subsets;
        if (!r.err_nt_act.has_value()) continue;
        const double bound =
            newton_error_bound(constants, by_id.at(r.subset_id)->removed_mass(data));
        if (std::abs(*r.err_nt_act) > bound + floor) {
          s.bound_violations.push_back(r.subset_id);
        }
      }
    } else {
      s.bound_checks_local = true;
      int contained = 0, with_newton = 0;
      double min_actual = std::numeric_limits<double>::infinity();
      bool any_actual = false;
      for (const EffectRecord& r : records) {
        if (r.eval_kind != s.eval_kind) continue;
        ++s.n_subsets;
        if (r.actual.has_value()) {
          any_actual = true;
          min_actual = std::min(min_actual, *r.actual);
        }
        if (!r.influence.has_value() || !r.newton.has_value()) continue;
        const SubsetWeights& w = *by_id.at(r.subset_id);
        const VectorXd delta = newton.newton_delta(w);
        const BoundConstants constants =
            with_eval_function(base_constants, model, data, f, &w, &delta);
        const SelfLossCone cone = selfloss_cone(constants);
        const double slack = cone.slack(w.removed_mass(data));
        ++with_newton;
        const bool inside = *r.newton >= *r.influence - slack - 1e-12 &&
                            *r.newton <= cone.upper_slope * *r.influence + slack + 1e-12;
        if (inside) {
          ++contained;
        } else {
          s.bound_violations.push_back(r.subset_id);
        }
        if (r.err_nt_act.has_value()) {
          const double bound = newton_error_bound(constants, w.removed_mass(data));
          if (std::abs(*r.err_nt_act) > bound + bound_check_floor(constants)) {
            s.bound_violations.push_back(r.subset_id);
          }
        }
      }
      if (with_newton > 0) {
        s.cone_contained_frac = static_cast<double>(contained) / with_newton;
      }
      if (any_actual) {
        s.min_actual = min_actual;
        s.actual_floor_violated = min_actual < -1e-9;
      }
    }
    std::sort(s.bound_violations.begin(), s.bound_violations.end());
    s.bound_violations.erase(
        std::unique(s.bound_violations.begin(), s.bound_violations.end()),
        s.bound_violations.end());
    summaries.push_back(std::move(s));
  }

  if (config.emit_spectra) {
    std::ofstream diag(fs::path(out_dir) / "diagnostics.jsonl", std::ios::binary);
    for (const SubsetWeights& g : run.groups) {
      const VectorXd eigs = newton.error_matrix_spectrum(g);
      ordered_json row;
      row["subset_id"] = g.id;
      row["d_spectrum"] = std::vector<double>(eigs.data(), eigs.data() + eigs.size());
      diag << row.dump() << '\n';
    }
  }

  bool violations = !failed.empty();
  ordered_json summary;
  summary["n"] = data.n();
  summary["d"] = data.d();
  summary["loss_kind"] = loss_kind_name(model.loss_kind);
  summary["lambda"] = model.lambda;
  summary["lambda_over_n"] = model.lambda / data.n();
  summary["intercept"] = model.intercept;
  summary["n_groups"] = static_cast<int>(run.groups.size());
  if (record_tp != nullptr) {
    ordered_json tp;
    tp["index"] = record_tp->index;
    tp["loss"] = record_tp->loss;
    tp["selection"] = record_tp->selection;
    summary["record_test_point"] = tp;
  }
  summary["failed_subsets"] = failed;
  ordered_json kinds = ordered_json::array();
  for (const KindSummary& s : summaries) {
    kinds.push_back(kind_summary_json(s));
    if (!s.bound_violations.empty() || s.actual_floor_violated) violations = true;
  }
  summary["eval"] = kinds;
  summary["ok"] = !violations;
  write_text_file(fs::path(out_dir) / "summary.json", summary.dump(2) + "\n");

  return violations ? 1 : 0;
}

int run_sweep(const ExperimentConfig& config, const std::string& out_dir,
              std::uint64_t seed, int jobs) {
  if (config.sweep_grid.empty()) {
    throw ConfigError("sweep needs sweep.lambda_over_n_grid");
  }
  fs::create_directories(out_dir);
  std::vector<double> grid = config.sweep_grid;
  std::sort(grid.begin(), grid.end());

  const Dataset data = config.dataset.load();
  // Groups are built once, from the model trained at the middle of the grid,
  // then held fixed so the sweep isolates the effect of regularization.
  ExperimentConfig ref_config = config;
  ref_config.lambda.reset();
  ref_config.lambda_over_n = grid[grid.size() / 2];
  const PreparedRun ref = prepare_run(ref_config, seed);
  write_groups_jsonl((fs::path(out_dir) / "groups.jsonl").string(), ref.groups);

  const SelectedTestPoint* record_tp =
      ref.test_points.empty() ? nullptr : &ref.test_points.front();
  const std::vector<EvalFunction> fs_list = eval_functions_for(config, record_tp);

  ordered_json rows = ordered_json::array();
  VectorXd warm = ref.model.theta;
  for (std::size_t gi = 0; gi < grid.size(); ++gi) {
    TrainConfig tc;
    tc.loss = config.loss;
    tc.lambda = grid[gi] * data.n();
    tc.intercept = config.intercept;
    const TrainedModel model = train(data, VectorXd::Ones(data.n()), tc, &warm);
    warm = model.theta;

    const InfluenceEngine influence(data, model);
    const NewtonEngine newton(influence);
    BatchOptions options;
    options.parallelism = jobs > 0 ? jobs : config.actual.parallelism;
    options.compute_actual = config.actual.enabled;
    const std::vector<EffectRecord> records =
        batch_effects(influence, newton, ref.groups, fs_list, options);

    char name[64];
    std::snprintf(name, sizeof(name), "effects_%02zu.csv", gi);
    write_effects_csv((fs::path(out_dir) / name).string(), records);

    ordered_json row;
    row["lambda_over_n"] = grid[gi];
    row["lambda"] = tc.lambda;
    ordered_json rho;
    for (const EvalFunction& f : fs_list) {
      rho[f.kind_name()] = opt_json(spearman_of_records(records, f.kind_name()));
    }
    row["spearman"] = rho;
    rows.push_back(std::move(row));
    log_info("sweep lambda/n " + format_double(grid[gi]) + " done");
  }

  ordered_json sweep;
  sweep["n"] = data.n();
  sweep["d"] = data.d();
  sweep["loss_kind"] = loss_kind_name(config.loss);
  sweep["rows"] = rows;
  write_text_file(fs::path(out_dir) / "sweep.json", sweep.dump(2) + "\n");
  return 0;
}

namespace {

void write_pairs_csv(const fs::path& path,
                     const std::vector<SubsetWeights>& subsets,
                     const std::vector<std::pair<double, double>>& effects,
                     const std::vector<double>* scales) {
  std::ofstream out(path, std::ios::binary);
  out << "subset_id,method_tag,size,influence,newton";
  if (scales != nullptr) out << ",scale_factor";
  out << '\n';
  for (std::size_t i = 0; i < subsets.size(); ++i) {
    out << subsets[i].id << ',' << subsets[i].method_tag << ','
        << subsets[i].support_size() << ',' << format_double(effects[i].first) << ','
        << format_double(effects[i].second);
    if (scales != nullptr) out << ',' << format_double((*scales)[i]);
    out << '\n';
  }
}

}  // namespace

int run_counterexample(const std::string& kind, std::uint64_t seed,
                       const std::string& out_dir) {
  fs::create_directories(out_dir);
  if (kind == "mog") {
    const MogResult mog = gen_mog(seed);
    write_dense_csv(mog.data, (fs::path(out_dir) / "dataset.csv").string());
    write_groups_jsonl((fs::path(out_dir) / "groups.jsonl").string(), mog.subsets);
    write_pairs_csv(fs::path(out_dir) / "pairs.csv", mog.subsets, mog.effects, nullptr);
    ordered_json j;
    j["kind"] = "mog";
    j["seed_used"] = mog.seed_used;
    j["attempts"] = mog.attempts;
    j["pearson"] = mog.pearson;
    j["sign_flip"] = mog.sign_flip;
    j["x_test"] = std::vector<double>(mog.x_test.data(),
                                      mog.x_test.data() + mog.x_test.size());
    j["ok"] = true;  // gen_mog throws when the construction misses its targets
    write_text_file(fs::path(out_dir) / "assertions.json", j.dump(2) + "\n");
    return 0;
  }
  if (kind == "ortho") {
    const OrthoResult ortho = gen_ortho(default_ortho_config(), default_ortho_lambda());
    write_dense_csv(ortho.data, (fs::path(out_dir) / "dataset.csv").string());
    write_groups_jsonl((fs::path(out_dir) / "groups.jsonl").string(), ortho.subsets);
    write_pairs_csv(fs::path(out_dir) / "pairs.csv", ortho.subsets, ortho.effects,
                    &ortho.scale_factors);

    // Origin-through line fit per axis; residuals measured against the
    // fitted slope, relative to each point's Newton value.
    double slopes[2] = {0.0, 0.0};
    double max_rel_residual = 0.0;
    for (int axis = 0; axis < 2; ++axis) {
      const std::string prefix = "ortho_axis" + std::to_string(axis);
      double sxy = 0.0, sxx = 0.0;
      for (std::size_t i = 0; i < ortho.subsets.size(); ++i) {
        if (ortho.subsets[i].method_tag.rfind(prefix, 0) != 0) continue;
        sxy += ortho.effects[i].first * ortho.effects[i].second;
        sxx += ortho.effects[i].first * ortho.effects[i].first;
      }
      slopes[axis] = sxy / sxx;
      for (std::size_t i = 0; i < ortho.subsets.size(); ++i) {
        if (ortho.subsets[i].method_tag.rfind(prefix, 0) != 0) continue;
        const double predicted = slopes[axis] * ortho.effects[i].first;
        max_rel_residual =
            std::max(max_rel_residual, std::abs(ortho.effects[i].second - predicted) /
                                           std::abs(ortho.effects[i].second));
      }
    }
    double max_scale_err = 0.0;
    for (std::size_t i = 0; i < ortho.subsets.size(); ++i) {
      const double expected = ortho.scale_factors[i] * ortho.effects[i].first;
      max_scale_err = std::max(max_scale_err, std::abs(ortho.effects[i].second - expected));
    }
    const bool ok = max_rel_residual <= 1e-6 && std::abs(slopes[0] - slopes[1]) > 1e-3;

    ordered_json j;
    j["kind"] = "ortho";
    j["slopes"] = {slopes[0], slopes[1]};
    j["max_rel_residual"] = max_rel_residual;
    j["max_scale_error"] = max_scale_err;
    j["ok"] = ok;
    write_text_file(fs::path(out_dir) / "assertions.json", j.dump(2) + "\n");
    return ok ? 0 : 1;
  }
  throw ConfigError("unknown counterexample kind '" + kind + "'");
}

int run_report(const std::string& effects_csv, const std::string& out_dir) {
  fs::create_directories(out_dir);
  const std::vector<EffectRecord> records = read_effects_csv(effects_csv);
  std::vector<std::string> kinds;
  for (const EffectRecord& r : records) {
    if (std::find(kinds.begin(), kinds.end(), r.eval_kind) == kinds.end()) {
      kinds.push_back(r.eval_kind);
    }
  }
  ordered_json out_kinds = ordered_json::array();
  for (const std::string& kind : kinds) {
    KindSummary s;
    s.eval_kind = kind;
    for (const EffectRecord& r : records) {
      if (r.eval_kind == kind) ++s.n_subsets;
    }
    s.spearman_inf_actual = spearman_of_records(records, kind);
    s.underest = underestimation_stats(records, kind);
    out_kinds.push_back(kind_summary_json(s));
  }
  ordered_json report;
  report["source"] = effects_csv;
  report["n_records"] = static_cast<int>(records.size());
  report["eval"] = out_kinds;
  const std::string text = report.dump(2) + "\n";
  write_text_file(fs::path(out_dir) / "report.json", text);
  std::fputs(text.c_str(), stdout);
  return 0;
}

}  // namespace grouprobe
