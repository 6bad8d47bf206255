#include "grouprobe/retrain.hpp"

#include <cmath>

#include "grouprobe/parallel.hpp"

namespace grouprobe {

VectorXd retrain_parameters(const TrainedModel& model, const Dataset& data,
                            const SubsetWeights& w, bool cold_start) {
  const VectorXd keep = w.keep_vector(data.n());
  double remaining = 0.0;
  for (int i = 0; i < data.n(); ++i) remaining += keep[i] * data.base_weights[i];
  if (!(remaining > 0.0)) {
    throw DataError("subset removes all effective training mass");
  }
  TrainConfig config;
  config.loss = model.loss_kind;
  config.lambda = model.lambda;
  config.intercept = model.intercept;
  const TrainedModel retrained =
      train(data, keep, config, cold_start ? nullptr : &model.theta);
  return retrained.theta;
}

double actual_effect(const TrainedModel& model, const Dataset& data,
                     const SubsetWeights& w, const EvalFunction& f) {
  check_eval_function(model, data, f);
  const VectorXd theta_without = retrain_parameters(model, data, w);
  return eval_value(model, data, f, theta_without, &w) -
         eval_value(model, data, f, model.theta, &w);
}

std::vector<EffectRecord> batch_effects(const InfluenceEngine& influence,
                                        const NewtonEngine& newton,
                                        const std::vector<SubsetWeights>& subsets,
                                        const std::vector<EvalFunction>& fs,
                                        const BatchOptions& options) {
  const Dataset& data = influence.dataset();
  const TrainedModel& model = influence.model();
  const int n_subsets = static_cast<int>(subsets.size());
  const int n_fs = static_cast<int>(fs.size());
  std::vector<EffectRecord> records(static_cast<std::size_t>(n_subsets) * n_fs);

  // One solve per additive evaluation function, shared by every subset.
  std::vector<VectorXd> pointwise(fs.size());
  for (std::size_t fi = 0; fi < fs.size(); ++fi) {
    check_eval_function(model, data, fs[fi]);
    if (fs[fi].kind != EvalFunction::Kind::SelfLoss) {
      pointwise[fi] = influence.pointwise_influence(fs[fi]);
    }
  }

  for_index(n_subsets, std::max(1, options.parallelism), [&](int si) {
    const SubsetWeights& w = subsets[static_cast<std::size_t>(si)];
    EffectRecord base;
    base.subset_id = w.id;
    base.method_tag = w.method_tag;
    base.size = w.support_size();
    base.alpha = w.alpha;

    std::optional<std::string> failure;
    VectorXd newton_delta;
    if (options.compute_newton) {
      try {
        newton_delta = newton.newton_delta(w);
      } catch (const std::exception& e) {
        failure = std::string("newton: ") + e.what();
      }
    }
    VectorXd retrained;
    if (options.compute_actual && !failure) {
      try {
        retrained = retrain_parameters(model, data, w);
      } catch (const std::exception& e) {
        failure = std::string("retrain: ") + e.what();
      }
    }

    for (int fi = 0; fi < n_fs; ++fi) {
      const EvalFunction& f = fs[static_cast<std::size_t>(fi)];
      EffectRecord r = base;
      r.eval_kind = f.kind_name();
      if (failure) {
        r.failure = failure;
      } else {
        const double f_at_opt = influence.value_at_opt(f, &w);
        if (f.kind == EvalFunction::Kind::SelfLoss) {
          r.influence = influence.group_influence(w, f);
        } else {
          r.influence = influence.group_influence_from_pointwise(
              w, pointwise[static_cast<std::size_t>(fi)]);
        }
        if (options.compute_newton) {
          r.newton = newton.newton_effect_from_delta(w, f, newton_delta);
          r.err_nt_inf = *r.newton - *r.influence;
        }
        if (options.compute_param_pred) {
          r.param_pred = influence.predicted_effect_via_params(w, f);
        }
        if (options.compute_actual) {
          r.actual = eval_value(model, data, f, retrained, &w) - f_at_opt;
          if (options.compute_newton) {
            r.err_nt_act = *r.actual - *r.newton;
          }
        }
      }
      records[static_cast<std::size_t>(si) * n_fs + fi] = std::move(r);
    }
  });
  return records;
}

std::vector<EffectRecord> batch_actual_effects(const TrainedModel& model,
                                               const Dataset& data,
                                               const std::vector<SubsetWeights>& subsets,
                                               const EvalFunction& f, int parallelism) {
  check_eval_function(model, data, f);
  std::vector<EffectRecord> records(subsets.size());
  for_index(static_cast<int>(subsets.size()), std::max(1, parallelism), [&](int si) {
    const SubsetWeights& w = subsets[static_cast<std::size_t>(si)];
    EffectRecord r;
    r.subset_id = w.id;
    r.method_tag = w.method_tag;
    r.size = w.support_size();
    r.alpha = w.alpha;
    r.eval_kind = f.kind_name();
    try {
      r.actual = actual_effect(model, data, w, f);
    } catch (const std::exception& e) {
      r.failure = std::string(e.what());
      log_warn("subset " + std::to_string(w.id) + " failed: " + e.what());
    }
    records[static_cast<std::size_t>(si)] = std::move(r);
  });
  return records;
}

}  // namespace grouprobe
