#include "grouprobe/influence.hpp"

#include <cmath>

namespace grouprobe {

namespace {

MatrixRM build_weighted_grads(const Dataset& data, const TrainedModel& model) {
  MatrixRM g(data.n(), model.param_dim());
  for (int i = 0; i < data.n(); ++i) {
    g.row(i) = (data.base_weights[i] * point_grad(model, data, i)).transpose();
  }
  return g;
}

}  // namespace

InfluenceEngine::InfluenceEngine(const Dataset& data, const TrainedModel& model)
    : data_(&data),
      model_(&model),
      xa_(augmented_features(data, model.intercept)),
      weighted_grads_(build_weighted_grads(data, model)),
      curvatures_(model.loss_kind == LossKind::Softmax ? VectorXd()
                                                       : point_curvatures(model, data)),
      factor_(hessian(model, data, VectorXd::Ones(data.n())), model.lambda) {
  if (model.dataset_fingerprint != 0 &&
      model.dataset_fingerprint != data.fingerprint()) {
    throw DataError("model was trained on a different dataset");
  }
}

VectorXd InfluenceEngine::grad_sum(const SubsetWeights& w) const {
  VectorXd g = VectorXd::Zero(model_->param_dim());
  for (std::size_t k = 0; k < w.indices.size(); ++k) {
    g += w.values[k] * weighted_grads_.row(w.indices[k]).transpose();
  }
  return g;
}

VectorXd InfluenceEngine::pointwise_influence(const EvalFunction& f) const {
  if (f.kind == EvalFunction::Kind::SelfLoss) {
    throw ConfigError("self-loss influence is not additive; no pointwise vector exists");
  }
  check_eval_function(*model_, *data_, f);
  const VectorXd fgrad = eval_grad(*model_, *data_, f, model_->theta, nullptr);
  const VectorXd u = factor_.solve(fgrad);
  return weighted_grads_ * u;
}

double InfluenceEngine::group_influence_from_pointwise(const SubsetWeights& w,
                                                       const VectorXd& pointwise) const {
  double total = 0.0;
  for (std::size_t k = 0; k < w.indices.size(); ++k) {
    total += w.values[k] * pointwise[w.indices[k]];
  }
  return total;
}

double InfluenceEngine::group_influence(const SubsetWeights& w, const EvalFunction& f) const {
  if (f.kind == EvalFunction::Kind::SelfLoss) {
    const VectorXd g = grad_sum(w);
    return g.dot(factor_.solve(g));
  }
  return group_influence_from_pointwise(w, pointwise_influence(f));
}

double InfluenceEngine::selfloss_cross(const SubsetWeights& f_w,
                                       const SubsetWeights& g_w) const {
  return grad_sum(f_w).dot(factor_.solve(grad_sum(g_w)));
}

VectorXd InfluenceEngine::param_influence_delta(const SubsetWeights& w) const {
  return factor_.solve(grad_sum(w));
}

double InfluenceEngine::predicted_effect_via_params(const SubsetWeights& w,
                                                    const EvalFunction& f) const {
  check_eval_function(*model_, *data_, f);
  const VectorXd shifted = model_->theta + param_influence_delta(w);
  return eval_value(*model_, *data_, f, shifted, &w) -
         eval_value(*model_, *data_, f, model_->theta, &w);
}

double InfluenceEngine::interpolated_effect(const SubsetWeights& w, const EvalFunction& f,
                                            double t, const TrainConfig* override_config) const {
  if (!(t >= 0.0 && t <= 1.0)) throw ConfigError("interpolation t must be in [0,1]");
  check_eval_function(*model_, *data_, f);
  TrainConfig config;
  if (override_config != nullptr) {
    config = *override_config;
  } else {
    config.loss = model_->loss_kind;
    config.lambda = model_->lambda;
    config.intercept = model_->intercept;
  }
  const VectorXd keep = VectorXd::Ones(data_->n()) - t * w.dense(data_->n());
  const TrainedModel retrained = train(*data_, keep, config, &model_->theta);
  return eval_value(*model_, *data_, f, retrained.theta, &w) -
         eval_value(*model_, *data_, f, model_->theta, &w);
}

double InfluenceEngine::value_at_opt(const EvalFunction& f,
                                     const SubsetWeights* self_subset) const {
  return eval_value(*model_, *data_, f, model_->theta, self_subset);
}

}  // namespace grouprobe
