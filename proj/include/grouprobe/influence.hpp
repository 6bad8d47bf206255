#pragma once

#include "grouprobe/solver.hpp"
#include "grouprobe/subset.hpp"

namespace grouprobe {

// First-order influence of subsets on an evaluation function. Holds the
// shared factorization of the regularized Hessian at the optimum plus
// per-point gradient caches; everything is read-only after construction, so
// per-subset evaluations can be mapped in parallel.
class InfluenceEngine {
 public:
  InfluenceEngine(const Dataset& data, const TrainedModel& model);

  const Dataset& dataset() const { return *data_; }
  const TrainedModel& model() const { return *model_; }
  const HessianFactor& factor() const { return factor_; }
  const MatrixRM& augmented() const { return xa_; }
  // b_i * grad_i(theta_hat) as rows (n x P).
  const MatrixRM& weighted_grads() const { return weighted_grads_; }
  // Margin-loss curvature per point (empty for softmax).
  const VectorXd& curvatures() const { return curvatures_; }

  // g_1(w) = sum_i w_i b_i grad_i(theta_hat), over the support only.
  VectorXd grad_sum(const SubsetWeights& w) const;

  // v_i = grad f(theta_hat)^T H^-1 grad_i * b_i, one linear solve total.
  // Not defined for self-loss (not additive).
  VectorXd pointwise_influence(const EvalFunction& f) const;

  // Test prediction / test loss: dot of the pointwise vector with w.
  // Self-loss: the quadratic form g_1(w)^T H^-1 g_1(w) >= 0.
  double group_influence(const SubsetWeights& w, const EvalFunction& f) const;
  double group_influence_from_pointwise(const SubsetWeights& w,
                                        const VectorXd& pointwise) const;

  // g_1(f_w)^T H^-1 g_1(g_w): the self-loss form with the evaluation
  // function bound to f_w while the removal argument is g_w.
  double selfloss_cross(const SubsetWeights& f_w, const SubsetWeights& g_w) const;

  // H^-1 g_1(w): the parameter change the influence approximation predicts.
  VectorXd param_influence_delta(const SubsetWeights& w) const;

  // f(theta_hat + delta_inf) - f(theta_hat).
  double predicted_effect_via_params(const SubsetWeights& w, const EvalFunction& f) const;

  // q_w(t) - q_w(0) by retraining with keep weights 1 - t*w.
  double interpolated_effect(const SubsetWeights& w, const EvalFunction& f, double t,
                             const TrainConfig* override_config = nullptr) const;

  double value_at_opt(const EvalFunction& f, const SubsetWeights* self_subset) const;

 private:
  const Dataset* data_;
  const TrainedModel* model_;
  MatrixRM xa_;
  MatrixRM weighted_grads_;
  VectorXd curvatures_;
  HessianFactor factor_;
};

}  // namespace grouprobe
