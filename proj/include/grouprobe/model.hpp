#pragma once

#include <optional>
#include <string>

#include "grouprobe/dataset.hpp"
#include "grouprobe/loss.hpp"

namespace grouprobe {

struct TrainConfig {
  LossKind loss = LossKind::LogisticMargin;
  double lambda = 1.0;    // absolute regularization strength, > 0
  bool intercept = false; // fitted but never regularized
  double tol_scale = 1e-10;  // gradient tolerance = tol_scale * max(1, n)
  int max_iterations = 200;
};

// Parameters at the regularized empirical-risk minimum, plus enough metadata
// to re-derive every evaluator. Immutable after train().
struct TrainedModel {
  VectorXd theta;  // length param_dim(); class-major blocks for softmax
  LossKind loss_kind = LossKind::LogisticMargin;
  double lambda = 1.0;
  bool intercept = false;
  int d = 0;
  int n_classes = 2;
  double grad_norm_at_opt = 0.0;
  int iterations = 0;
  std::uint64_t dataset_fingerprint = 0;

  bool binary() const { return loss_kind != LossKind::Softmax; }
  // Per-class parameter count (features plus optional intercept slot).
  int class_dim() const { return d + (intercept ? 1 : 0); }
  int param_dim() const { return binary() ? class_dim() : n_classes * class_dim(); }

  std::string to_checkpoint_json() const;
  static TrainedModel from_checkpoint_json(const std::string& text);
};

// Minimize sum_i keep_i * base_i * loss_i(theta) + (lambda/2) ||theta_w||^2
// by damped Newton with Armijo backtracking. Deterministic; throws
// ConvergenceError (with the final gradient norm) past the iteration cap.
TrainedModel train(const Dataset& data, const VectorXd& keep_weights,
                   const TrainConfig& config, const VectorXd* warm_start = nullptr);

// Per-point loss/gradient/Hessian at arbitrary parameters. The *_at forms
// take explicit parameters; the plain forms evaluate at the trained optimum.
double point_loss_at(const TrainedModel& model, const Dataset& data, int i,
                     const VectorXd& theta);
VectorXd point_grad_at(const TrainedModel& model, const Dataset& data, int i,
                       const VectorXd& theta);
MatrixXd point_hess_at(const TrainedModel& model, const Dataset& data, int i,
                       const VectorXd& theta);

inline VectorXd point_grad(const TrainedModel& m, const Dataset& d, int i) {
  return point_grad_at(m, d, i, m.theta);
}
inline MatrixXd point_hess(const TrainedModel& m, const Dataset& d, int i) {
  return point_hess_at(m, d, i, m.theta);
}

// sum_i weights_i * base_i * hess_i(theta_hat) + lambda on the regularized
// block. weights may be any nonnegative vector (1, 1-w, w, ...).
MatrixXd hessian(const TrainedModel& model, const Dataset& data,
                 const VectorXd& weights);
// Same sum without the lambda shift (the raw curvature H_1(weights)).
MatrixXd hessian_unregularized(const TrainedModel& model, const Dataset& data,
                               const VectorXd& weights);
// sum_i weights_i * base_i * grad_i(theta_hat).
VectorXd weighted_grad_sum(const TrainedModel& model, const Dataset& data,
                           const VectorXd& weights);

// Straightforward single-threaded loops kept as the reference the blocked
// OpenMP kernels are tested and benchmarked against.
MatrixXd hessian_unregularized_serial(const TrainedModel& model, const Dataset& data,
                                      const VectorXd& weights);
VectorXd weighted_grad_sum_serial(const TrainedModel& model, const Dataset& data,
                                  const VectorXd& weights);

// Full objective including the regularizer; keep composes with base weights.
double objective_value(const TrainedModel& model, const Dataset& data,
                       const VectorXd& keep_weights, const VectorXd& theta);

// Margin-loss curvature coefficients c_i with hess_i = c_i * xa_i xa_i^T.
// Throws for softmax (no scalar factorization).
VectorXd point_curvatures(const TrainedModel& model, const Dataset& data);

// Feature rows with the intercept slot appended when the model uses one.
MatrixRM augmented_features(const Dataset& data, bool intercept);

}  // namespace grouprobe
