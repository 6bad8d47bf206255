#pragma once

#include "grouprobe/newton.hpp"

namespace grouprobe {

// Spectral and Lipschitz constants feeding the theoretical bounds.
struct BoundConstants {
  double sigma_min = 0.0;   // smallest eigenvalue of the unregularized Hessian
  double sigma_max = 0.0;   // largest eigenvalue of the unregularized Hessian
  double c_grad_max = 0.0;  // largest per-point gradient norm at the optimum
  double c_f = 0.0;         // gradient-norm bound for the evaluation function
  double c_hess_lip = 0.0;  // Hessian Lipschitz constant of the loss
  double c_f3 = 0.0;        // third-derivative bound for the evaluation function
  double lambda = 0.0;
  int n_points = 0;
  // Self-loss f constants are empirical maxima along the Newton segment,
  // not global suprema; reports label checks using them as "local".
  bool f_constants_local = false;
};

// Spectral and loss-level constants only (f slots left zero); one
// eigendecomposition and one pass over the training gradients.
BoundConstants model_constants(const TrainedModel& model, const Dataset& data);

// Fill the evaluation-function constants on top of model_constants output.
// For self-loss, pass the subset the function binds to plus the Newton step
// that ends the segment the local constants are measured on.
BoundConstants with_eval_function(BoundConstants base, const TrainedModel& model,
                                  const Dataset& data, const EvalFunction& f,
                                  const SubsetWeights* self_subset = nullptr,
                                  const VectorXd* newton_step = nullptr);

BoundConstants compute_constants(const TrainedModel& model, const Dataset& data,
                                 const EvalFunction& f,
                                 const SubsetWeights* self_subset = nullptr,
                                 const VectorXd* newton_step = nullptr);

// n * mass^2 * C_f * C_H * C_l^2 / (sigma_min + lambda)^3, the guaranteed
// ceiling on |actual - newton| for the removed mass.
double newton_error_bound(const BoundConstants& constants, double removed_mass);
double newton_error_bound(const BoundConstants& constants, const Dataset& data,
                          const SubsetWeights& w);

// The self-loss cone: influence <= newton <= upper_slope * influence, each
// side slack by the third-order term.
struct SelfLossCone {
  double lower_slope = 1.0;
  double upper_slope = 1.0;
  BoundConstants constants;
  // mass^3 * C_f3 * C_l^3 / (6 (sigma_min + lambda)^3)
  double slack(double removed_mass) const;
};

SelfLossCone selfloss_cone(const BoundConstants& constants);

}  // namespace grouprobe
