#include "grouprobe/bounds.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace grouprobe {

namespace {

constexpr int kEigDimGuard = 5000;
constexpr int kSegmentSamples = 65;

// Bound on the operator norm of the third-derivative tensor of the total
// self-loss at theta: sum over the subset of |phi'''| * ||x||^3.
double selfloss_third_derivative_bound(const TrainedModel& model, const Dataset& data,
                                       const SubsetWeights& w, const VectorXd& theta) {
  double total = 0.0;
  for (std::size_t k = 0; k < w.indices.size(); ++k) {
    const int i = w.indices[k];
    const double mass = w.values[k] * data.base_weights[i];
    double xnorm = data.features.row(i).norm();
    if (model.intercept) xnorm = std::sqrt(xnorm * xnorm + 1.0);
    double d3 = 0.0;
    if (model.loss_kind == LossKind::LogisticMargin) {
      const double margin = data.margin_label(i) *
                            (data.features.row(i).dot(theta.head(data.d())) +
                             (model.intercept ? theta[data.d()] : 0.0));
      d3 = std::abs(logistic::d3(margin));
    }
    total += mass * d3 * xnorm * xnorm * xnorm;
  }
  return total;
}

double selfloss_grad_norm(const TrainedModel& model, const Dataset& data,
                          const SubsetWeights& w, const VectorXd& theta) {
  return eval_grad(model, data, EvalFunction::self_loss(), theta, &w).norm();
}

}  // namespace

BoundConstants model_constants(const TrainedModel& model, const Dataset& data) {
  if (model.param_dim() > kEigDimGuard) {
    throw ConfigError("constants limited to dimension <= " + std::to_string(kEigDimGuard));
  }
  BoundConstants c;
  c.lambda = model.lambda;
  c.n_points = data.n();

  const MatrixXd h1 = hessian_unregularized(model, data, VectorXd::Ones(data.n()));
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(h1);
  if (eig.info() != Eigen::Success) throw InternalError("Hessian eigendecomposition failed");
  c.sigma_min = std::max(0.0, eig.eigenvalues().minCoeff());
  c.sigma_max = eig.eigenvalues().maxCoeff();

  double max_grad = 0.0;
  double max_xnorm3 = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    max_grad = std::max(max_grad, point_grad(model, data, i).norm());
    double xnorm = data.features.row(i).norm();
    if (model.intercept) xnorm = std::sqrt(xnorm * xnorm + 1.0);
    max_xnorm3 = std::max(max_xnorm3, xnorm * xnorm * xnorm);
  }
  c.c_grad_max = max_grad;

  switch (model.loss_kind) {
    case LossKind::LogisticMargin:
      c.c_hess_lip = logistic::sup_abs_d3() * max_xnorm3;
      break;
    case LossKind::Squared:
      c.c_hess_lip = 0.0;  // constant curvature
      break;
    case LossKind::Softmax:
      // The softmax probability Hessian is 3/2-Lipschitz in the class scores.
      c.c_hess_lip = 1.5 * max_xnorm3;
      break;
  }
  return c;
}

BoundConstants with_eval_function(BoundConstants c, const TrainedModel& model,
                                  const Dataset& data, const EvalFunction& f,
                                  const SubsetWeights* self_subset,
                                  const VectorXd* newton_step) {
  double xt_norm = 0.0;
  if (f.kind != EvalFunction::Kind::SelfLoss) {
    xt_norm = f.x_test.norm();
    if (model.intercept) xt_norm = std::sqrt(xt_norm * xt_norm + 1.0);
  }
  switch (f.kind) {
    case EvalFunction::Kind::TestPrediction:
      c.c_f = xt_norm;
      c.c_f3 = 0.0;
      break;
    case EvalFunction::Kind::TestLoss: {
      switch (model.loss_kind) {
        case LossKind::Squared:
          // The squared-loss gradient is unbounded globally; this slot is
          // only ever consumed multiplied by c_hess_lip = 0.
          c.c_f = xt_norm;
          c.c_f3 = 0.0;
          break;
        case LossKind::LogisticMargin:
          c.c_f = xt_norm;  // |phi'| < 1
          c.c_f3 = logistic::sup_abs_d3() * xt_norm * xt_norm * xt_norm;
          break;
        case LossKind::Softmax:
          c.c_f = std::sqrt(2.0) * xt_norm;
          c.c_f3 = 1.5 * xt_norm * xt_norm * xt_norm;
          break;
      }
      break;
    }
    case EvalFunction::Kind::SelfLoss: {
      if (self_subset == nullptr) {
        throw ConfigError("self-loss constants need the subset they bind to");
      }
      c.f_constants_local = true;
      const VectorXd end = newton_step != nullptr
                               ? VectorXd(model.theta + *newton_step)
                               : model.theta;
      double max_cf = 0.0, max_cf3 = 0.0;
      for (int s = 0; s < kSegmentSamples; ++s) {
        const double t = kSegmentSamples == 1
                             ? 0.0
                             : static_cast<double>(s) / (kSegmentSamples - 1);
        const VectorXd theta = (1.0 - t) * model.theta + t * end;
        max_cf = std::max(max_cf, selfloss_grad_norm(model, data, *self_subset, theta));
        max_cf3 = std::max(max_cf3,
                           selfloss_third_derivative_bound(model, data, *self_subset, theta));
      }
      c.c_f = max_cf;
      c.c_f3 = max_cf3;
      break;
    }
  }
  return c;
}

BoundConstants compute_constants(const TrainedModel& model, const Dataset& data,
                                 const EvalFunction& f,
                                 const SubsetWeights* self_subset,
                                 const VectorXd* newton_step) {
  return with_eval_function(model_constants(model, data), model, data, f, self_subset,
                            newton_step);
}

double newton_error_bound(const BoundConstants& constants, double removed_mass) {
  const double denom = std::pow(constants.sigma_min + constants.lambda, 3);
  return constants.n_points * removed_mass * removed_mass * constants.c_f *
         constants.c_hess_lip * constants.c_grad_max * constants.c_grad_max / denom;
}

double newton_error_bound(const BoundConstants& constants, const Dataset& data,
                          const SubsetWeights& w) {
  return newton_error_bound(constants, w.removed_mass(data));
}

double SelfLossCone::slack(double removed_mass) const {
  const double denom = 6.0 * std::pow(constants.sigma_min + constants.lambda, 3);
  return removed_mass * removed_mass * removed_mass * constants.c_f3 *
         constants.c_grad_max * constants.c_grad_max * constants.c_grad_max / denom;
}

SelfLossCone selfloss_cone(const BoundConstants& constants) {
  SelfLossCone cone;
  cone.constants = constants;
  const double ratio = constants.sigma_max / constants.lambda;
  cone.lower_slope = 1.0;
  cone.upper_slope = 1.0 + 1.5 * ratio + 0.5 * ratio * ratio;
  return cone;
}

}  // namespace grouprobe
