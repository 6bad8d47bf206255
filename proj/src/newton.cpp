#include "grouprobe/newton.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>

namespace grouprobe {

namespace {
constexpr int kSpectrumDimGuard = 5000;
}

MatrixXd NewtonEngine::subset_curvature(const SubsetWeights& w) const {
  const Dataset& data = base_->dataset();
  const TrainedModel& model = base_->model();
  const int P = model.param_dim();
  MatrixXd h = MatrixXd::Zero(P, P);
  if (model.loss_kind != LossKind::Softmax) {
    const MatrixRM& xa = base_->augmented();
    const VectorXd& curv = base_->curvatures();
    for (std::size_t k = 0; k < w.indices.size(); ++k) {
      const int i = w.indices[k];
      const double c = w.values[k] * data.base_weights[i] * curv[i];
      if (c != 0.0) {
        h.selfadjointView<Eigen::Lower>().rankUpdate(xa.row(i).transpose(), c);
      }
    }
    h.triangularView<Eigen::Upper>() = h.transpose();
  } else {
    for (std::size_t k = 0; k < w.indices.size(); ++k) {
      const int i = w.indices[k];
      h += w.values[k] * data.base_weights[i] * point_hess(model, data, i);
    }
  }
  return h;
}

MatrixXd NewtonEngine::reduced_hessian(const SubsetWeights& w) const {
  return base_->factor().matrix() - subset_curvature(w);
}

VectorXd NewtonEngine::newton_delta(const SubsetWeights& w) const {
  if (w.indices.empty()) return VectorXd::Zero(base_->model().param_dim());
  const MatrixXd h = reduced_hessian(w);
  Eigen::LLT<MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) {
    throw InternalError("reweighted Hessian is not positive definite");
  }
  return llt.solve(base_->grad_sum(w));
}

double NewtonEngine::newton_effect_from_delta(const SubsetWeights& w,
                                              const EvalFunction& f,
                                              const VectorXd& delta) const {
  const Dataset& data = base_->dataset();
  const TrainedModel& model = base_->model();
  check_eval_function(model, data, f);
  return eval_value(model, data, f, model.theta + delta, &w) -
         eval_value(model, data, f, model.theta, &w);
}

double NewtonEngine::newton_effect(const SubsetWeights& w, const EvalFunction& f) const {
  return newton_effect_from_delta(w, f, newton_delta(w));
}

MatrixXd NewtonEngine::error_matrix(const SubsetWeights& w) const {
  const MatrixXd& root_inv = base_->factor().inverse_sqrt();
  const MatrixXd whitened = root_inv * subset_curvature(w) * root_inv;
  const int P = static_cast<int>(whitened.rows());
  MatrixXd shrink = MatrixXd::Identity(P, P) - whitened;
  Eigen::LLT<MatrixXd> llt(shrink);
  if (llt.info() != Eigen::Success) {
    throw InternalError("error matrix is undefined: removed curvature reaches the full Hessian");
  }
  MatrixXd d = llt.solve(MatrixXd::Identity(P, P)) - MatrixXd::Identity(P, P);
  d = 0.5 * (d + d.transpose()).eval();
  return d;
}

VectorXd NewtonEngine::error_matrix_spectrum(const SubsetWeights& w) const {
  const int P = base_->model().param_dim();
  if (P > kSpectrumDimGuard) {
    throw ConfigError("error-matrix spectrum limited to dimension <= " +
                      std::to_string(kSpectrumDimGuard));
  }
  if (w.indices.empty()) return VectorXd::Zero(P);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(error_matrix(w));
  if (eig.info() != Eigen::Success) throw InternalError("spectrum computation failed");
  return eig.eigenvalues();
}

double NewtonEngine::single_point_scale(int point_index, int multiplicity) const {
  const Dataset& data = base_->dataset();
  const TrainedModel& model = base_->model();
  if (model.loss_kind == LossKind::Softmax) {
    throw ConfigError("single-point scale requires a binary margin model");
  }
  if (multiplicity < 1) throw ConfigError("multiplicity must be >= 1");
  if (point_index < 0 || point_index >= data.n()) {
    throw DataError("point index out of range");
  }
  const VectorXd xa = base_->augmented().row(point_index).transpose();
  const double curvature = base_->curvatures()[point_index];
  const double mass = multiplicity * data.base_weights[point_index];
  const double quad = xa.dot(base_->factor().solve(xa));
  const double denom = 1.0 - mass * curvature * quad;
  if (!(denom > 0.0)) {
    throw DataError("removal exceeds training mass in this direction");
  }
  return 1.0 / denom;
}

std::pair<double, double> NewtonEngine::decompose_error(double influence, double newton,
                                                        double actual) {
  return {actual - newton, newton - influence};
}

NewtonDiagnostics NewtonEngine::diagnostics(const SubsetWeights& w,
                                            const EvalFunction* test_f) const {
  NewtonDiagnostics diag;
  diag.newton_step = newton_delta(w);
  diag.error_matrix_eigs = error_matrix_spectrum(w);
  const MatrixXd& root_inv = base_->factor().inverse_sqrt();
  diag.v_subset = root_inv * base_->grad_sum(w);
  if (test_f != nullptr && test_f->kind != EvalFunction::Kind::SelfLoss) {
    diag.v_test = root_inv *
                  eval_grad(base_->model(), base_->dataset(), *test_f,
                            base_->model().theta, nullptr);
  }
  return diag;
}

}  // namespace grouprobe
