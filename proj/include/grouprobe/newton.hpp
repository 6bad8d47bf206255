#pragma once

#include "grouprobe/influence.hpp"

namespace grouprobe {

// Per-subset diagnostics around the one-step Newton update.
struct NewtonDiagnostics {
  VectorXd newton_step;        // parameter change solving the reweighted system
  VectorXd error_matrix_eigs;  // ascending spectrum of the error matrix
  VectorXd v_subset;           // H^{-1/2} g_1(w)
  VectorXd v_test;             // H^{-1/2} (augmented) x_test, when requested
};

// One-step Newton approximation of removal effects. Shares the caches of an
// InfluenceEngine; each subset gets its own reweighted factorization.
class NewtonEngine {
 public:
  explicit NewtonEngine(const InfluenceEngine& base) : base_(&base) {}

  // Regularized Hessian at the optimum reweighted by 1 - w.
  MatrixXd reduced_hessian(const SubsetWeights& w) const;
  // Unregularized curvature of the removed mass, H_1(w).
  MatrixXd subset_curvature(const SubsetWeights& w) const;

  VectorXd newton_delta(const SubsetWeights& w) const;
  double newton_effect(const SubsetWeights& w, const EvalFunction& f) const;
  double newton_effect_from_delta(const SubsetWeights& w, const EvalFunction& f,
                                  const VectorXd& delta) const;

  // D(w) = (I - H^{-1/2} H_1(w) H^{-1/2})^{-1} - I and its spectrum.
  MatrixXd error_matrix(const SubsetWeights& w) const;
  VectorXd error_matrix_spectrum(const SubsetWeights& w) const;

  // Closed-form ratio newton/influence for removing `multiplicity` effective
  // copies of training point k (binary margin models only).
  double single_point_scale(int point_index, int multiplicity) const;

  // (err_nt_act, err_nt_inf) = (actual - newton, newton - influence).
  static std::pair<double, double> decompose_error(double influence, double newton,
                                                   double actual);

  NewtonDiagnostics diagnostics(const SubsetWeights& w,
                                const EvalFunction* test_f = nullptr) const;

  const InfluenceEngine& base() const { return *base_; }

 private:
  const InfluenceEngine* base_;
};

}  // namespace grouprobe
