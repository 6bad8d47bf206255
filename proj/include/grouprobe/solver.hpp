#pragma once

#include <Eigen/Cholesky>
#include <memory>

#include "grouprobe/common.hpp"

namespace grouprobe {

// Shared factorization of a symmetric positive-definite matrix
// (the regularized Hessian at the optimum). Read-only after construction.
class HessianFactor {
 public:
  HessianFactor(MatrixXd matrix, double lambda);

  const MatrixXd& matrix() const { return matrix_; }
  double lambda() const { return lambda_; }
  int dim() const { return static_cast<int>(matrix_.rows()); }

  // Dense Cholesky route.
  VectorXd solve(const VectorXd& rhs) const;

  // Conjugate-gradient route on the same matrix; the independent check for
  // the Cholesky path and the fallback for large dimensions.
  VectorXd solve_cg(const VectorXd& rhs, double tol = 1e-10, int max_iter = -1) const;

  // Symmetric inverse square root via eigendecomposition, eigenvalues
  // clamped below at lambda*(1 - 1e-12). Computed once, then cached.
  const MatrixXd& inverse_sqrt() const;

 private:
  MatrixXd matrix_;
  double lambda_;
  Eigen::LLT<MatrixXd> llt_;
  mutable std::shared_ptr<const MatrixXd> inv_sqrt_;  // set once under call
};

}  // namespace grouprobe
