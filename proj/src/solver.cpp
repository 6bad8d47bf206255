#include "grouprobe/solver.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <mutex>

namespace grouprobe {

namespace {
std::mutex inv_sqrt_mutex;
}

HessianFactor::HessianFactor(MatrixXd matrix, double lambda)
    : matrix_(std::move(matrix)), lambda_(lambda), llt_(matrix_) {
  if (llt_.info() != Eigen::Success) {
    throw InternalError("Hessian factorization failed; matrix is not positive definite");
  }
}

VectorXd HessianFactor::solve(const VectorXd& rhs) const { return llt_.solve(rhs); }

VectorXd HessianFactor::solve_cg(const VectorXd& rhs, double tol, int max_iter) const {
  const int n = dim();
  if (max_iter < 0) max_iter = 10 * n;
  VectorXd x = VectorXd::Zero(n);
  VectorXd r = rhs;
  VectorXd p = r;
  double rr = r.squaredNorm();
  const double target = tol * tol * rhs.squaredNorm();
  if (rr <= target) return x;
  for (int it = 0; it < max_iter; ++it) {
    const VectorXd hp = matrix_ * p;
    const double alpha = rr / p.dot(hp);
    x += alpha * p;
    r -= alpha * hp;
    const double rr_next = r.squaredNorm();
    if (rr_next <= target) return x;
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  log_warn("conjugate gradient hit the iteration cap; residual " +
           format_double(std::sqrt(rr)));
  return x;
}

const MatrixXd& HessianFactor::inverse_sqrt() const {
  {
    std::lock_guard<std::mutex> lock(inv_sqrt_mutex);
    if (!inv_sqrt_) {
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(matrix_);
      if (eig.info() != Eigen::Success) {
        throw InternalError("eigendecomposition of the Hessian failed");
      }
      const double floor = lambda_ * (1.0 - 1e-12);
      VectorXd inv_roots = eig.eigenvalues();
      for (int i = 0; i < inv_roots.size(); ++i) {
        inv_roots[i] = 1.0 / std::sqrt(std::max(inv_roots[i], floor));
      }
      MatrixXd m = eig.eigenvectors() * inv_roots.asDiagonal() *
                   eig.eigenvectors().transpose();
      inv_sqrt_ = std::make_shared<const MatrixXd>(std::move(m));
    }
  }
  return *inv_sqrt_;
}

}  // namespace grouprobe
