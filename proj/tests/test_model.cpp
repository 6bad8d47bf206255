#include <doctest.h>

#include <Eigen/Eigenvalues>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "grouprobe/model.hpp"
#include "oracles.hpp"

using namespace grouprobe;

namespace {

TrainedModel train_t6(double lambda = oracles::fixture_t6_lambda()) {
  const Dataset data = oracles::fixture_t6();
  TrainConfig config;
  config.lambda = lambda;
  return train(data, VectorXd::Ones(data.n()), config);
}

}  // namespace

TEST_CASE("opposite labels on the same point cancel at zero") {
  Dataset data;
  data.features.resize(2, 2);
  data.features << 1.0, -2.0, 1.0, -2.0;
  data.labels = {1, 0};
  data.base_weights = VectorXd::Ones(2);
  data.n_classes = 2;
  TrainConfig config;
  config.lambda = 0.3;
  const TrainedModel model = train(data, VectorXd::Ones(2), config);
  CHECK(model.theta.norm() <= 1e-10);
}

TEST_CASE("huge regularization pins the optimum near zero") {
  const Dataset data = oracles::fixture_t6();
  TrainConfig config;
  config.lambda = 1e9;
  const TrainedModel model = train(data, VectorXd::Ones(data.n()), config);
  // First-order optimality: lambda * ||theta|| <= sum of gradient norms <= n * max ||x||.
  double max_norm = 0.0;
  for (int i = 0; i < data.n(); ++i) max_norm = std::max(max_norm, data.features.row(i).norm());
  CHECK(model.theta.norm() <= data.n() * max_norm / 1e9);
}

TEST_CASE("1-D optimum matches a golden-section oracle") {
  Dataset data;
  data.features.resize(3, 1);
  data.features << 1.0, 2.0, -1.0;
  data.labels = {1, 1, 0};
  data.base_weights = VectorXd::Ones(3);
  data.n_classes = 2;
  TrainConfig config;
  config.lambda = 1.0;
  const TrainedModel model = train(data, VectorXd::Ones(3), config);

  const auto objective = [&](double t) {
    return oracles::ref_logistic(t) + oracles::ref_logistic(2.0 * t) +
           oracles::ref_logistic(t) + 0.5 * t * t;
  };
  const double oracle = oracles::golden_section(objective, -10.0, 10.0);
  CHECK(model.theta[0] == doctest::Approx(oracle).epsilon(1e-8));
}

TEST_CASE("trainer certificate meets the tolerance") {
  const Dataset data = oracles::fixture_t6();
  const TrainedModel model = train_t6();
  CHECK(model.grad_norm_at_opt <= 1e-10 * std::max(1, data.n()));
  const VectorXd residual = weighted_grad_sum(model, data, VectorXd::Ones(6)) +
                            model.lambda * model.theta;
  CHECK(residual.norm() <= 1e-10 * std::max(1, data.n()));
}

TEST_CASE("trainer reports non-convergence with the gradient norm") {
  const Dataset data = oracles::fixture_t6();
  TrainConfig config;
  config.lambda = 0.5;
  config.max_iterations = 0;
  try {
    train(data, VectorXd::Ones(6), config);
    FAIL("expected convergence error");
  } catch (const ConvergenceError& e) {
    CHECK(e.final_grad_norm > 0.0);
  }
}

TEST_CASE("point gradient closed forms") {
  const Dataset data = oracles::fixture_t6();
  const TrainedModel model = train_t6();

  SUBCASE("logistic at theta = 0 gives -x/2 for the positive class") {
    const VectorXd g = point_grad_at(model, data, 0, VectorXd::Zero(2));
    CHECK((g + 0.5 * data.features.row(0).transpose()).norm() <= 1e-15);
  }
  SUBCASE("squared loss with zero residual gives the zero vector") {
    Dataset one;
    one.features.resize(1, 2);
    one.features << 2.0, 0.0;
    one.labels = {1};
    one.base_weights = VectorXd::Ones(1);
    one.n_classes = 2;
    TrainedModel sq = model;
    sq.loss_kind = LossKind::Squared;
    VectorXd theta(2);
    theta << 0.5, 3.0;  // score = 1 = label
    CHECK(point_grad_at(sq, one, 0, theta).norm() == 0.0);
  }
  SUBCASE("matches central finite differences of the loss") {
    const VectorXd theta = model.theta;
    for (int i = 0; i < data.n(); ++i) {
      const VectorXd analytic = point_grad_at(model, data, i, theta);
      const double step = 1e-6 * (1.0 + theta.norm());
      const VectorXd fd = oracles::fd_gradient(
          [&](const VectorXd& t) { return point_loss_at(model, data, i, t); }, theta,
          step);
      CHECK((analytic - fd).norm() <= 1e-6 * std::max(1.0, analytic.norm()));
    }
  }
}

TEST_CASE("point hessian closed forms and consistency") {
  const Dataset data = oracles::fixture_t6();
  const TrainedModel model = train_t6();

  SUBCASE("logistic at theta = 0 gives xx^T / 4") {
    TrainedModel at_zero = model;
    at_zero.theta = VectorXd::Zero(2);
    const MatrixXd h = point_hess(at_zero, data, 1);
    const MatrixXd expected =
        0.25 * data.features.row(1).transpose() * data.features.row(1);
    CHECK((h - expected).norm() <= 1e-15);
  }
  SUBCASE("squared-loss curvature is constant in theta") {
    TrainedModel sq = model;
    sq.loss_kind = LossKind::Squared;
    VectorXd a = VectorXd::Zero(2), b = VectorXd::Constant(2, 5.0);
    CHECK((point_hess_at(sq, data, 2, a) - point_hess_at(sq, data, 2, b)).norm() == 0.0);
  }
  SUBCASE("matches finite differences of the gradient") {
    for (int i = 0; i < data.n(); ++i) {
      const MatrixXd analytic = point_hess(model, data, i);
      const MatrixXd fd = oracles::fd_jacobian(
          [&](const VectorXd& t) { return point_grad_at(model, data, i, t); },
          model.theta, 1e-6);
      CHECK((analytic - fd).norm() <= 1e-5 * std::max(1.0, analytic.norm()));
    }
  }
}

TEST_CASE("hessian assembly") {
  const Dataset data = oracles::fixture_t6();
  const TrainedModel model = train_t6();

  SUBCASE("full weights give a symmetric PD matrix with min eigenvalue >= lambda") {
    const MatrixXd h = hessian(model, data, VectorXd::Ones(6));
    CHECK((h - h.transpose()).norm() <= 1e-14);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(h);
    CHECK(eig.eigenvalues().minCoeff() >= model.lambda * (1.0 - 1e-12));
  }
  SUBCASE("zero weights leave only the ridge") {
    const MatrixXd h = hessian(model, data, VectorXd::Zero(6));
    CHECK((h - model.lambda * MatrixXd::Identity(2, 2)).norm() <= 1e-15);
  }
  SUBCASE("weights are additive across complementary halves") {
    VectorXd first = VectorXd::Zero(6), second = VectorXd::Zero(6);
    for (int i = 0; i < 6; ++i) (i < 3 ? first : second)[i] = 1.0;
    const MatrixXd whole = hessian(model, data, VectorXd::Ones(6));
    const MatrixXd sum = hessian_unregularized(model, data, first) +
                         hessian_unregularized(model, data, second) +
                         model.lambda * MatrixXd::Identity(2, 2);
    CHECK((whole - sum).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("blocked kernels agree with the serial reference") {
  const Dataset data = synth_gaussian_binary(400, 7, 0.8, 21);
  TrainConfig config;
  config.lambda = 0.5;
  const TrainedModel model = train(data, VectorXd::Ones(data.n()), config);
  VectorXd weights(data.n());
  for (int i = 0; i < data.n(); ++i) weights[i] = (i % 3 == 0) ? 0.5 : 1.0;

  const MatrixXd blocked = hessian_unregularized(model, data, weights);
  const MatrixXd serial = hessian_unregularized_serial(model, data, weights);
  CHECK((blocked - serial).cwiseAbs().maxCoeff() <=
        1e-12 * std::max(1.0, serial.cwiseAbs().maxCoeff()));

  const VectorXd gb = weighted_grad_sum(model, data, weights);
  const VectorXd gs = weighted_grad_sum_serial(model, data, weights);
  CHECK((gb - gs).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, gs.cwiseAbs().maxCoeff()));
}

#ifdef _OPENMP
TEST_CASE("blocked kernels are bit-identical at any thread count") {
  const Dataset data = synth_gaussian_binary(300, 6, 0.5, 33);
  TrainConfig config;
  config.lambda = 1.0;
  const TrainedModel model = train(data, VectorXd::Ones(data.n()), config);

  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const MatrixXd h1 = hessian_unregularized(model, data, VectorXd::Ones(data.n()));
  omp_set_num_threads(std::max(2, saved));
  const MatrixXd h2 = hessian_unregularized(model, data, VectorXd::Ones(data.n()));
  omp_set_num_threads(saved);
  CHECK((h1 - h2).cwiseAbs().maxCoeff() == 0.0);
}
#endif

TEST_CASE("softmax training and the class-shift direction") {
  Dataset data;
  data.features.resize(9, 2);
  data.features << 2.0, 0.1, 1.8, -0.2, 2.2, 0.0,
                  -0.1, 2.0, 0.2, 1.9, 0.0, 2.1,
                  -2.0, -2.0, -1.9, -2.1, -2.1, -1.8;
  data.labels = {0, 0, 0, 1, 1, 1, 2, 2, 2};
  data.base_weights = VectorXd::Ones(9);
  data.n_classes = 3;

  TrainConfig config;
  config.loss = LossKind::Softmax;
  config.lambda = 0.2;
  const TrainedModel model = train(data, VectorXd::Ones(9), config);
  CHECK(model.param_dim() == 6);
  CHECK(model.grad_norm_at_opt <= 1e-10 * 9);

  // Shifting every class block by the same vector leaves probabilities
  // unchanged, so the per-point Hessian annihilates that direction.
  const MatrixXd h = point_hess(model, data, 4);
  VectorXd shift(6);
  shift << 0.7, -0.3, 0.7, -0.3, 0.7, -0.3;
  CHECK((h * shift).norm() <= 1e-12);
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(h);
  CHECK(eig.eigenvalues().minCoeff() >= -1e-12);  // PSD

  // Gradient consistency holds for softmax as well.
  const VectorXd fd = oracles::fd_gradient(
      [&](const VectorXd& t) { return point_loss_at(model, data, 4, t); }, model.theta,
      1e-6 * (1.0 + model.theta.norm()));
  CHECK((point_grad(model, data, 4) - fd).norm() <= 1e-6);
}

TEST_CASE("margin losses refuse multiclass data") {
  Dataset data = oracles::fixture_t6();
  data.n_classes = 3;
  data.labels[5] = 2;
  TrainConfig config;
  config.lambda = 1.0;
  CHECK_THROWS_AS(train(data, VectorXd::Ones(6), config), ConfigError);
}

TEST_CASE("keep weights are validated") {
  const Dataset data = oracles::fixture_t6();
  TrainConfig config;
  config.lambda = 1.0;
  VectorXd keep = VectorXd::Ones(6);
  keep[3] = 1.5;
  CHECK_THROWS_AS(train(data, keep, config), DataError);
  keep[3] = -0.1;
  CHECK_THROWS_AS(train(data, keep, config), DataError);
  CHECK_THROWS_AS(train(data, VectorXd::Zero(6), config), DataError);
}

TEST_CASE("intercept is fitted but unregularized") {
  Dataset data = oracles::fixture_t6();
  // Shift every label's feature mass so the intercept actually matters.
  data.features.col(0).array() += 2.0;
  TrainConfig config;
  config.lambda = 0.5;
  config.intercept = true;
  const TrainedModel model = train(data, VectorXd::Ones(6), config);
  CHECK(model.param_dim() == 3);
  // Optimality with the ridge applied to the weights only.
  VectorXd residual = weighted_grad_sum(model, data, VectorXd::Ones(6));
  residual.head(2) += model.lambda * model.theta.head(2);
  CHECK(residual.norm() <= 1e-10 * 6);
}

TEST_CASE("checkpoint json round trips") {
  const TrainedModel model = train_t6();
  const std::string text = model.to_checkpoint_json();
  const TrainedModel back = TrainedModel::from_checkpoint_json(text);
  CHECK(back.lambda == model.lambda);
  CHECK(back.loss_kind == model.loss_kind);
  CHECK(back.intercept == model.intercept);
  CHECK((back.theta - model.theta).norm() == 0.0);
  CHECK(back.dataset_fingerprint == model.dataset_fingerprint);
}
