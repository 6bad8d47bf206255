#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "grouprobe/bounds.hpp"
#include "grouprobe/retrain.hpp"
#include "grouprobe/rng.hpp"
#include "oracles.hpp"

using namespace grouprobe;

namespace {

struct T6 {
  Dataset data = oracles::fixture_t6();
  TrainedModel model;
  InfluenceEngine influence;
  NewtonEngine newton;
  T6()
      : model([&] {
          TrainConfig config;
          config.lambda = oracles::fixture_t6_lambda();
          return train(data, VectorXd::Ones(data.n()), config);
        }()),
        influence(data, model),
        newton(influence) {}
};

SubsetWeights subset_of(const Dataset& data, std::vector<int> idx) {
  return SubsetWeights::from_indices(std::move(idx), data, "test");
}

}  // namespace

TEST_CASE("newton step basics") {
  const T6 t;

  SUBCASE("empty subset gives the zero step") {
    CHECK(t.newton.newton_delta(subset_of(t.data, {})).norm() == 0.0);
  }
  SUBCASE("matches the dense-solve oracle on the fixture") {
    const SubsetWeights w = subset_of(t.data, {1, 4});
    const VectorXd delta = t.newton.newton_delta(w);
    MatrixXd h = hessian(t.model, t.data, w.keep_vector(6));
    const VectorXd g = weighted_grad_sum_serial(t.model, t.data, w.dense(6));
    const VectorXd oracle = oracles::gauss_jordan_solve(h, g);
    CHECK((delta - oracle).norm() <= 1e-10);
  }
}

TEST_CASE("quadratic loss makes the one-step update exact") {
  const Dataset data = synth_gaussian_binary(40, 4, 0.7, 13);
  TrainConfig config;
  config.loss = LossKind::Squared;
  config.lambda = 3.0;
  const TrainedModel model = train(data, VectorXd::Ones(data.n()), config);
  const InfluenceEngine influence(data, model);
  const NewtonEngine newton(influence);

  Rng rng(4);
  for (int rep = 0; rep < 10; ++rep) {
    const SubsetWeights w = SubsetWeights::from_indices(
        rng.sample_indices(data.n(), 1 + rng.index(data.n() / 4)), data, "rand");
    const VectorXd delta = newton.newton_delta(w);
    const VectorXd retrained = retrain_parameters(model, data, w);
    CHECK((retrained - model.theta - delta).norm() <= 1e-8);
  }
}

TEST_CASE("newton effect identities") {
  const T6 t;
  const EvalFunction f_pred = EvalFunction::test_prediction(oracles::fixture_t6_test_x());

  SUBCASE("empty subset has no effect") {
    CHECK(t.newton.newton_effect(subset_of(t.data, {}), f_pred) == 0.0);
  }
  SUBCASE("linear evaluation equals the step's projection") {
    const SubsetWeights w = subset_of(t.data, {0, 2, 5});
    const double via_delta = oracles::fixture_t6_test_x().dot(t.newton.newton_delta(w));
    CHECK(t.newton.newton_effect(w, f_pred) ==
          doctest::Approx(via_delta).epsilon(1e-12));
  }
  SUBCASE("self-loss newton dominates the influence up to the cone slack") {
    const SubsetWeights w = subset_of(t.data, {1, 3});
    const EvalFunction f = EvalFunction::self_loss();
    const double inf = t.influence.group_influence(w, f);
    const double nt = t.newton.newton_effect(w, f);
    const VectorXd delta = t.newton.newton_delta(w);
    const BoundConstants constants = compute_constants(t.model, t.data, f, &w, &delta);
    const SelfLossCone cone = selfloss_cone(constants);
    const double slack = cone.slack(w.removed_mass(t.data));
    CHECK(nt >= inf - slack - 1e-12);
    CHECK(nt <= cone.upper_slope * inf + slack + 1e-12);
  }
}

TEST_CASE("error matrix spectrum") {
  const T6 t;

  SUBCASE("empty subset gives the zero matrix") {
    CHECK(t.newton.error_matrix_spectrum(subset_of(t.data, {})).cwiseAbs().maxCoeff() ==
          0.0);
  }
  SUBCASE("eigenvalues stay inside the lemma band") {
    const BoundConstants constants = model_constants(t.model, t.data);
    const double top = constants.sigma_max / t.model.lambda;
    for (auto idx : {std::vector<int>{0}, {2, 3}, {0, 1, 2, 3}, {0, 1, 2, 3, 4, 5}}) {
      const VectorXd eigs = t.newton.error_matrix_spectrum(subset_of(t.data, idx));
      CHECK(eigs.minCoeff() >= -1e-8);
      CHECK(eigs.maxCoeff() <= top + 1e-8);
    }
  }
  SUBCASE("single-point removal is rank one with eigenvalue d(w) - 1") {
    for (int k = 0; k < 6; ++k) {
      const VectorXd eigs = t.newton.error_matrix_spectrum(subset_of(t.data, {k}));
      // Sherman-Morrison: one nonzero eigenvalue, the closed-form scale
      // factor minus one.
      const double d = t.newton.single_point_scale(k, 1);
      CHECK(std::abs(eigs[0]) <= 1e-12);
      CHECK(eigs[1] == doctest::Approx(d - 1.0).epsilon(1e-10));
    }
  }
  SUBCASE("spectrum grows with nested removals") {
    Rng rng(17);
    for (int rep = 0; rep < 10; ++rep) {
      const std::vector<int> big = rng.sample_indices(6, 4);
      std::vector<int> small(big.begin(), big.begin() + 2);
      const VectorXd eig_small = t.newton.error_matrix_spectrum(subset_of(t.data, small));
      const VectorXd eig_big = t.newton.error_matrix_spectrum(subset_of(t.data, big));
      for (int i = 0; i < eig_small.size(); ++i) {
        CHECK(eig_big[i] >= eig_small[i] - 1e-10);
      }
    }
  }
}

TEST_CASE("single point scale factor") {
  const T6 t;

  SUBCASE("a zero feature row removes no curvature") {
    Dataset data = t.data;
    data.features.row(5).setZero();
    TrainConfig config;
    config.lambda = t.model.lambda;
    const TrainedModel model = train(data, VectorXd::Ones(6), config);
    const InfluenceEngine influence(data, model);
    const NewtonEngine newton(influence);
    CHECK(newton.single_point_scale(5, 1) == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("closed form matches the solve-based newton effect") {
    const EvalFunction f = EvalFunction::test_prediction(oracles::fixture_t6_test_x());
    for (int k = 0; k < 6; ++k) {
      const SubsetWeights w = subset_of(t.data, {k});
      const double d = t.newton.single_point_scale(k, 1);
      const double inf = t.influence.group_influence(w, f);
      const double nt = t.newton.newton_effect(w, f);
      CHECK(std::abs(nt - d * inf) <= 1e-10);
    }
  }
  SUBCASE("scale factor sits in the lemma band") {
    const BoundConstants constants = model_constants(t.model, t.data);
    for (int k = 0; k < 6; ++k) {
      const double d = t.newton.single_point_scale(k, 1);
      CHECK(d >= 1.0);
      CHECK(d <= 1.0 + constants.sigma_max / t.model.lambda + 1e-9);
    }
  }
  SUBCASE("removal past the training mass is an error") {
    CHECK_THROWS_WITH_AS(t.newton.single_point_scale(0, 1000),
                         "removal exceeds training mass in this direction", DataError);
  }
}

TEST_CASE("error decomposition is exact arithmetic") {
  const T6 t;
  const EvalFunction f =
      EvalFunction::test_loss(oracles::fixture_t6_test_x(), oracles::fixture_t6_test_y());
  const SubsetWeights w = subset_of(t.data, {0, 3, 4});
  const double influence = t.influence.group_influence(w, f);
  const double newton_val = t.newton.newton_effect(w, f);
  const double actual = actual_effect(t.model, t.data, w, f);
  const auto [err_nt_act, err_nt_inf] =
      NewtonEngine::decompose_error(influence, newton_val, actual);
  CHECK(err_nt_inf == newton_val - influence);
  CHECK(err_nt_act == actual - newton_val);
  CHECK(std::abs(err_nt_act + err_nt_inf - (actual - influence)) <= 1e-12);

  const auto zero = NewtonEngine::decompose_error(0.0, 0.0, 0.0);
  CHECK(zero.first == 0.0);
  CHECK(zero.second == 0.0);
}

TEST_CASE("quadratic losses have zero newton-actual error") {
  const Dataset data = synth_gaussian_binary(30, 3, 0.4, 23);
  TrainConfig config;
  config.loss = LossKind::Squared;
  config.lambda = 2.0;
  const TrainedModel model = train(data, VectorXd::Ones(data.n()), config);
  const InfluenceEngine influence(data, model);
  const NewtonEngine newton(influence);
  VectorXd x_test(3);
  x_test << 0.4, -1.0, 0.2;
  const EvalFunction f = EvalFunction::test_prediction(x_test);

  const SubsetWeights w = SubsetWeights::from_indices({3, 11, 40}, data, "q");
  const double nt = newton.newton_effect(w, f);
  const double act = actual_effect(model, data, w, f);
  CHECK(std::abs(act - nt) <= 1e-8);
}

TEST_CASE("engines handle an unregularized intercept") {
  Dataset data = oracles::fixture_t6();
  data.features.col(0).array() += 1.5;  // make the intercept matter
  TrainConfig config;
  config.lambda = 0.8;
  config.intercept = true;
  const TrainedModel model = train(data, VectorXd::Ones(6), config);
  const InfluenceEngine influence(data, model);
  const NewtonEngine newton(influence);
  const EvalFunction f =
      EvalFunction::test_loss(oracles::fixture_t6_test_x(), oracles::fixture_t6_test_y());
  const SubsetWeights w = subset_of(data, {1, 4});

  // Augmented dimensions line up end to end.
  CHECK(influence.param_influence_delta(w).size() == 3);
  CHECK(newton.newton_delta(w).size() == 3);

  // The interpolation endpoint reproduces the actual effect and the Newton
  // value sits between influence and actual on this fixture.
  const double actual = actual_effect(model, data, w, f);
  CHECK(influence.interpolated_effect(w, f, 1.0) ==
        doctest::Approx(actual).epsilon(1e-10));
  const double inf = influence.group_influence(w, f);
  const double nt = newton.newton_effect(w, f);
  CHECK(std::abs(nt - actual) < std::abs(inf - actual) + 1e-12);

  // Single-point closed form still matches the solve route.
  const EvalFunction pred = EvalFunction::test_prediction(oracles::fixture_t6_test_x());
  for (int k = 0; k < 6; ++k) {
    const SubsetWeights single = subset_of(data, {k});
    const double d = newton.single_point_scale(k, 1);
    CHECK(std::abs(newton.newton_effect(single, pred) -
                   d * influence.group_influence(single, pred)) <= 1e-10);
  }
}

TEST_CASE("structural identity for the test-prediction gap") {
  const T6 t;
  const EvalFunction f = EvalFunction::test_prediction(oracles::fixture_t6_test_x());
  for (auto idx : {std::vector<int>{0}, {1, 2}, {0, 3, 4, 5}}) {
    const SubsetWeights w = subset_of(t.data, idx);
    const double err_nt_inf =
        t.newton.newton_effect(w, f) - t.influence.group_influence(w, f);
    const NewtonDiagnostics diag = t.newton.diagnostics(w, &f);
    const double via_matrix = diag.v_test.dot(t.newton.error_matrix(w) * diag.v_subset);
    CHECK(std::abs(err_nt_inf - via_matrix) <= 1e-10);
  }
}
