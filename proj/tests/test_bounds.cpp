#include <doctest.h>

#include "grouprobe/bounds.hpp"
#include "grouprobe/retrain.hpp"
#include "grouprobe/rng.hpp"
#include "oracles.hpp"

using namespace grouprobe;

namespace {

TrainedModel train_simple(const Dataset& data, LossKind loss, double lambda) {
  TrainConfig config;
  config.loss = loss;
  config.lambda = lambda;
  return train(data, VectorXd::Ones(data.n()), config);
}

}  // namespace

TEST_CASE("spectral constants") {
  SUBCASE("fixture eigenvalues match the characteristic-polynomial oracle") {
    const Dataset data = oracles::fixture_t6();
    const TrainedModel model = train_simple(data, LossKind::LogisticMargin, 0.5);
    const BoundConstants c = model_constants(model, data);
    const MatrixXd h1 = hessian_unregularized_serial(model, data, VectorXd::Ones(6));
    const auto [lo, hi] = oracles::eig_sym_2x2(h1);
    CHECK(c.sigma_min == doctest::Approx(lo).epsilon(1e-12));
    CHECK(c.sigma_max == doctest::Approx(hi).epsilon(1e-12));
  }
  SUBCASE("a single point has rank-one curvature") {
    Dataset data;
    data.features.resize(1, 3);
    data.features << 1.0, -2.0, 0.5;
    data.labels = {1};
    data.base_weights = VectorXd::Ones(1);
    data.n_classes = 2;
    const TrainedModel model = train_simple(data, LossKind::LogisticMargin, 1.0);
    const BoundConstants c = model_constants(model, data);
    const double margin = data.features.row(0).dot(model.theta);
    CHECK(c.sigma_max ==
          doctest::Approx(logistic::d2(margin) * data.features.row(0).squaredNorm())
              .epsilon(1e-12));
    CHECK(std::abs(c.sigma_min) <= 1e-12);
  }
  SUBCASE("squared loss has zero Hessian-Lipschitz constant") {
    const Dataset data = oracles::fixture_t6();
    const TrainedModel model = train_simple(data, LossKind::Squared, 1.0);
    CHECK(model_constants(model, data).c_hess_lip == 0.0);
  }
}

TEST_CASE("newton error bound formula") {
  BoundConstants c;
  c.sigma_min = 0.5;
  c.sigma_max = 4.0;
  c.c_grad_max = 2.0;
  c.c_f = 3.0;
  c.c_hess_lip = 0.25;
  c.lambda = 1.5;
  c.n_points = 10;

  SUBCASE("hand arithmetic") {
    // 10 * 4^2 * 3 * 0.25 * 2^2 / (0.5 + 1.5)^3 = 480 / 8 = 60.
    CHECK(newton_error_bound(c, 4.0) == doctest::Approx(60.0).epsilon(1e-12));
  }
  SUBCASE("zero mass gives a zero bound") { CHECK(newton_error_bound(c, 0.0) == 0.0); }
  SUBCASE("zero curvature constant gives a zero bound") {
    c.c_hess_lip = 0.0;
    CHECK(newton_error_bound(c, 4.0) == 0.0);
  }
}

TEST_CASE("prop-1 style bound dominates the observed error on a fixture") {
  const Dataset data = synth_gaussian_binary(60, 4, 0.7, 3);
  const TrainedModel model = train_simple(data, LossKind::LogisticMargin, 2.0);
  const InfluenceEngine influence(data, model);
  const NewtonEngine newton(influence);
  const BoundConstants base = model_constants(model, data);

  VectorXd x_test(4);
  x_test << 0.5, -0.2, 1.0, 0.3;
  const std::vector<EvalFunction> fs = {EvalFunction::test_prediction(x_test),
                                        EvalFunction::test_loss(x_test, 1)};
  Rng rng(6);
  for (const EvalFunction& f : fs) {
    const BoundConstants c = with_eval_function(base, model, data, f);
    for (int rep = 0; rep < 20; ++rep) {
      const SubsetWeights w = SubsetWeights::from_indices(
          rng.sample_indices(data.n(), 1 + rng.index(30)), data, "b");
      const double nt = newton.newton_effect(w, f);
      const double act = actual_effect(model, data, w, f);
      CHECK(std::abs(act - nt) <= newton_error_bound(c, w.removed_mass(data)));
    }
  }
}

TEST_CASE("self-loss cone") {
  SUBCASE("upper slope by direct substitution") {
    BoundConstants c;
    c.sigma_max = 2.0;
    c.lambda = 1.0;
    CHECK(selfloss_cone(c).upper_slope == doctest::Approx(6.0).epsilon(1e-14));
  }
  SUBCASE("huge regularization flattens the cone") {
    BoundConstants c;
    c.sigma_max = 3.0;
    c.lambda = 1e6 * c.sigma_max;
    CHECK(selfloss_cone(c).upper_slope <= 1.0 + 2e-6);
  }
  SUBCASE("upper slope decreases in lambda") {
    BoundConstants c;
    c.sigma_max = 5.0;
    double prev = std::numeric_limits<double>::infinity();
    for (double lambda : {0.1, 0.5, 1.0, 5.0, 25.0}) {
      c.lambda = lambda;
      const double slope = selfloss_cone(c).upper_slope;
      CHECK(slope < prev);
      prev = slope;
    }
  }
  SUBCASE("containment holds across random subsets") {
    const Dataset data = synth_gaussian_binary(50, 3, 0.6, 8);
    const TrainedModel model = train_simple(data, LossKind::LogisticMargin, 1.0);
    const InfluenceEngine influence(data, model);
    const NewtonEngine newton(influence);
    const BoundConstants base = model_constants(model, data);
    const EvalFunction f = EvalFunction::self_loss();
    Rng rng(15);
    for (int rep = 0; rep < 100; ++rep) {
      const SubsetWeights w = SubsetWeights::from_indices(
          rng.sample_indices(data.n(), 1 + rng.index(25)), data, "c");
      const double inf = influence.group_influence(w, f);
      const VectorXd delta = newton.newton_delta(w);
      const double nt = newton.newton_effect_from_delta(w, f, delta);
      const BoundConstants c = with_eval_function(base, model, data, f, &w, &delta);
      const SelfLossCone cone = selfloss_cone(c);
      const double slack = cone.slack(w.removed_mass(data));
      CHECK(nt >= inf - slack - 1e-12);
      CHECK(nt <= cone.upper_slope * inf + slack + 1e-12);
    }
  }
}

TEST_CASE("self-loss constants are flagged local and need their subset") {
  const Dataset data = oracles::fixture_t6();
  const TrainedModel model = train_simple(data, LossKind::LogisticMargin, 0.5);
  const EvalFunction f = EvalFunction::self_loss();
  CHECK_THROWS_AS(compute_constants(model, data, f), ConfigError);
  const SubsetWeights w = SubsetWeights::from_indices({0, 2}, data, "t");
  const BoundConstants c = compute_constants(model, data, f, &w);
  CHECK(c.f_constants_local);
  CHECK(c.c_f > 0.0);
  CHECK(c.c_f3 > 0.0);
}
