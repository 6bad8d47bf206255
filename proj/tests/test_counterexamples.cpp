#include <doctest.h>

#include <cmath>

#include "grouprobe/counterexamples.hpp"
#include "oracles.hpp"

using namespace grouprobe;

namespace {
constexpr std::uint64_t kPinnedMogSeed = 20250808;
}

TEST_CASE("mog construction decorrelates influence and newton effects") {
  const MogResult mog = gen_mog(kPinnedMogSeed);

  CHECK(mog.data.n() == 120);
  CHECK(mog.data.d() == 60);
  CHECK(mog.model.lambda == doctest::Approx(0.001));
  REQUIRE(mog.subsets.size() == 120);
  for (const SubsetWeights& w : mog.subsets) {
    CHECK(w.support_size() == 2);
    CHECK(w.binary());
  }
  CHECK(std::abs(mog.pearson) <= 0.2);
  CHECK(mog.sign_flip);
  CHECK(mog.attempts <= 5);
  CHECK(std::abs(mog.x_test.norm() - 1.0) <= 1e-12);

  // The recorded effects are reproducible from the stored pieces.
  const InfluenceEngine influence(mog.data, mog.model);
  const NewtonEngine newton(influence);
  const EvalFunction f = EvalFunction::test_prediction(mog.x_test);
  for (std::size_t i = 0; i < mog.subsets.size(); i += 23) {
    CHECK(mog.effects[i].first ==
          doctest::Approx(influence.group_influence(mog.subsets[i], f)).epsilon(1e-10));
    CHECK(mog.effects[i].second ==
          doctest::Approx(newton.newton_effect(mog.subsets[i], f)).epsilon(1e-10));
  }
}

TEST_CASE("ortho construction pins the two-slope structure") {
  const OrthoResult ortho = gen_ortho(default_ortho_config(), default_ortho_lambda());

  CHECK(ortho.x_test == VectorXd::Ones(2));
  REQUIRE(ortho.subsets.size() == ortho.effects.size());
  REQUIRE(ortho.subsets.size() == ortho.scale_factors.size());

  SUBCASE("closed-form equality holds on every emitted subset") {
    for (std::size_t i = 0; i < ortho.subsets.size(); ++i) {
      const double expected = ortho.scale_factors[i] * ortho.effects[i].first;
      CHECK(std::abs(ortho.effects[i].second - expected) <= 1e-10);
    }
  }
  SUBCASE("the two axes produce distinct scale factors") {
    double axis0 = 0.0, axis1 = 0.0;
    for (std::size_t i = 0; i < ortho.subsets.size(); ++i) {
      if (ortho.subsets[i].method_tag.rfind("ortho_axis0", 0) == 0) {
        axis0 = std::max(axis0, ortho.scale_factors[i]);
      } else {
        axis1 = std::max(axis1, ortho.scale_factors[i]);
      }
    }
    CHECK(axis0 > 1.05);
    CHECK(std::abs(axis1 - 1.0) <= 1e-4);
  }
  SUBCASE("scale factors stay within the lemma band") {
    for (double d : ortho.scale_factors) CHECK(d >= 1.0);
  }
}

TEST_CASE("orthogonal axes keep their scale factors independent") {
  auto config_a = default_ortho_config();
  auto config_b = config_a;
  config_b[0].multiplicity += 3;  // change only the other axis
  const OrthoResult a = gen_ortho(config_a, default_ortho_lambda());
  const OrthoResult b = gen_ortho(config_b, default_ortho_lambda());

  auto axis1_scales = [](const OrthoResult& r) {
    std::vector<double> out;
    for (std::size_t i = 0; i < r.subsets.size(); ++i) {
      if (r.subsets[i].method_tag.rfind("ortho_axis1_pos", 0) == 0) {
        out.push_back(r.scale_factors[i]);
      }
    }
    return out;
  };
  const auto sa = axis1_scales(a);
  const auto sb = axis1_scales(b);
  REQUIRE(sa.size() == sb.size());
  for (std::size_t i = 0; i < sa.size(); ++i) {
    CHECK(sa[i] == doctest::Approx(sb[i]).epsilon(1e-8));
  }
}

TEST_CASE("ortho validates its configuration") {
  auto bad = default_ortho_config();
  bad[0].distance = -1.0;
  CHECK_THROWS_AS(gen_ortho(bad, 0.1), ConfigError);
  bad = default_ortho_config();
  bad[1].multiplicity = 0;
  CHECK_THROWS_AS(gen_ortho(bad, 0.1), ConfigError);
}
