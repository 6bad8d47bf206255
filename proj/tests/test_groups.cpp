#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>

#include "grouprobe/groups.hpp"
#include "grouprobe/rng.hpp"
#include "oracles.hpp"

using namespace grouprobe;

namespace {

struct Fixture {
  Dataset data;
  TrainedModel model;
  Fixture(int n_per_class = 200, int d = 5, std::uint64_t seed = 19) {
    data = synth_gaussian_binary(n_per_class, d, 0.8, seed);
    TrainConfig config;
    config.lambda = 1e-3 * data.n();
    model = train(data, VectorXd::Ones(data.n()), config);
  }
  std::vector<TestPoint> test_points(int count) const {
    const Dataset held = synth_gaussian_binary(50, data.d(), 0.8, 977);
    std::vector<TestPoint> points;
    for (int i = 0; i < count; ++i) {
      points.push_back({held.features.row(i).transpose(), held.labels[i]});
    }
    return points;
  }
};

}  // namespace

TEST_CASE("size grid and fraction mapping") {
  const std::vector<double> grid = default_size_grid();
  REQUIRE(grid.size() == 100);
  CHECK(grid.front() == doctest::Approx(0.0025));
  CHECK(grid.back() == doctest::Approx(0.25));
  for (std::size_t i = 1; i < grid.size(); ++i) {
    CHECK(grid[i] - grid[i - 1] ==
          doctest::Approx((0.25 - 0.0025) / 99.0).epsilon(1e-12));
  }
  CHECK(fraction_to_size(0.0025, 400) == 1);
  CHECK(fraction_to_size(0.25, 400) == 100);
  CHECK(fraction_to_size(1e-9, 400) == 1);  // floor of one point
}

TEST_CASE("shared-feature groups are windows in feature order") {
  const Fixture fx(50, 1, 5);  // one feature, so the sorted order is known
  GroupPlan plan;
  plan.seed = 3;
  plan.size_fractions = {0.05, 0.1, 0.2};
  const auto groups = shared_feature_groups(fx.data, plan);
  REQUIRE(groups.size() == 3);

  for (const SubsetWeights& g : groups) {
    const int s = g.support_size();
    // Brute-force oracle: some member anchors the group, and the group is
    // exactly that anchor's s nearest points in feature value.
    bool some_anchor_matches = false;
    for (int anchor : g.indices) {
      std::vector<int> order(static_cast<std::size_t>(fx.data.n()));
      std::iota(order.begin(), order.end(), 0);
      const double center = fx.data.features(anchor, 0);
      std::sort(order.begin(), order.end(), [&](int a, int b) {
        const double da = std::abs(fx.data.features(a, 0) - center);
        const double db = std::abs(fx.data.features(b, 0) - center);
        if (da != db) return da < db;
        return a < b;
      });
      std::set<int> nearest(order.begin(), order.begin() + s);
      if (std::set<int>(g.indices.begin(), g.indices.end()) == nearest) {
        some_anchor_matches = true;
        break;
      }
    }
    CHECK(some_anchor_matches);
  }
}

TEST_CASE("shared-feature degenerate sizes") {
  const Fixture fx(50, 2, 6);
  GroupPlan plan;
  plan.seed = 11;
  plan.size_fractions = {0.999 / 100.0, 0.999};  // size 1 and size n
  const auto groups = shared_feature_groups(fx.data, plan);
  REQUIRE(groups.size() == 2);
  CHECK(groups[0].support_size() == 1);
  CHECK(groups[1].support_size() == fx.data.n());
}

TEST_CASE("cluster groups obey the pigeonhole guarantee on the default grid") {
  const Fixture fx(150, 4, 7);
  GroupPlan plan;
  plan.seed = 23;
  plan.size_fractions = default_size_grid();
  const auto groups = cluster_groups(fx.data.features, fx.data, plan, "feature_cluster");
  CHECK(groups.size() == 100);  // k = 4 guarantees a >= 25% cluster
  for (const SubsetWeights& g : groups) {
    CHECK(g.method_tag == "feature_cluster");
  }
}

TEST_CASE("random groups") {
  const Fixture fx(60, 3, 9);
  SUBCASE("a full-size draw returns the whole dataset") {
    GroupPlan plan;
    plan.seed = 2;
    plan.size_fractions = {0.999};
    const auto groups = random_groups(fx.data, plan, false);
    REQUIRE(groups.size() == 1);
    CHECK(groups[0].support_size() == fx.data.n());
  }
  SUBCASE("within-class groups share one label") {
    GroupPlan plan;
    plan.seed = 4;
    plan.size_fractions = {0.05, 0.1, 0.25};
    const auto groups = random_groups(fx.data, plan, true);
    REQUIRE(groups.size() == 3);
    for (const SubsetWeights& g : groups) {
      std::set<int> labels;
      for (int i : g.indices) labels.insert(fx.data.labels[i]);
      CHECK(labels.size() == 1);
    }
  }
  SUBCASE("oversized within-class requests are skipped") {
    GroupPlan plan;
    plan.seed = 4;
    plan.size_fractions = {0.9};  // bigger than either class
    CHECK(random_groups(fx.data, plan, true).empty());
  }
}

TEST_CASE("sampling without replacement is uniform over pairs") {
  Rng rng(123);
  const int draws = 10000;
  std::map<std::pair<int, int>, int> counts;
  for (int r = 0; r < draws; ++r) {
    const std::vector<int> pick = rng.sample_indices(5, 2);
    ++counts[{pick[0], pick[1]}];
  }
  CHECK(counts.size() == 10);
  // Multinomial oracle: each pair has p = 1/10; allow 4 sigma.
  const double expected = draws / 10.0;
  const double sigma = std::sqrt(draws * 0.1 * 0.9);
  for (const auto& [pair, count] : counts) {
    CHECK(std::abs(count - expected) <= 4.0 * sigma);
  }
}

TEST_CASE("influence tail groups") {
  const Fixture fx(200, 5, 33);
  const auto tps = fx.test_points(1);
  GroupPlan plan;
  plan.seed = 77;
  plan.test_points = tps;
  const InfluenceEngine engine(fx.data, fx.model);

  const auto pos = influence_tail_groups(engine, tps[0], +1, plan, "pos_influence_tail_tp0");
  const auto neg = influence_tail_groups(engine, tps[0], -1, plan, "neg_influence_tail_tp0");
  CHECK(pos.size() == 100);
  CHECK(neg.size() == 100);

  // Independent rank recomputation for pool membership.
  const EvalFunction f = EvalFunction::test_loss(tps[0].x, *tps[0].label);
  const VectorXd influence = engine.pointwise_influence(f);
  std::vector<int> ranked(static_cast<std::size_t>(fx.data.n()));
  std::iota(ranked.begin(), ranked.end(), 0);
  std::sort(ranked.begin(), ranked.end(), [&](int a, int b) {
    if (influence[a] != influence[b]) return influence[a] > influence[b];
    return a < b;
  });
  const int stage_sizes[3] = {33, 33, 34};
  const double stage_fracs[3] = {0.025, 0.10, 0.25};
  std::size_t at = 0;
  for (int stage = 0; stage < 3; ++stage) {
    const int pool =
        static_cast<int>(std::llround(1.5 * stage_fracs[stage] * fx.data.n()));
    std::set<int> allowed(ranked.begin(), ranked.begin() + pool);
    for (int gi = 0; gi < stage_sizes[stage]; ++gi, ++at) {
      for (int member : pos[at].indices) {
        CHECK(allowed.count(member) == 1);
      }
    }
  }

  // Positive-tail groups push the test loss up on this fixture.
  for (std::size_t gi = 0; gi < pos.size(); gi += 17) {
    CHECK(engine.group_influence(pos[gi], f) >= 0.0);
  }
}

TEST_CASE("full default plan emits the complete family set") {
  const Fixture fx(200, 5, 51);
  GroupPlan plan;
  plan.seed = 13;
  plan.size_fractions = default_size_grid();
  plan.test_points = fx.test_points(6);
  const auto groups = build_groups(fx.data, fx.model, plan);
  // 5 base methods x 100 sizes + 2 tails x 6 test points x 100 sizes.
  CHECK(groups.size() == 1700);

  std::set<int> ids;
  for (const SubsetWeights& g : groups) {
    CHECK(g.binary());
    CHECK(!g.method_tag.empty());
    CHECK(g.support_size() >= 1);
    CHECK(std::abs(g.alpha - static_cast<double>(g.support_size()) / fx.data.n()) <=
          1e-12);
    ids.insert(g.id);
  }
  CHECK(ids.size() == groups.size());  // sequential unique ids
  CHECK(*ids.begin() == 0);
  CHECK(*ids.rbegin() == static_cast<int>(groups.size()) - 1);
}

TEST_CASE("group construction is deterministic per seed") {
  const Fixture fx(80, 3, 88);
  GroupPlan plan;
  plan.seed = 5;
  plan.size_fractions = {0.02, 0.1, 0.2};
  plan.methods = {GroupMethod::SharedFeature, GroupMethod::FeatureCluster,
                  GroupMethod::Random};
  const auto a = build_groups(fx.data, fx.model, plan);
  const auto b = build_groups(fx.data, fx.model, plan);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].indices == b[i].indices);
    CHECK(a[i].method_tag == b[i].method_tag);
  }
  GroupPlan other = plan;
  other.seed = 6;
  const auto c = build_groups(fx.data, fx.model, other);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].indices != c[i].indices) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("groups serialize to json lines and back") {
  const Fixture fx(40, 3, 14);
  GroupPlan plan;
  plan.seed = 9;
  plan.size_fractions = {0.05, 0.15};
  plan.methods = {GroupMethod::Random};
  const auto groups = build_groups(fx.data, fx.model, plan);
  const auto path = std::filesystem::temp_directory_path() / "gp_groups.jsonl";
  write_groups_jsonl(path.string(), groups);
  const auto back = read_groups_jsonl(path.string(), fx.data);
  REQUIRE(back.size() == groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    CHECK(back[i].id == groups[i].id);
    CHECK(back[i].indices == groups[i].indices);
    CHECK(back[i].method_tag == groups[i].method_tag);
  }
}

TEST_CASE("plans validate their inputs") {
  GroupPlan plan;
  plan.size_fractions = {0.5, 1.5};
  CHECK_THROWS_AS(plan.validate(), ConfigError);

  GroupPlan tails;
  tails.size_fractions = {0.1};
  tails.methods = {GroupMethod::PosInfluenceTail};
  CHECK_THROWS_AS(tails.validate(), ConfigError);  // no test points
}
