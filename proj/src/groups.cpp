#include "grouprobe/groups.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "grouprobe/clustering.hpp"
#include "grouprobe/rng.hpp"

namespace grouprobe {

std::string group_method_name(GroupMethod method) {
  switch (method) {
    case GroupMethod::SharedFeature: return "shared_feature";
    case GroupMethod::FeatureCluster: return "feature_cluster";
    case GroupMethod::GradientCluster: return "gradient_cluster";
    case GroupMethod::RandomWithinClass: return "random_within_class";
    case GroupMethod::Random: return "random";
    case GroupMethod::PosInfluenceTail: return "pos_influence_tail";
    case GroupMethod::NegInfluenceTail: return "neg_influence_tail";
  }
  throw InternalError("unknown group method");
}

GroupMethod group_method_from_name(const std::string& name) {
  for (GroupMethod m : all_group_methods()) {
    if (group_method_name(m) == name) return m;
  }
  throw ConfigError("unknown group method '" + name + "'");
}

std::vector<GroupMethod> all_group_methods() {
  return {GroupMethod::SharedFeature,   GroupMethod::FeatureCluster,
          GroupMethod::GradientCluster, GroupMethod::RandomWithinClass,
          GroupMethod::Random,          GroupMethod::PosInfluenceTail,
          GroupMethod::NegInfluenceTail};
}

std::vector<double> linspace(double lo, double hi, int count) {
  std::vector<double> out(static_cast<std::size_t>(count));
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  for (int i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
  }
  return out;
}

std::vector<double> default_size_grid() { return linspace(0.0025, 0.25, 100); }

int fraction_to_size(double fraction, int n) {
  const int s = static_cast<int>(std::llround(fraction * n));
  return std::clamp(s, 1, n);
}

void GroupPlan::validate() const {
  for (double f : size_fractions) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("size fractions must lie in (0,1)");
  }
  const bool wants_tails =
      std::any_of(methods.begin(), methods.end(), [](GroupMethod m) {
        return m == GroupMethod::PosInfluenceTail || m == GroupMethod::NegInfluenceTail;
      });
  if (wants_tails && test_points.empty()) {
    throw ConfigError("influence-tail groups require test points");
  }
}

namespace {

// Stream ids keep each family's draws independent of which other families run.
Rng method_rng(const GroupPlan& plan, GroupMethod method, int test_point_index = 0) {
  const auto mi = static_cast<std::uint64_t>(method);
  return Rng(mix_seed(plan.seed, mi * 1024 + static_cast<std::uint64_t>(test_point_index)));
}

std::vector<double> plan_fractions(const GroupPlan& plan) {
  return plan.size_fractions.empty() ? default_size_grid() : plan.size_fractions;
}

}  // namespace

std::vector<SubsetWeights> shared_feature_groups(const Dataset& data,
                                                 const GroupPlan& plan) {
  Rng rng = method_rng(plan, GroupMethod::SharedFeature);
  std::vector<SubsetWeights> groups;
  const int n = data.n();
  for (double fraction : plan_fractions(plan)) {
    const int size = fraction_to_size(fraction, n);
    const int feature = rng.index(data.d());
    const int anchor = rng.index(n);
    const double center = data.features(anchor, feature);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      const double da = std::abs(data.features(a, feature) - center);
      const double db = std::abs(data.features(b, feature) - center);
      if (da != db) return da < db;
      return a < b;
    });
    order.resize(static_cast<std::size_t>(size));
    groups.push_back(SubsetWeights::from_indices(std::move(order), data,
                                                 group_method_name(GroupMethod::SharedFeature)));
  }
  return groups;
}

std::vector<SubsetWeights> cluster_groups(const MatrixRM& representation,
                                          const Dataset& data, const GroupPlan& plan,
                                          const std::string& tag) {
  if (representation.rows() != data.n()) {
    throw DataError("cluster representation must have one row per training point");
  }
  const GroupMethod method =
      tag == group_method_name(GroupMethod::GradientCluster) ? GroupMethod::GradientCluster
                                                             : GroupMethod::FeatureCluster;
  Rng rng = method_rng(plan, method);

  std::vector<std::vector<int>> pool =
      single_linkage_inconsistent(representation, 1.0, 2);
  for (int k : {4, 8, 16, 32, 64, 128}) {
    auto clusters = kmeans_clusters(representation, k, rng);
    pool.insert(pool.end(), std::make_move_iterator(clusters.begin()),
                std::make_move_iterator(clusters.end()));
  }

  std::vector<SubsetWeights> groups;
  for (double fraction : plan_fractions(plan)) {
    const int size = fraction_to_size(fraction, data.n());
    std::vector<int> eligible;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      if (static_cast<int>(pool[c].size()) >= size) eligible.push_back(static_cast<int>(c));
    }
    if (eligible.empty()) {
      log_warn(tag + ": no cluster holds " + std::to_string(size) + " points; size skipped");
      continue;
    }
    const std::vector<int>& cluster =
        pool[static_cast<std::size_t>(eligible[rng.index(static_cast<int>(eligible.size()))])];
    std::vector<int> members;
    for (int pos : rng.sample_indices(static_cast<int>(cluster.size()), size)) {
      members.push_back(cluster[static_cast<std::size_t>(pos)]);
    }
    groups.push_back(SubsetWeights::from_indices(std::move(members), data, tag));
  }
  return groups;
}

std::vector<SubsetWeights> random_groups(const Dataset& data, const GroupPlan& plan,
                                         bool within_class) {
  const GroupMethod method =
      within_class ? GroupMethod::RandomWithinClass : GroupMethod::Random;
  Rng rng = method_rng(plan, method);
  std::vector<std::vector<int>> class_members;
  if (within_class) {
    class_members.resize(static_cast<std::size_t>(data.n_classes));
    for (int i = 0; i < data.n(); ++i) {
      class_members[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])]
          .push_back(i);
    }
  }

  std::vector<SubsetWeights> groups;
  for (double fraction : plan_fractions(plan)) {
    const int size = fraction_to_size(fraction, data.n());
    if (!within_class) {
      groups.push_back(SubsetWeights::from_indices(rng.sample_indices(data.n(), size),
                                                   data, group_method_name(method)));
      continue;
    }
    std::vector<int> eligible;
    for (std::size_t c = 0; c < class_members.size(); ++c) {
      if (static_cast<int>(class_members[c].size()) >= size) {
        eligible.push_back(static_cast<int>(c));
      }
    }
    if (eligible.empty()) {
      log_warn("random_within_class: no class holds " + std::to_string(size) +
               " points; size skipped");
      continue;
    }
    const std::vector<int>& members =
        class_members[static_cast<std::size_t>(eligible[rng.index(static_cast<int>(eligible.size()))])];
    std::vector<int> chosen;
    for (int pos : rng.sample_indices(static_cast<int>(members.size()), size)) {
      chosen.push_back(members[static_cast<std::size_t>(pos)]);
    }
    groups.push_back(SubsetWeights::from_indices(std::move(chosen), data,
                                                 group_method_name(method)));
  }
  return groups;
}

namespace {

struct TailStage {
  int n_sizes;
  double max_fraction;
};

constexpr TailStage kTailStages[] = {{33, 0.025}, {33, 0.10}, {34, 0.25}};
constexpr double kTailMinFraction = 0.0025;
constexpr double kTailPoolFactor = 1.5;

}  // namespace

std::vector<SubsetWeights> influence_tail_groups(const InfluenceEngine& engine,
                                                 const TestPoint& test_point, int sign,
                                                 const GroupPlan& plan,
                                                 const std::string& tag) {
  if (!test_point.label.has_value()) {
    throw ConfigError("influence-tail groups need a labeled test point");
  }
  const Dataset& data = engine.dataset();
  const EvalFunction f = EvalFunction::test_loss(test_point.x, *test_point.label);
  const VectorXd influence = engine.pointwise_influence(f);

  // Rank by signed influence on the test loss; sign > 0 puts the most
  // positive points first.
  std::vector<int> ranked(static_cast<std::size_t>(data.n()));
  std::iota(ranked.begin(), ranked.end(), 0);
  std::sort(ranked.begin(), ranked.end(), [&](int a, int b) {
    const double va = sign > 0 ? -influence[a] : influence[a];
    const double vb = sign > 0 ? -influence[b] : influence[b];
    if (va != vb) return va < vb;
    return a < b;
  });

  const GroupMethod method =
      sign > 0 ? GroupMethod::PosInfluenceTail : GroupMethod::NegInfluenceTail;
  // Distinct stream per test point, found by position in the plan.
  int tp_index = 0;
  for (std::size_t t = 0; t < plan.test_points.size(); ++t) {
    if (plan.test_points[t].x == test_point.x) {
      tp_index = static_cast<int>(t);
      break;
    }
  }
  Rng rng = method_rng(plan, method, tp_index);

  std::vector<SubsetWeights> groups;
  for (const TailStage& stage : kTailStages) {
    const int pool_count = std::clamp(
        static_cast<int>(std::llround(kTailPoolFactor * stage.max_fraction * data.n())), 1,
        data.n());
    for (double fraction : linspace(kTailMinFraction, stage.max_fraction, stage.n_sizes)) {
      const int size = fraction_to_size(fraction, data.n());
      if (size > pool_count) {
        log_warn(tag + ": pool of " + std::to_string(pool_count) +
                 " cannot supply a group of " + std::to_string(size) + "; size skipped");
        continue;
      }
      std::vector<int> members;
      for (int pos : rng.sample_indices(pool_count, size)) {
        members.push_back(ranked[static_cast<std::size_t>(pos)]);
      }
      groups.push_back(SubsetWeights::from_indices(std::move(members), data, tag));
    }
  }
  return groups;
}

std::vector<SubsetWeights> build_groups(const Dataset& data, const TrainedModel& model,
                                        const GroupPlan& plan) {
  plan.validate();
  const bool needs_engine =
      std::any_of(plan.methods.begin(), plan.methods.end(), [](GroupMethod m) {
        return m == GroupMethod::GradientCluster || m == GroupMethod::PosInfluenceTail ||
               m == GroupMethod::NegInfluenceTail;
      });
  std::unique_ptr<InfluenceEngine> engine;
  if (needs_engine) engine = std::make_unique<InfluenceEngine>(data, model);

  std::vector<SubsetWeights> all;
  for (GroupMethod method : plan.methods) {
    switch (method) {
      case GroupMethod::SharedFeature: {
        auto g = shared_feature_groups(data, plan);
        all.insert(all.end(), std::make_move_iterator(g.begin()),
                   std::make_move_iterator(g.end()));
        break;
      }
      case GroupMethod::FeatureCluster: {
        auto g = cluster_groups(data.features, data, plan,
                                group_method_name(GroupMethod::FeatureCluster));
        all.insert(all.end(), std::make_move_iterator(g.begin()),
                   std::make_move_iterator(g.end()));
        break;
      }
      case GroupMethod::GradientCluster: {
        MatrixRM grads(data.n(), model.param_dim());
        for (int i = 0; i < data.n(); ++i) {
          grads.row(i) = point_grad(model, data, i).transpose();
        }
        auto g = cluster_groups(grads, data, plan,
                                group_method_name(GroupMethod::GradientCluster));
        all.insert(all.end(), std::make_move_iterator(g.begin()),
                   std::make_move_iterator(g.end()));
        break;
      }
      case GroupMethod::RandomWithinClass: {
        auto g = random_groups(data, plan, true);
        all.insert(all.end(), std::make_move_iterator(g.begin()),
                   std::make_move_iterator(g.end()));
        break;
      }
      case GroupMethod::Random: {
        auto g = random_groups(data, plan, false);
        all.insert(all.end(), std::make_move_iterator(g.begin()),
                   std::make_move_iterator(g.end()));
        break;
      }
      case GroupMethod::PosInfluenceTail:
      case GroupMethod::NegInfluenceTail: {
        const int sign = method == GroupMethod::PosInfluenceTail ? 1 : -1;
        for (std::size_t t = 0; t < plan.test_points.size(); ++t) {
          const std::string tag =
              group_method_name(method) + "_tp" + std::to_string(t);
          auto g = influence_tail_groups(*engine, plan.test_points[t], sign, plan, tag);
          all.insert(all.end(), std::make_move_iterator(g.begin()),
                     std::make_move_iterator(g.end()));
        }
        break;
      }
    }
  }
  for (std::size_t i = 0; i < all.size(); ++i) all[i].id = static_cast<int>(i);
  return all;
}

}  // namespace grouprobe
