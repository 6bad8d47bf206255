#pragma once

#include "grouprobe/influence.hpp"

namespace grouprobe {

enum class GroupMethod {
  SharedFeature,
  FeatureCluster,
  GradientCluster,
  RandomWithinClass,
  Random,
  PosInfluenceTail,
  NegInfluenceTail,
};

std::string group_method_name(GroupMethod method);
GroupMethod group_method_from_name(const std::string& name);
std::vector<GroupMethod> all_group_methods();

struct GroupPlan {
  // Fractions of the dataset per group; the default grid is 100 sizes
  // linearly spaced between 0.25% and 25%.
  std::vector<double> size_fractions;
  std::vector<GroupMethod> methods = all_group_methods();
  std::uint64_t seed = 0;
  std::vector<TestPoint> test_points;  // required by the tail methods

  void validate() const;
};

std::vector<double> default_size_grid();  // 100 values in [0.0025, 0.25]
std::vector<double> linspace(double lo, double hi, int count);
int fraction_to_size(double fraction, int n);

// Per size: pick a feature and an anchor point uniformly, then take the
// `size` points closest to the anchor in that feature's value order.
std::vector<SubsetWeights> shared_feature_groups(const Dataset& data,
                                                 const GroupPlan& plan);

// Pool clusters from single-linkage (threshold 1) and k-means over
// k in {4,8,16,32,64,128}; per size pick a big-enough cluster uniformly and
// sample the group inside it. Sizes with no eligible cluster are skipped.
std::vector<SubsetWeights> cluster_groups(const MatrixRM& representation,
                                          const Dataset& data, const GroupPlan& plan,
                                          const std::string& tag);

// Uniform without replacement, optionally restricted to one class drawn among
// the classes still large enough for the size (others skipped).
std::vector<SubsetWeights> random_groups(const Dataset& data, const GroupPlan& plan,
                                         bool within_class);

// Rank training points by their influence on the test point's loss and sample
// staged groups from the top tail: sizes linspace over [0.25%, 2.5%],
// [0.25%, 10%], [0.25%, 25%] (33/33/34 sizes) with candidate pools of the top
// 1.5x the stage's maximum fraction. sign > 0 takes the positive tail.
std::vector<SubsetWeights> influence_tail_groups(const InfluenceEngine& engine,
                                                 const TestPoint& test_point, int sign,
                                                 const GroupPlan& plan,
                                                 const std::string& tag);

// All requested families in canonical order (method, then size), with ids
// assigned sequentially.
std::vector<SubsetWeights> build_groups(const Dataset& data, const TrainedModel& model,
                                        const GroupPlan& plan);

}  // namespace grouprobe
