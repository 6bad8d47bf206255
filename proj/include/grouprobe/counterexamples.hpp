#pragma once

#include <array>

#include "grouprobe/newton.hpp"

namespace grouprobe {

// Gaussian-mixture construction where influence and Newton effects on a
// chosen test point decorrelate and can disagree in sign: train on two
// 60-dimensional Gaussians (60 points each, lambda = 0.001), keep the 120
// point pairs whose influence- and Newton-predicted parameter changes have
// the largest angles, then pick the unit test direction that minimizes the
// correlation between the two projected series.
struct MogResult {
  Dataset data;
  TrainedModel model;
  std::vector<SubsetWeights> subsets;  // 120 pairs, each of size 2
  VectorXd x_test;
  std::vector<std::pair<double, double>> effects;  // (influence, newton) per subset
  double pearson = 0.0;
  bool sign_flip = false;
  std::uint64_t seed_used = 0;
  int attempts = 1;
};

MogResult gen_mog(std::uint64_t seed, int max_seeds = 5);

// Four distinct points on the two axes of R^2, each axis holding a +/- class
// pair at the same distance, replicated `multiplicity` times. Removing
// 1..multiplicity copies of a single point keeps the closed-form scale factor
// in play while the axes stay independent.
struct OrthoAxisConfig {
  double distance = 1.0;
  int multiplicity = 1;
};

struct OrthoResult {
  Dataset data;
  TrainedModel model;
  std::vector<SubsetWeights> subsets;
  VectorXd x_test;  // fixed at (1, 1)
  std::vector<double> scale_factors;               // d(w) per subset
  std::vector<std::pair<double, double>> effects;  // (influence, newton)
};

OrthoResult gen_ortho(const std::array<OrthoAxisConfig, 2>& axes, double lambda);

// The configuration the counterexample CLI and the acceptance checks pin:
// one steep axis with a single copy per point and one near-slope-1 axis with
// several copies at a tiny distance.
std::array<OrthoAxisConfig, 2> default_ortho_config();
double default_ortho_lambda();

}  // namespace grouprobe
