#pragma once

#include "grouprobe/newton.hpp"

namespace grouprobe {

// Exact effect of removing w: retrain with keep weights 1 - w (warm-started
// at the trained optimum) and evaluate f on the result.
double actual_effect(const TrainedModel& model, const Dataset& data,
                     const SubsetWeights& w, const EvalFunction& f);

// Retrained parameters for keep = 1 - w.
VectorXd retrain_parameters(const TrainedModel& model, const Dataset& data,
                            const SubsetWeights& w, bool cold_start = false);

struct BatchOptions {
  int parallelism = 1;
  bool compute_actual = true;
  bool compute_newton = true;
  bool compute_param_pred = true;
};

// Full per-(subset, eval function) records: influence, Newton, parameter-space
// prediction, actual effect, and the error decomposition. One retrain and one
// Newton solve per subset, shared across the evaluation functions. Output
// order is subsets x fs in input order and independent of parallelism.
// Per-subset failures are recorded on the affected records; the batch continues.
std::vector<EffectRecord> batch_effects(const InfluenceEngine& influence,
                                        const NewtonEngine& newton,
                                        const std::vector<SubsetWeights>& subsets,
                                        const std::vector<EvalFunction>& fs,
                                        const BatchOptions& options);

// Actual effects only, for a single evaluation function.
std::vector<EffectRecord> batch_actual_effects(const TrainedModel& model,
                                               const Dataset& data,
                                               const std::vector<SubsetWeights>& subsets,
                                               const EvalFunction& f, int parallelism);

}  // namespace grouprobe
