#pragma once

#include <optional>
#include <string>
#include <vector>

#include "grouprobe/dataset.hpp"
#include "grouprobe/model.hpp"

namespace grouprobe {

// A removal vector w in [0,1]^n, stored sparsely over its support.
struct SubsetWeights {
  int id = -1;
  std::string method_tag;
  std::vector<int> indices;     // ascending, unique
  std::vector<double> values;   // same length, each in (0, 1]
  double alpha = 0.0;           // removed base-weight fraction

  static SubsetWeights from_indices(std::vector<int> idx, const Dataset& data,
                                    std::string tag, int id = -1);
  static SubsetWeights from_weighted(std::vector<int> idx, std::vector<double> w,
                                     const Dataset& data, std::string tag, int id = -1);

  int support_size() const { return static_cast<int>(indices.size()); }
  bool binary() const;
  double removed_mass(const Dataset& data) const;  // sum w_i * base_i
  double weight_sum() const;                       // sum w_i (the removal l1 mass)
  VectorXd dense(int n) const;
  VectorXd keep_vector(int n) const;  // 1 - w
  SubsetWeights scaled(double factor) const;

  void validate(const Dataset& data) const;
};

struct EvalFunction {
  enum class Kind { TestPrediction, TestLoss, SelfLoss };

  Kind kind = Kind::SelfLoss;
  VectorXd x_test;             // unaugmented; unused for SelfLoss
  std::optional<int> y_test;   // class id; required for TestLoss

  static EvalFunction test_prediction(VectorXd x);
  static EvalFunction test_loss(VectorXd x, int y);
  static EvalFunction self_loss();

  const char* kind_name() const;
  static Kind kind_from_name(const std::string& name);
};

// f(theta) and its gradient. SelfLoss binds to the subset passed here.
double eval_value(const TrainedModel& model, const Dataset& data,
                  const EvalFunction& f, const VectorXd& theta,
                  const SubsetWeights* self_subset);
VectorXd eval_grad(const TrainedModel& model, const Dataset& data,
                   const EvalFunction& f, const VectorXd& theta,
                   const SubsetWeights* self_subset);
// Throws ConfigError if f cannot be evaluated against this model/dataset.
void check_eval_function(const TrainedModel& model, const Dataset& data,
                         const EvalFunction& f);

// One (subset, evaluation function) result bundle.
struct EffectRecord {
  int subset_id = -1;
  std::string method_tag;
  int size = 0;
  double alpha = 0.0;
  std::string eval_kind;
  std::optional<double> influence;
  std::optional<double> newton;
  std::optional<double> actual;
  std::optional<double> param_pred;
  std::optional<double> err_nt_act;
  std::optional<double> err_nt_inf;
  std::optional<std::string> failure;  // set when a per-subset job failed
};

std::string effects_csv_header();
void write_effects_csv(const std::string& path, const std::vector<EffectRecord>& records);
std::vector<EffectRecord> read_effects_csv(const std::string& path);

void write_groups_jsonl(const std::string& path, const std::vector<SubsetWeights>& groups);
std::vector<SubsetWeights> read_groups_jsonl(const std::string& path, const Dataset& data);

}  // namespace grouprobe
