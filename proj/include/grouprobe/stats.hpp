#pragma once

#include <optional>
#include <vector>

#include "grouprobe/subset.hpp"

namespace grouprobe {

// Positions replaced by average ranks over tied runs (1-based).
std::vector<double> average_ranks(const std::vector<double>& values);

// Rank correlation with average ranks for ties. Empty when either side has
// zero rank variance (constant input), which callers report distinctly.
std::optional<double> spearman(const std::vector<double>& xs,
                               const std::vector<double>& ys);

std::optional<double> pearson(const std::vector<double>& xs,
                              const std::vector<double>& ys);

struct UnderestStats {
  int n_records = 0;
  int n_with_both = 0;     // influence and actual present
  int n_sign_agree = 0;
  std::optional<double> sign_agree_frac;
  // |influence| <= |actual| among sign-agreeing records...
  std::optional<double> underest_frac;       // ...overall
  std::optional<double> underest_frac_pos;   // ...with actual > 0
  std::optional<double> underest_frac_neg;   // ...with actual < 0
};

// Sign agreement and underestimation fractions for one evaluation kind. The
// positive/negative split matters for test loss, where underestimation only
// holds on the positive side.
UnderestStats underestimation_stats(const std::vector<EffectRecord>& records,
                                    const std::string& eval_kind);

}  // namespace grouprobe
