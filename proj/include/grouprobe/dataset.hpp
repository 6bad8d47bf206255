#pragma once

#include <optional>
#include <string>
#include <vector>

#include "grouprobe/common.hpp"

namespace grouprobe {

// Immutable after construction; safe to share across threads.
struct Dataset {
  MatrixRM features;               // n x d
  std::vector<int> labels;         // class ids in {0..K-1}
  VectorXd base_weights;           // per-point, >= 0, default 1
  int n_classes = 2;
  std::vector<std::string> feature_names;  // empty when unnamed

  int n() const { return static_cast<int>(features.rows()); }
  int d() const { return static_cast<int>(features.cols()); }

  // +-1 view of a binary label: class 0 -> -1, class 1 -> +1.
  double margin_label(int i) const { return labels[static_cast<std::size_t>(i)] == 0 ? -1.0 : 1.0; }

  double total_base_weight() const { return base_weights.sum(); }

  void validate() const;  // throws DataError on any invariant violation
  std::uint64_t fingerprint() const;
};

struct TestPoint {
  VectorXd x;
  std::optional<int> label;  // class id; required for test-loss evaluation
};

// Dense CSV: UTF-8, comma separated, header row, one column named "label"
// (anywhere), optional "weight" column, remaining columns numeric features.
Dataset load_dense_csv(const std::string& path);
void write_dense_csv(const Dataset& data, const std::string& path);

// Sparse rows: "<label> <idx>:<val> ..." with 1-based ascending indices.
Dataset load_sparse(const std::string& path);

// Two identity-covariance Gaussian classes in R^d with means at
// (-offset, 0, ...) for class 0 and (+offset, 0, ...) for class 1.
// Emits n_per_class rows of class 0 followed by n_per_class rows of class 1.
Dataset synth_gaussian_binary(int n_per_class, int d, double mean_offset,
                              std::uint64_t seed);

}  // namespace grouprobe
