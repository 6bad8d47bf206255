#pragma once

#include <vector>

#include "grouprobe/common.hpp"
#include "grouprobe/rng.hpp"

namespace grouprobe {

struct KMeansResult {
  std::vector<int> assignment;  // n entries in [0, k)
  MatrixRM centers;             // k x q (some rows may own no points)
  double inertia = 0.0;
  int iterations = 0;
};

// k-means++ seeding followed by Lloyd iterations until the relative inertia
// change drops below rel_tol (or max_iter). Ties in the nearest-center search
// break toward the lowest index, so runs are deterministic per seed.
KMeansResult kmeans(const MatrixRM& rows, int k, Rng& rng, double rel_tol = 1e-6,
                    int max_iter = 300);

// Non-empty clusters as member-index lists (ascending), ordered by cluster id.
std::vector<std::vector<int>> kmeans_clusters(const MatrixRM& rows, int k, Rng& rng);

// Single-linkage hierarchical clustering cut with the inconsistency
// criterion: flat clusters are maximal subtrees whose merge heights all have
// inconsistency coefficient <= threshold (depth-limited statistics).
std::vector<std::vector<int>> single_linkage_inconsistent(const MatrixRM& rows,
                                                          double threshold = 1.0,
                                                          int depth = 2);

}  // namespace grouprobe
