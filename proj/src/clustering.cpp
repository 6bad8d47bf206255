#include "grouprobe/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace grouprobe {

namespace {

double sq_dist(const MatrixRM& rows, int i, const Eigen::RowVectorXd& center) {
  return (rows.row(i) - center).squaredNorm();
}

}  // namespace

KMeansResult kmeans(const MatrixRM& rows, int k, Rng& rng, double rel_tol, int max_iter) {
  const int n = static_cast<int>(rows.rows());
  const int q = static_cast<int>(rows.cols());
  if (n < 1) throw DataError("kmeans on empty data");
  k = std::min(k, n);
  if (k < 1) throw ConfigError("kmeans requires k >= 1");

  KMeansResult result;
  result.centers.resize(k, q);

  // k-means++ seeding.
  std::vector<double> d2(static_cast<std::size_t>(n),
                         std::numeric_limits<double>::infinity());
  {
    const int first = rng.index(n);
    result.centers.row(0) = rows.row(first);
    for (int c = 1; c < k; ++c) {
      double total = 0.0;
      for (int i = 0; i < n; ++i) {
        d2[static_cast<std::size_t>(i)] = std::min(
            d2[static_cast<std::size_t>(i)], sq_dist(rows, i, result.centers.row(c - 1)));
        total += d2[static_cast<std::size_t>(i)];
      }
      int chosen;
      if (total > 0.0) {
        const double target = rng.real01() * total;
        double cum = 0.0;
        chosen = n - 1;
        for (int i = 0; i < n; ++i) {
          cum += d2[static_cast<std::size_t>(i)];
          if (cum > target) {
            chosen = i;
            break;
          }
        }
      } else {
        chosen = rng.index(n);  // all points coincide with existing centers
      }
      result.centers.row(c) = rows.row(chosen);
    }
  }

  result.assignment.assign(static_cast<std::size_t>(n), 0);
  double prev_inertia = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    result.iterations = iter + 1;
    // Assignment step; ties go to the lowest center index.
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      int best_c = 0;
      for (int c = 0; c < k; ++c) {
        const double dist = sq_dist(rows, i, result.centers.row(c));
        if (dist < best) {
          best = dist;
          best_c = c;
        }
      }
      result.assignment[static_cast<std::size_t>(i)] = best_c;
      inertia += best;
    }
    result.inertia = inertia;

    // Update step; empty clusters keep their previous center.
    MatrixRM sums = MatrixRM::Zero(k, q);
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      const int c = result.assignment[static_cast<std::size_t>(i)];
      sums.row(c) += rows.row(i);
      ++counts[static_cast<std::size_t>(c)];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        result.centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
      }
    }

    if (inertia == 0.0) break;
    if (std::isfinite(prev_inertia) &&
        std::abs(prev_inertia - inertia) < rel_tol * prev_inertia) {
      break;
    }
    prev_inertia = inertia;
  }
  return result;
}

std::vector<std::vector<int>> kmeans_clusters(const MatrixRM& rows, int k, Rng& rng) {
  const KMeansResult result = kmeans(rows, k, rng);
  const int kk = static_cast<int>(result.centers.rows());
  std::vector<std::vector<int>> clusters(static_cast<std::size_t>(kk));
  for (int i = 0; i < static_cast<int>(rows.rows()); ++i) {
    clusters[static_cast<std::size_t>(result.assignment[static_cast<std::size_t>(i)])]
        .push_back(i);
  }
  clusters.erase(std::remove_if(clusters.begin(), clusters.end(),
                                [](const std::vector<int>& c) { return c.empty(); }),
                 clusters.end());
  return clusters;
}

namespace {

struct DendroNode {
  int left = -1;  // child node id: leaf < n, internal >= n
  int right = -1;
  double height = 0.0;
};

// Heights of the merge and of internal descendants within `depth` levels
// (the merge itself counts as level 1).
void collect_heights(const std::vector<DendroNode>& nodes, int n, int node_id,
                     int levels_left, std::vector<double>& out) {
  if (node_id < n || levels_left <= 0) return;
  const DendroNode& node = nodes[static_cast<std::size_t>(node_id - n)];
  out.push_back(node.height);
  collect_heights(nodes, n, node.left, levels_left - 1, out);
  collect_heights(nodes, n, node.right, levels_left - 1, out);
}

void gather_leaves(const std::vector<DendroNode>& nodes, int n, int node_id,
                   std::vector<int>& out) {
  if (node_id < n) {
    out.push_back(node_id);
    return;
  }
  const DendroNode& node = nodes[static_cast<std::size_t>(node_id - n)];
  gather_leaves(nodes, n, node.left, out);
  gather_leaves(nodes, n, node.right, out);
}

}  // namespace

std::vector<std::vector<int>> single_linkage_inconsistent(const MatrixRM& rows,
                                                          double threshold, int depth) {
  const int n = static_cast<int>(rows.rows());
  if (n == 0) return {};
  if (n == 1) return {{0}};

  // Minimum spanning tree of the complete Euclidean graph (Prim).
  std::vector<double> best(static_cast<std::size_t>(n),
                           std::numeric_limits<double>::infinity());
  std::vector<int> parent(static_cast<std::size_t>(n), -1);
  std::vector<bool> in_tree(static_cast<std::size_t>(n), false);
  struct Edge {
    int a, b;
    double w;
  };
  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(n - 1));
  int current = 0;
  in_tree[0] = true;
  for (int added = 1; added < n; ++added) {
    for (int j = 0; j < n; ++j) {
      if (in_tree[static_cast<std::size_t>(j)]) continue;
      const double w = (rows.row(current) - rows.row(j)).norm();
      if (w < best[static_cast<std::size_t>(j)]) {
        best[static_cast<std::size_t>(j)] = w;
        parent[static_cast<std::size_t>(j)] = current;
      }
    }
    int next = -1;
    double next_w = std::numeric_limits<double>::infinity();
    for (int j = 0; j < n; ++j) {
      if (!in_tree[static_cast<std::size_t>(j)] &&
          best[static_cast<std::size_t>(j)] < next_w) {
        next_w = best[static_cast<std::size_t>(j)];
        next = j;
      }
    }
    edges.push_back({parent[static_cast<std::size_t>(next)], next, next_w});
    in_tree[static_cast<std::size_t>(next)] = true;
    current = next;
  }

  // Single-linkage dendrogram: merge MST edges in ascending weight order.
  std::stable_sort(edges.begin(), edges.end(),
                   [](const Edge& a, const Edge& b) { return a.w < b.w; });
  std::vector<int> root(static_cast<std::size_t>(2 * n - 1));
  std::iota(root.begin(), root.end(), 0);
  std::function<int(int)> find = [&](int x) {
    while (root[static_cast<std::size_t>(x)] != x) {
      root[static_cast<std::size_t>(x)] =
          root[static_cast<std::size_t>(root[static_cast<std::size_t>(x)])];
      x = root[static_cast<std::size_t>(x)];
    }
    return x;
  };
  std::vector<DendroNode> nodes;
  nodes.reserve(static_cast<std::size_t>(n - 1));
  for (const Edge& e : edges) {
    const int ra = find(e.a);
    const int rb = find(e.b);
    const int merged = n + static_cast<int>(nodes.size());
    nodes.push_back({ra, rb, e.w});
    root[static_cast<std::size_t>(ra)] = merged;
    root[static_cast<std::size_t>(rb)] = merged;
  }

  // Inconsistency coefficient per merge (population std over the collected
  // heights), then the subtree maximum used by the flat cut. Children precede
  // parents in merge order, so one forward pass suffices.
  const int internal = n - 1;
  std::vector<double> subtree_max(static_cast<std::size_t>(internal), 0.0);
  for (int t = 0; t < internal; ++t) {
    std::vector<double> heights;
    collect_heights(nodes, n, n + t, depth, heights);
    const double mean =
        std::accumulate(heights.begin(), heights.end(), 0.0) / heights.size();
    double var = 0.0;
    for (double h : heights) var += (h - mean) * (h - mean);
    const double sd = std::sqrt(var / heights.size());
    double coeff =
        sd > 0.0 ? (nodes[static_cast<std::size_t>(t)].height - mean) / sd : 0.0;
    if (nodes[static_cast<std::size_t>(t)].left >= n) {
      coeff = std::max(coeff, subtree_max[static_cast<std::size_t>(
                                  nodes[static_cast<std::size_t>(t)].left - n)]);
    }
    if (nodes[static_cast<std::size_t>(t)].right >= n) {
      coeff = std::max(coeff, subtree_max[static_cast<std::size_t>(
                                  nodes[static_cast<std::size_t>(t)].right - n)]);
    }
    subtree_max[static_cast<std::size_t>(t)] = coeff;
  }

  // Maximal subtrees whose every merge is consistent become flat clusters.
  std::vector<std::vector<int>> clusters;
  std::function<void(int)> cut = [&](int node_id) {
    if (node_id < n) {
      clusters.push_back({node_id});
      return;
    }
    if (subtree_max[static_cast<std::size_t>(node_id - n)] <= threshold) {
      std::vector<int> members;
      gather_leaves(nodes, n, node_id, members);
      std::sort(members.begin(), members.end());
      clusters.push_back(std::move(members));
      return;
    }
    cut(nodes[static_cast<std::size_t>(node_id - n)].left);
    cut(nodes[static_cast<std::size_t>(node_id - n)].right);
  };
  cut(n + internal - 1);
  return clusters;
}

}  // namespace grouprobe
