#include "grouprobe/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace grouprobe {

std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&values](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> pearson(const std::vector<double>& xs,
                              const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw InternalError("pearson: length mismatch");
  const std::size_t n = xs.size();
  if (n < 2) throw ConfigError("correlation needs at least two observations");
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::optional<double> spearman(const std::vector<double>& xs,
                               const std::vector<double>& ys) {
  if (xs.size() != ys.size()) throw InternalError("spearman: length mismatch");
  if (xs.size() < 2) throw ConfigError("correlation needs at least two observations");
  return pearson(average_ranks(xs), average_ranks(ys));
}

UnderestStats underestimation_stats(const std::vector<EffectRecord>& records,
                                    const std::string& eval_kind) {
  UnderestStats stats;
  int agree_underest = 0;
  int pos_total = 0, pos_underest = 0;
  int neg_total = 0, neg_underest = 0;
  for (const EffectRecord& r : records) {
    if (r.eval_kind != eval_kind) continue;
    ++stats.n_records;
    if (!r.influence.has_value() || !r.actual.has_value()) continue;
    ++stats.n_with_both;
    const double inf = *r.influence;
    const double act = *r.actual;
    const bool agree = inf * act > 0.0 || (inf == 0.0 && act == 0.0);
    if (!agree) continue;
    ++stats.n_sign_agree;
    const bool under = std::abs(inf) <= std::abs(act);
    if (under) ++agree_underest;
    if (act > 0.0) {
      ++pos_total;
      if (under) ++pos_underest;
    } else if (act < 0.0) {
      ++neg_total;
      if (under) ++neg_underest;
    }
  }
  if (stats.n_with_both > 0) {
    stats.sign_agree_frac =
        static_cast<double>(stats.n_sign_agree) / stats.n_with_both;
  }
  if (stats.n_sign_agree > 0) {
    stats.underest_frac = static_cast<double>(agree_underest) / stats.n_sign_agree;
  }
  if (pos_total > 0) {
    stats.underest_frac_pos = static_cast<double>(pos_underest) / pos_total;
  }
  if (neg_total > 0) {
    stats.underest_frac_neg = static_cast<double>(neg_underest) / neg_total;
  }
  return stats;
}

}  // namespace grouprobe
