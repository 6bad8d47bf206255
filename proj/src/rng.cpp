#include "grouprobe/rng.hpp"

#include <algorithm>
#include <numeric>

#include "grouprobe/common.hpp"

namespace grouprobe {

std::vector<int> Rng::sample_indices(int n, int k) {
  if (k < 0 || k > n) throw InternalError("sample_indices: k out of range");
  std::vector<int> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), 0);
  // Partial Fisher-Yates: the first k slots end up holding the sample.
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
  }
  pool.resize(static_cast<std::size_t>(k));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace grouprobe
