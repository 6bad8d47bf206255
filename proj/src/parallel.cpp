#include "grouprobe/parallel.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace grouprobe {

int hardware_jobs() {
#ifdef _OPENMP
  return std::max(1, omp_get_max_threads());
#else
  return 1;
#endif
}

int block_count(int n, int block_size) {
  if (n <= 0) return 0;
  return (n + block_size - 1) / block_size;
}

void for_blocks(int n, int block_size, int jobs,
                const std::function<void(int, int, int)>& fn) {
  const int blocks = block_count(n, block_size);
#ifdef _OPENMP
  if (jobs > 1 && blocks > 1) {
#pragma omp parallel for schedule(static) num_threads(jobs)
    for (int b = 0; b < blocks; ++b) {
      const int lo = b * block_size;
      const int hi = std::min(n, lo + block_size);
      fn(b, lo, hi);
    }
    return;
  }
#endif
  (void)jobs;
  for (int b = 0; b < blocks; ++b) {
    const int lo = b * block_size;
    const int hi = std::min(n, lo + block_size);
    fn(b, lo, hi);
  }
}

void for_index(int n, int jobs, const std::function<void(int)>& fn) {
#ifdef _OPENMP
  if (jobs > 1 && n > 1) {
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
#endif
  (void)jobs;
  for (int i = 0; i < n; ++i) fn(i);
}

}  // namespace grouprobe
