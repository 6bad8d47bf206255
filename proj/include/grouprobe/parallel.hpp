#pragma once

#include <functional>

namespace grouprobe {

// Hardware thread count as seen by OpenMP (1 when built without it).
int hardware_jobs();

// Fixed block partition of [0, n). Block boundaries depend only on
// block_size, so reductions that combine per-block partials in block order
// produce bit-identical results at every thread count.
int block_count(int n, int block_size);

// fn(block_index, lo, hi) over every block, possibly in parallel.
void for_blocks(int n, int block_size, int jobs,
                const std::function<void(int, int, int)>& fn);

// fn(i) for i in [0, n); iterations must be independent.
void for_index(int n, int jobs, const std::function<void(int)>& fn);

inline constexpr int kReductionBlock = 256;

}  // namespace grouprobe
