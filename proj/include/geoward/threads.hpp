#pragma once

namespace geoward {

// Worker-count control for the OpenMP kernels. All parallel reductions in
// this library write to disjoint per-item slots and reduce sequentially in
// item order, so results are bit-identical for any thread count.
void set_threads(int n);
int thread_count();

// Reads GEOWARD_THREADS if set, otherwise leaves the OpenMP default.
void init_threads_from_env();

} // namespace geoward
