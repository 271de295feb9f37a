#pragma once

namespace fglab {

// Worker count used by the OpenMP kernels. Results never depend on it.
int thread_count();
void set_thread_count(int n);
// Applies FGLAB_THREADS when set to a positive integer; returns the count in effect.
int configure_threads_from_env();

}  // namespace fglab
