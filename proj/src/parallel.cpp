#include "fglab/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace fglab {

int thread_count() { return omp_get_max_threads(); }

void set_thread_count(int n) { omp_set_num_threads(n < 1 ? 1 : n); }

int configure_threads_from_env() {
  if (const char* env = std::getenv("FGLAB_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) set_thread_count(n);
    } catch (const std::exception&) {
      // ignored: malformed values leave the OpenMP default in place
    }
  }
  return thread_count();
}

}  // namespace fglab
