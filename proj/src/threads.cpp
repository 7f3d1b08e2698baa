#include "geoward/threads.hpp"

#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace geoward {

#ifdef _OPENMP
void set_threads(int n)
{
    if (n < 1) n = 1;
    omp_set_num_threads(n);
}

int thread_count()
{
    return omp_get_max_threads();
}
#else
void set_threads(int) {}
int thread_count() { return 1; }
#endif

void init_threads_from_env()
{
    const char* env = std::getenv("GEOWARD_THREADS");
    if (!env) return;
    try {
        set_threads(std::stoi(env));
    } catch (...) {
        // Ignore malformed values, keep the default.
    }
}

} // namespace geoward
