#include "atomread/core/parallel.hpp"

#include <atomic>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace atomread {

namespace {
std::atomic<bool> g_parallel{true};
}

void set_parallel(bool on) { g_parallel.store(on); }
bool parallel_enabled() { return g_parallel.load(); }

int hardware_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
#endif
}

void parallel_for(int64_t count, const std::function<void(int64_t)>& body) {
#ifdef _OPENMP
    if (g_parallel.load() && count > 1) {
#pragma omp parallel for schedule(static)
        for (int64_t i = 0; i < count; ++i)
            body(i);
        return;
    }
#endif
    for (int64_t i = 0; i < count; ++i)
        body(i);
}

}  // namespace atomread
