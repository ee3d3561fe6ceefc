#ifndef ATOMREAD_CORE_PARALLEL_HPP
#define ATOMREAD_CORE_PARALLEL_HPP

#include <cstdint>
#include <functional>

namespace atomread {

// Global switch between the OpenMP kernels and the serial reference path.
// Every kernel computes each output element with an identical inner loop, so
// the two paths are bitwise equal; tests assert that.
void set_parallel(bool on);
bool parallel_enabled();
int hardware_threads();

// Runs body(i) for i in [0, count). Uses OpenMP when enabled; the body must
// write only to slots owned by index i.
void parallel_for(int64_t count, const std::function<void(int64_t)>& body);

}  // namespace atomread

#endif
