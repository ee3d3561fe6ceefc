#ifndef ATOMREAD_CORE_RNG_HPP
#define ATOMREAD_CORE_RNG_HPP

#include <cstdint>
#include <random>

namespace atomread {

// splitmix64 finalizer; used to derive independent per-item seeds so results
// do not depend on scheduling or worker count.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t hash_seed(uint64_t base, uint64_t k) {
    return mix64(mix64(base) ^ mix64(k + 0x2545f4914f6cdd1dULL));
}

inline std::mt19937_64 make_engine(uint64_t seed) {
    return std::mt19937_64(mix64(seed));
}

}  // namespace atomread

#endif
