#ifndef ATOMREAD_CORE_CHECKSUM_HPP
#define ATOMREAD_CORE_CHECKSUM_HPP

#include <cstdint>
#include <cstddef>
#include <string>

namespace atomread {

// FNV-1a 64-bit; used for dataset/checkpoint integrity and run manifests.
inline uint64_t fnv1a64(const void* bytes, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string fnv1a64_hex(const void* bytes, size_t len);
std::string fnv1a64_file_hex(const std::string& path);

}  // namespace atomread

#endif
