#ifndef ATOMREAD_CORE_CONTAINER_HPP
#define ATOMREAD_CORE_CONTAINER_HPP

#include <string>
#include <vector>

#include <json.hpp>

namespace atomread {

// Binary container shared by denoiser checkpoints and classifier models:
// magic, manifest length, UTF-8 JSON manifest, then one little-endian f32
// blob per entry in manifest["blobs"] (name + element count, declared order).
struct Container {
    nlohmann::json manifest;
    std::vector<std::pair<std::string, std::vector<float>>> blobs;

    void add_blob(const std::string& name, const std::vector<double>& values);
    const std::vector<float>& blob(const std::string& name) const;
    std::vector<double> blob_as_double(const std::string& name) const;
};

void save_container(const Container& c, const std::string& path);
Container load_container(const std::string& path);

// f32 round trip used when freezing trained weights: files store f32, so the
// in-memory model is quantized once at checkpoint creation and save/load is
// then exact.
inline double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace atomread

#endif
