#ifndef ATOMREAD_CLI_CONFIG_HPP
#define ATOMREAD_CLI_CONFIG_HPP

#include <string>
#include <vector>

#include <json.hpp>

#include "atomread/classify/classify.hpp"
#include "atomread/denoiser/denoiser.hpp"
#include "atomread/qec/qec.hpp"
#include "atomread/simcam/simcam.hpp"

namespace atomread::cli {

struct QecConfig {
    qec::RepCodeConfig rep;
    qec::CoherenceParams coherence{0.15, 0.18};  // seconds
    qec::TimingParams timing;
};

struct BenchConfig {
    std::vector<int> batch_sizes{1, 8, 32, 64, 128};
    std::vector<int> instances{1, 2, 4};
    std::vector<int> grids{4, 8, 16, 32};
    int iters = 20;
    int warmup = 2;
    int frames_per_grid = 2;
};

struct DataConfig {
    std::vector<double> durations_ms;
    int shots_per_duration = 300;
    double p_bright = 0.5;
    bool label_noise = false;  // relabel from the long-exposure path
};

struct RunConfig {
    std::string preset = "desk-5um";  // desk-5um | desk-9um | custom
    uint64_t seed = 1;
    std::string data_dir = "data";
    std::string checkpoint_dir = "checkpoints";
    std::string report_dir = "reports";

    simcam::LatticeGeometry geometry;
    simcam::OpticsConfig optics;
    DataConfig data;
    denoise::GeneratorConfig gen;
    denoise::DiscriminatorConfig disc;
    denoise::TrainConfig train;
    classify::NnHyper classifier;
    QecConfig qec;
    BenchConfig bench;
};

struct ConfigError {
    std::string field;
    std::string message;
};

// Preset defaults, overridden by the JSON document, overridden by
// ATOMREAD_DATA_DIR / ATOMREAD_CHECKPOINT_DIR / ATOMREAD_REPORT_DIR (paths
// only).
RunConfig default_config(const std::string& preset);
RunConfig load_config(const std::string& path);
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);

// Every module invariant that is statically checkable from the config; never
// touches data.
std::vector<ConfigError> validate_config(const RunConfig& c);

}  // namespace atomread::cli

#endif
