#ifndef ATOMREAD_BENCH_BENCH_HPP
#define ATOMREAD_BENCH_BENCH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "atomread/denoiser/denoiser.hpp"
#include "atomread/metrics/metrics.hpp"
#include "atomread/simcam/simcam.hpp"

namespace atomread::bench {

struct Environment {
    std::string cpu_model;
    int hardware_threads = 0;
    bool openmp = false;
};
Environment environment();

struct BenchResult {
    std::string mode;        // batch | parallel
    long long config = 0;    // batch size or instance count
    double throughput = 0.0; // images / s (aggregate)
    double per_instance_throughput = 0.0;
    double latency_mean_s = 0.0;
    double latency_p50_s = 0.0;
    double latency_p99_s = 0.0;
    int warmup = 0;
    int iters = 0;
    bool skipped = false;    // e.g. allocation failure at this config
    std::string note;
    uint64_t output_checksum = 0;
};

// Runs the denoiser over synthetic normalized frames of the given shape at
// each batch size. Latency is per image; the checksum lets callers verify the
// harness never perturbs model outputs.
std::vector<BenchResult> bench_batch(const denoise::Checkpoint& ckpt, int frame_h,
                                     int frame_w, const std::vector<int>& batch_sizes,
                                     int iters, int warmup, uint64_t seed = 1);

// n independent single-frame inference instances on disjoint inputs; inner
// kernel parallelism is disabled so instances own their cores.
std::vector<BenchResult> bench_parallel(const denoise::Checkpoint& ckpt, int frame_h,
                                        int frame_w,
                                        const std::vector<int>& n_instances,
                                        int iters, uint64_t seed = 1);

// Checksum of a plain (non-benchmarked) denoise run over the same inputs.
uint64_t reference_checksum(const denoise::Checkpoint& ckpt, int frame_h, int frame_w,
                            int batch, int iters, uint64_t seed = 1);

struct ScalingRow {
    int grid = 0;  // n for an n x n site array
    double psnr_db = 0.0;
    double ssim = 0.0;
    double mean_l1 = 0.0;
    double latency_s = 0.0;  // per frame
    int frames = 0;
};

// Denoises stitched frames for each grid size and scores them against the
// stitched long-exposure ground truth (normalized scale).
std::vector<ScalingRow> bench_scaling(const denoise::Checkpoint& ckpt,
                                      const std::vector<int>& grids,
                                      const simcam::Dataset& source,
                                      int frames_per_grid, uint64_t seed = 1);

}  // namespace atomread::bench

#endif
