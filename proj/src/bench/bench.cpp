#include "atomread/bench/bench.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <thread>

#include "atomread/core/checksum.hpp"
#include "atomread/core/parallel.hpp"
#include "atomread/core/rng.hpp"

namespace atomread::bench {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<Frame> synthetic_frames(int n, int h, int w, uint64_t seed) {
    // Roughly normalized-scale content: background near a constant with a few
    // bright bumps, plus pixel noise.
    std::vector<Frame> frames;
    frames.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        auto rng = make_engine(hash_seed(seed, static_cast<uint64_t>(i)));
        std::normal_distribution<double> noise(0.0, 0.05);
        std::uniform_int_distribution<int> pos_h(2, std::max(2, h - 3));
        std::uniform_int_distribution<int> pos_w(2, std::max(2, w - 3));
        Frame f(h, w, -0.2);
        for (auto& p : f.px)
            p += noise(rng);
        for (int b = 0; b < std::max(1, h * w / 192); ++b) {
            const int cy = pos_h(rng), cx = pos_w(rng);
            for (int dy = -2; dy <= 2; ++dy)
                for (int dx = -2; dx <= 2; ++dx) {
                    const int y = cy + dy, x = cx + dx;
                    if (y >= 0 && y < h && x >= 0 && x < w)
                        f.at(y, x) += 0.5 * std::exp(-(dy * dy + dx * dx) / 2.0);
                }
        }
        frames.push_back(std::move(f));
    }
    return frames;
}

uint64_t frames_checksum(uint64_t h, const std::vector<Frame>& frames) {
    for (const auto& f : frames)
        h = fnv1a64(f.px.data(), f.px.size() * sizeof(double), h);
    return h;
}

BenchResult summarize(const std::string& mode, long long config,
                      std::vector<double> per_image_latencies, double total_time_s,
                      long long total_images, int warmup, int iters) {
    BenchResult r;
    r.mode = mode;
    r.config = config;
    r.warmup = warmup;
    r.iters = iters;
    r.throughput = total_images / total_time_s;
    std::sort(per_image_latencies.begin(), per_image_latencies.end());
    const size_t n = per_image_latencies.size();
    if (n > 0) {
        r.latency_mean_s =
            std::accumulate(per_image_latencies.begin(), per_image_latencies.end(), 0.0) /
            static_cast<double>(n);
        r.latency_p50_s = per_image_latencies[n / 2];
        r.latency_p99_s = per_image_latencies[std::min(n - 1, n * 99 / 100)];
    }
    return r;
}

}  // namespace

Environment environment() {
    Environment env;
    env.hardware_threads = hardware_threads();
#ifdef _OPENMP
    env.openmp = true;
#endif
    std::ifstream cpuinfo("/proc/cpuinfo");
    std::string line;
    while (std::getline(cpuinfo, line)) {
        if (line.rfind("model name", 0) == 0) {
            const auto pos = line.find(':');
            if (pos != std::string::npos)
                env.cpu_model = line.substr(pos + 2);
            break;
        }
    }
    if (env.cpu_model.empty())
        env.cpu_model = "unknown";
    return env;
}

std::vector<BenchResult> bench_batch(const denoise::Checkpoint& ckpt, int frame_h,
                                     int frame_w, const std::vector<int>& batch_sizes,
                                     int iters, int warmup, uint64_t seed) {
    require(iters >= 1, "bench_batch: iters must be >= 1");
    require(warmup >= 1, "bench_batch: warmup must be >= 1");

    std::vector<BenchResult> out;
    for (int batch : batch_sizes) {
        BenchResult r;
        try {
            const auto frames = synthetic_frames(batch, frame_h, frame_w, seed);
            for (int k = 0; k < warmup; ++k)
                denoise::denoise(ckpt, frames, batch);

            std::vector<double> per_image;
            uint64_t checksum = 0xcbf29ce484222325ULL;
            const auto t0 = Clock::now();
            for (int k = 0; k < iters; ++k) {
                const auto b0 = Clock::now();
                const auto denoised = denoise::denoise(ckpt, frames, batch);
                const double dt = std::chrono::duration<double>(Clock::now() - b0).count();
                per_image.push_back(dt / batch);
                checksum = frames_checksum(checksum, denoised);
            }
            const double total = std::chrono::duration<double>(Clock::now() - t0).count();
            r = summarize("batch", batch, std::move(per_image), total,
                          static_cast<long long>(batch) * iters, warmup, iters);
            r.per_instance_throughput = r.throughput;
            r.output_checksum = checksum;
        } catch (const std::bad_alloc&) {
            r.mode = "batch";
            r.config = batch;
            r.skipped = true;
            r.note = "allocation failure";
        }
        out.push_back(std::move(r));
    }
    return out;
}

uint64_t reference_checksum(const denoise::Checkpoint& ckpt, int frame_h, int frame_w,
                            int batch, int iters, uint64_t seed) {
    const auto frames = synthetic_frames(batch, frame_h, frame_w, seed);
    uint64_t checksum = 0xcbf29ce484222325ULL;
    for (int k = 0; k < iters; ++k) {
        const auto denoised = denoise::denoise(ckpt, frames, batch);
        checksum = frames_checksum(checksum, denoised);
    }
    return checksum;
}

std::vector<BenchResult> bench_parallel(const denoise::Checkpoint& ckpt, int frame_h,
                                        int frame_w,
                                        const std::vector<int>& n_instances,
                                        int iters, uint64_t seed) {
    require(iters >= 1, "bench_parallel: iters must be >= 1");

    std::vector<BenchResult> out;
    for (int n : n_instances) {
        require(n >= 1, "bench_parallel: instance count must be >= 1");
        // Instances own their cores; inner kernels run serial.
        const bool was_parallel = parallel_enabled();
        set_parallel(false);

        std::vector<std::vector<double>> latencies(static_cast<size_t>(n));
        std::vector<double> instance_time(static_cast<size_t>(n), 0.0);
        std::vector<std::thread> threads;
        const auto t0 = Clock::now();
        for (int inst = 0; inst < n; ++inst) {
            threads.emplace_back([&, inst]() {
                const auto frames = synthetic_frames(
                    1, frame_h, frame_w, hash_seed(seed, static_cast<uint64_t>(inst)));
                const auto i0 = Clock::now();
                for (int k = 0; k < iters; ++k) {
                    const auto b0 = Clock::now();
                    denoise::denoise(ckpt, frames, 1);
                    latencies[static_cast<size_t>(inst)].push_back(
                        std::chrono::duration<double>(Clock::now() - b0).count());
                }
                instance_time[static_cast<size_t>(inst)] =
                    std::chrono::duration<double>(Clock::now() - i0).count();
            });
        }
        for (auto& t : threads)
            t.join();
        const double total = std::chrono::duration<double>(Clock::now() - t0).count();
        set_parallel(was_parallel);

        std::vector<double> all;
        for (const auto& l : latencies)
            all.insert(all.end(), l.begin(), l.end());
        BenchResult r = summarize("parallel", n, std::move(all), total,
                                  static_cast<long long>(n) * iters, 0, iters);
        double per_instance = 0.0;
        for (double t : instance_time)
            per_instance += iters / t;
        r.per_instance_throughput = per_instance / n;
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<ScalingRow> bench_scaling(const denoise::Checkpoint& ckpt,
                                      const std::vector<int>& grids,
                                      const simcam::Dataset& source,
                                      int frames_per_grid, uint64_t seed) {
    require(frames_per_grid >= 1, "bench_scaling: frames_per_grid must be >= 1");
    std::vector<ScalingRow> out;
    for (int grid : grids) {
        const simcam::Dataset stitched = simcam::make_stitched_dataset(
            source, grid, grid, frames_per_grid, hash_seed(seed, static_cast<uint64_t>(grid)));
        std::vector<Frame> shorts, longs;
        for (const auto& shot : stitched.shots) {
            shorts.push_back(simcam::normalize(shot.short_image, ckpt.norm));
            longs.push_back(simcam::normalize(shot.long_image, ckpt.norm));
        }
        const auto t0 = Clock::now();
        const auto denoised = denoise::denoise(ckpt, shorts, 1);
        const double dt = std::chrono::duration<double>(Clock::now() - t0).count();

        ScalingRow row;
        row.grid = grid;
        row.frames = frames_per_grid;
        row.latency_s = dt / frames_per_grid;
        double psnr_acc = 0, ssim_acc = 0, l1_acc = 0;
        for (size_t i = 0; i < denoised.size(); ++i) {
            psnr_acc += metrics::psnr(denoised[i], longs[i], 1.0);
            ssim_acc += metrics::ssim(denoised[i], longs[i], 1.0);
            l1_acc += metrics::mean_l1(denoised[i], longs[i]);
        }
        row.psnr_db = psnr_acc / denoised.size();
        row.ssim = ssim_acc / denoised.size();
        row.mean_l1 = l1_acc / denoised.size();
        out.push_back(row);
    }
    return out;
}

}  // namespace atomread::bench
