// Compares the serial reference kernels, the optimized kernels run serially,
// and the OpenMP path on the shapes the pipeline actually uses. Also times
// shot generation and the repetition-code Monte Carlo at both settings.

#include <chrono>
#include <cstdio>
#include <random>
#include <string>

#include "atomread/core/parallel.hpp"
#include "atomread/core/rng.hpp"
#include "atomread/denoiser/denoiser.hpp"
#include "atomread/nn/ops.hpp"
#include "atomread/qec/qec.hpp"
#include "atomread/simcam/simcam.hpp"

using namespace atomread;
using Clock = std::chrono::steady_clock;

namespace {

double time_of(int reps, const std::function<void()>& fn) {
    fn();  // warmup
    const auto t0 = Clock::now();
    for (int i = 0; i < reps; ++i)
        fn();
    return std::chrono::duration<double>(Clock::now() - t0).count() / reps;
}

Tensor random_tensor(int n, int c, int h, int w, uint64_t seed) {
    Tensor t(n, c, h, w);
    auto rng = make_engine(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (auto& v : t.data)
        v = g(rng);
    return t;
}

void report(const char* name, double ref_s, double serial_s, double parallel_s) {
    std::printf("%-28s reference %9.3f ms | serial %9.3f ms | omp %9.3f ms | speedup %.2fx\n",
                name, ref_s * 1e3, serial_s * 1e3, parallel_s * 1e3,
                serial_s / parallel_s);
}

}  // namespace

int main(int argc, char** argv) {
    const int reps = argc > 1 ? std::atoi(argv[1]) : 5;
    std::printf("threads available: %d\n", hardware_threads());

    // conv2d on the residual-block shape (the training hot spot)
    {
        nn::ConvSpec spec{64, 64, 3, 1, 1};
        Tensor x = random_tensor(16, 64, 7, 7, 1);
        auto w = std::vector<double>(spec.weight_count(), 0.01);
        auto b = std::vector<double>(64, 0.0);
        Tensor y;
        const double t_ref =
            time_of(reps, [&] { nn::ref::conv2d_forward(x, w, b, spec, y); });
        set_parallel(false);
        const double t_ser = time_of(reps, [&] { nn::conv2d_forward(x, w, b, spec, y); });
        set_parallel(true);
        const double t_par = time_of(reps, [&] { nn::conv2d_forward(x, w, b, spec, y); });
        report("conv2d 16x64x7x7", t_ref, t_ser, t_par);
    }

    // full generator forward at quarter width on a 28x28 batch
    {
        denoise::Generator gen(denoise::GeneratorConfig{0.25, 3});
        Tensor x = random_tensor(16, 1, 28, 28, 2);
        denoise::GeneratorCache cache;
        set_parallel(false);
        const double t_ser = time_of(reps, [&] { gen.forward(x, cache); });
        set_parallel(true);
        const double t_par = time_of(reps, [&] { gen.forward(x, cache); });
        report("generator fwd 16x28x28", t_ser, t_ser, t_par);
    }

    // shot generation
    {
        const auto preset = simcam::desk_preset_5um();
        set_parallel(false);
        const double t_ser = time_of(1, [&] {
            simcam::generate_dataset(preset.geometry, preset.optics, {15.0}, 200, 0.5, 7);
        });
        set_parallel(true);
        const double t_par = time_of(1, [&] {
            simcam::generate_dataset(preset.geometry, preset.optics, {15.0}, 200, 0.5, 7);
        });
        report("render 200 shots", t_ser, t_ser, t_par);
    }

    // repetition-code Monte Carlo
    {
        qec::NoiseCurves noise({2.0, 5.0}, {0.05, 0.02}, qec::CoherenceParams{0.2, 0.25});
        qec::RepCodeConfig cfg;
        cfg.distance = 5;
        cfg.rounds = 20;
        cfg.shots = 20000;
        set_parallel(false);
        const double t_ser = time_of(1, [&] {
            qec::ler_repetition_sweep({2.0, 5.0}, noise, cfg, qec::TimingParams{});
        });
        set_parallel(true);
        const double t_par = time_of(1, [&] {
            qec::ler_repetition_sweep({2.0, 5.0}, noise, cfg, qec::TimingParams{});
        });
        report("rep-code mc 2x20k shots", t_ser, t_ser, t_par);
    }
    return 0;
}
