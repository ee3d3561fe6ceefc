#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "atomread/core/rng.hpp"
#include "atomread/denoiser/denoiser.hpp"
#include "atomread/metrics/metrics.hpp"

namespace atomread::denoise {

namespace {

Tensor frames_to_tensor(const std::vector<const Frame*>& frames) {
    const int h = frames.front()->h, w = frames.front()->w;
    Tensor t(static_cast<int>(frames.size()), 1, h, w);
    for (size_t i = 0; i < frames.size(); ++i)
        std::copy(frames[i]->px.begin(), frames[i]->px.end(), t.plane(static_cast<int>(i), 0));
    return t;
}

Frame tensor_slice_to_frame(const Tensor& t, int n) {
    Frame f(t.h, t.w);
    std::copy(t.plane(n, 0), t.plane(n, 0) + f.px.size(), f.px.begin());
    return f;
}

struct PairBatch {
    Tensor x;  // normalized short frames
    Tensor y;  // normalized long frames
};

PairBatch make_batch(const simcam::Dataset& dataset, const simcam::NormStats& norm,
                     const std::vector<size_t>& ids, size_t begin, size_t end) {
    std::vector<Frame> shorts, longs;
    shorts.reserve(end - begin);
    longs.reserve(end - begin);
    for (size_t k = begin; k < end; ++k) {
        const auto& shot = dataset.shots[ids[k]];
        shorts.push_back(simcam::normalize(shot.short_image, norm));
        longs.push_back(simcam::normalize(shot.long_image, norm));
    }
    std::vector<const Frame*> sp, lp;
    for (auto& f : shorts)
        sp.push_back(&f);
    for (auto& f : longs)
        lp.push_back(&f);
    return {frames_to_tensor(sp), frames_to_tensor(lp)};
}

struct ValMetrics {
    double l1 = 0, psnr = 0, ssim = 0;
};

ValMetrics validate_pass(Generator& gen, const simcam::Dataset& dataset,
                         const simcam::NormStats& norm, const std::vector<size_t>& ids,
                         int batch_size) {
    ValMetrics m;
    long frames_seen = 0;
    double psnr_acc = 0, ssim_acc = 0, l1_acc = 0;
    const bool ssim_ok = dataset.geometry.image_h >= 11 && dataset.geometry.image_w >= 11;
    for (size_t begin = 0; begin < ids.size(); begin += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(ids.size(), begin + static_cast<size_t>(batch_size));
        PairBatch batch = make_batch(dataset, norm, ids, begin, end);
        GeneratorCache cache;
        Tensor fake = gen.forward(batch.x, cache);
        for (int n = 0; n < fake.n; ++n) {
            const Frame f = tensor_slice_to_frame(fake, n);
            const Frame t = tensor_slice_to_frame(batch.y, n);
            l1_acc += metrics::mean_l1(f, t);
            const double p = metrics::psnr(f, t, 1.0);
            psnr_acc += std::isinf(p) ? 200.0 : p;
            if (ssim_ok)
                ssim_acc += metrics::ssim(f, t, 1.0);
            ++frames_seen;
        }
    }
    if (frames_seen > 0) {
        m.l1 = l1_acc / frames_seen;
        m.psnr = psnr_acc / frames_seen;
        m.ssim = ssim_acc / frames_seen;
    }
    return m;
}

struct WeightSnapshot {
    std::vector<std::vector<double>> w, b;
};

WeightSnapshot snapshot(const std::vector<const ConvBlock*>& blocks) {
    WeightSnapshot s;
    for (const auto* blk : blocks) {
        s.w.push_back(blk->layer.w);
        s.b.push_back(blk->layer.b);
    }
    return s;
}

void restore(std::vector<ConvBlock*> blocks, const WeightSnapshot& s) {
    for (size_t i = 0; i < blocks.size(); ++i) {
        blocks[i]->layer.w = s.w[i];
        blocks[i]->layer.b = s.b[i];
    }
}

}  // namespace

std::pair<Checkpoint, TrainReport> train(const simcam::Dataset& dataset,
                                         const GeneratorConfig& gen_config,
                                         const DiscriminatorConfig& disc_config,
                                         const TrainConfig& tc,
                                         const simcam::NormStats& norm) {
    tc.validate();
    const auto& train_ids = dataset.train_idx;
    const auto& val_ids = dataset.val_idx;
    if (train_ids.empty() || val_ids.empty())
        throw std::invalid_argument("train: dataset needs non-empty train and val splits");

    Generator gen(gen_config);
    Discriminator disc(disc_config);
    gen.init_params(hash_seed(tc.seed, 1));
    disc.init_params(hash_seed(tc.seed, 2));

    TrainReport report;
    report.initial_val_l1 =
        validate_pass(gen, dataset, norm, val_ids, tc.batch_size).l1;

    WeightSnapshot best_gen = snapshot(std::as_const(gen).blocks());
    WeightSnapshot best_disc = snapshot(std::as_const(disc).blocks());
    double best_val = report.initial_val_l1;
    int best_epoch = -1;
    int since_best = 0;
    long long gen_steps = 0;

    for (int epoch = 0; epoch < tc.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = tc.cosine_lr ? cosine_lr(tc.lr, epoch, tc.epochs) : tc.lr;

        std::vector<size_t> order(train_ids);
        auto shuffle_rng = make_engine(hash_seed(tc.seed, 0x5475 + epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double adv_sum = 0, l1_sum = 0, gen_loss_sum = 0, disc_loss_sum = 0;
        long gen_batches = 0, disc_batches = 0;

        for (size_t begin = 0; begin < order.size();
             begin += static_cast<size_t>(tc.batch_size)) {
            const size_t end =
                std::min(order.size(), begin + static_cast<size_t>(tc.batch_size));
            PairBatch batch = make_batch(dataset, norm, order, begin, end);

            // generator step
            GeneratorCache gcache;
            Tensor fake = gen.forward(batch.x, gcache);

            DiscriminatorCache dcache;
            const uint64_t drop_seed = hash_seed(tc.seed, 0xD0 + gen_steps * 4);
            std::vector<double> d_fake =
                disc.forward(fake, dcache, true, drop_seed);

            std::vector<double> dlogit;
            const double adv = nn::bce_with_logits(d_fake, tc.label_real, &dlogit);
            Tensor dfake = disc.backward(dlogit, dcache, false);

            Tensor dl1;
            const double l1 = nn::l1_loss(fake, batch.y, &dl1);
            for (size_t i = 0; i < dfake.data.size(); ++i)
                dfake.data[i] += tc.lambda_l1 * dl1.data[i];

            double gen_loss = adv + tc.lambda_l1 * l1;
            if (tc.lambda_ssim > 0.0) {
                Tensor dssim;
                const double s = ssim_global(fake, batch.y, &dssim);
                gen_loss += tc.lambda_ssim * (1.0 - s);
                for (size_t i = 0; i < dfake.data.size(); ++i)
                    dfake.data[i] -= tc.lambda_ssim * dssim.data[i];
            }
            if (tc.lambda_mse > 0.0) {
                double mse = 0.0;
                for (size_t i = 0; i < fake.data.size(); ++i) {
                    const double d = fake.data[i] - batch.y.data[i];
                    mse += d * d;
                }
                mse /= static_cast<double>(fake.data.size());
                gen_loss += tc.lambda_mse * mse;
                const double scale =
                    2.0 * tc.lambda_mse / static_cast<double>(fake.data.size());
                for (size_t i = 0; i < dfake.data.size(); ++i)
                    dfake.data[i] += scale * (fake.data[i] - batch.y.data[i]);
            }

            if (!std::isfinite(gen_loss))
                throw std::runtime_error(
                    "train: non-finite generator loss at epoch " +
                    std::to_string(epoch) + ", step " + std::to_string(gen_steps));

            gen.zero_grad();
            gen.backward(dfake, gcache);
            gen.adam_step(lr, tc.beta1, tc.beta2);

            adv_sum += adv;
            l1_sum += l1;
            gen_loss_sum += gen_loss;
            ++gen_batches;
            ++gen_steps;

            // discriminator step, once per d_update_period generator steps
            if (gen_steps % tc.d_update_period == 0) {
                DiscriminatorCache real_cache, fake_cache;
                std::vector<double> d_real = disc.forward(
                    batch.y, real_cache, true, hash_seed(tc.seed, 0xD1 + gen_steps * 4));
                std::vector<double> d_fake2 = disc.forward(
                    fake, fake_cache, true, hash_seed(tc.seed, 0xD2 + gen_steps * 4));

                std::vector<double> dreal, dfake2;
                const double loss_real =
                    nn::bce_with_logits(d_real, tc.label_real, &dreal);
                const double loss_fake =
                    nn::bce_with_logits(d_fake2, tc.label_fake, &dfake2);
                const double dloss = 0.5 * (loss_real + loss_fake);
                if (!std::isfinite(dloss))
                    throw std::runtime_error(
                        "train: non-finite discriminator loss at epoch " +
                        std::to_string(epoch));

                for (auto& v : dreal)
                    v *= 0.5;
                for (auto& v : dfake2)
                    v *= 0.5;
                disc.zero_grad();
                disc.backward(dreal, real_cache, true);
                disc.backward(dfake2, fake_cache, true);
                disc.adam_step(lr, tc.beta1, tc.beta2);

                disc_loss_sum += dloss;
                ++disc_batches;
            }
        }

        const ValMetrics vm = validate_pass(gen, dataset, norm, val_ids, tc.batch_size);

        EpochStats es;
        es.epoch = epoch;
        es.lr = lr;
        es.gen_loss = gen_batches ? gen_loss_sum / gen_batches : 0.0;
        es.adv_term = gen_batches ? adv_sum / gen_batches : 0.0;
        es.l1_term = gen_batches ? l1_sum / gen_batches : 0.0;
        es.disc_loss = disc_batches ? disc_loss_sum / disc_batches : 0.0;
        es.val_l1 = vm.l1;
        es.val_psnr = vm.psnr;
        es.val_ssim = vm.ssim;
        es.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        report.epochs.push_back(es);

        if (vm.l1 < best_val) {
            best_val = vm.l1;
            best_epoch = epoch;
            best_gen = snapshot(std::as_const(gen).blocks());
            best_disc = snapshot(std::as_const(disc).blocks());
            since_best = 0;
        } else {
            ++since_best;
            if (tc.early_stop_patience > 0 && since_best >= tc.early_stop_patience) {
                report.early_stopped = true;
                break;
            }
        }
    }

    restore(gen.blocks(), best_gen);
    restore(disc.blocks(), best_disc);
    gen.quantize_f32();
    disc.quantize_f32();

    report.best_epoch = best_epoch;
    report.best_val_l1 = best_val;

    Checkpoint ckpt;
    ckpt.gen_config = gen_config;
    ckpt.disc_config = disc_config;
    ckpt.train_config = tc;
    ckpt.norm = norm;
    ckpt.epoch = best_epoch;
    ckpt.best_val_l1 = best_val;
    ckpt.generator = std::move(gen);
    ckpt.discriminator = std::move(disc);
    return {std::move(ckpt), std::move(report)};
}

namespace {

Frame reflect_pad(const Frame& f, int target_h, int target_w) {
    Frame out(target_h, target_w);
    for (int y = 0; y < target_h; ++y) {
        const int sy = y < f.h ? y : 2 * f.h - 2 - y;
        for (int x = 0; x < target_w; ++x) {
            const int sx = x < f.w ? x : 2 * f.w - 2 - x;
            out.at(y, x) = f.at(sy, sx);
        }
    }
    return out;
}

}  // namespace

std::vector<Frame> denoise(const Checkpoint& ckpt, const std::vector<Frame>& frames,
                           int batch_size, DenoiseReport* report) {
    require(batch_size >= 1, "denoise: batch_size must be >= 1");
    if (frames.empty())
        return {};
    const int h = frames.front().h, w = frames.front().w;
    for (const auto& f : frames)
        require(f.h == h && f.w == w, "denoise: frames must share one shape");
    if (h < 8 || w < 8)
        throw std::invalid_argument("frame too small");

    if (report) {
        double mn = frames.front().px.front(), mx = mn, sum = 0;
        long long count = 0;
        for (const auto& f : frames)
            for (double v : f.px) {
                mn = std::min(mn, v);
                mx = std::max(mx, v);
                sum += v;
                ++count;
            }
        report->input_mean = sum / static_cast<double>(count);
        report->input_min = mn;
        report->input_max = mx;
        // Normalized frames span a range of exactly 1 and contain 0.
        report->flagged_unnormalized = mn < -1.5 || mx > 1.5 || (mx - mn) > 2.0;
    }

    const int hp = (h + 3) / 4 * 4, wp = (w + 3) / 4 * 4;
    // Generator is const during inference but forward caches live outside it.
    auto& gen = const_cast<Generator&>(ckpt.generator);

    std::vector<Frame> out;
    out.reserve(frames.size());
    for (size_t begin = 0; begin < frames.size();
         begin += static_cast<size_t>(batch_size)) {
        const size_t end =
            std::min(frames.size(), begin + static_cast<size_t>(batch_size));
        Tensor x(static_cast<int>(end - begin), 1, hp, wp);
        for (size_t i = begin; i < end; ++i) {
            const Frame padded =
                (hp == h && wp == w) ? frames[i] : reflect_pad(frames[i], hp, wp);
            std::copy(padded.px.begin(), padded.px.end(),
                      x.plane(static_cast<int>(i - begin), 0));
        }
        GeneratorCache cache;
        Tensor y = gen.forward(x, cache);
        for (int n = 0; n < y.n; ++n) {
            Frame f(h, w);
            for (int yy = 0; yy < h; ++yy)
                for (int xx = 0; xx < w; ++xx)
                    f.at(yy, xx) = y.at(n, 0, yy, xx);
            out.push_back(std::move(f));
        }
    }
    return out;
}

}  // namespace atomread::denoise
