#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "atomread/core/parallel.hpp"
#include "atomread/core/rng.hpp"
#include "atomread/simcam/simcam.hpp"

using namespace atomread;
using namespace atomread::simcam;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double patch_sum(const Frame& f, const LatticeGeometry& g, int site) {
    const int half = g.patch_px / 2;
    const int cy = g.site_center_y(site), cx = g.site_center_x(site);
    double acc = 0;
    for (int y = cy - half; y <= cy + half; ++y)
        for (int x = cx - half; x <= cx + half; ++x)
            acc += f.at(y, x);
    return acc;
}

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("atomread_test_" + name);
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("sample_states degenerate and frequency cases") {
    const auto g = desk_preset_5um().geometry;
    const auto zeros = sample_states(g, 0.0, 7);
    const auto ones = sample_states(g, 1.0, 7);
    for (int s = 0; s < g.sites(); ++s) {
        CHECK(zeros[s] == 0);
        CHECK(ones[s] == 1);
    }

    std::vector<long> bright(g.sites(), 0);
    const int draws = 10000;
    for (int k = 0; k < draws; ++k) {
        const auto st = sample_states(g, 0.5, hash_seed(11, k));
        for (int s = 0; s < g.sites(); ++s)
            bright[s] += st[s];
    }
    for (int s = 0; s < g.sites(); ++s)
        CHECK(std::abs(bright[s] / static_cast<double>(draws) - 0.5) < 0.02);

    // deterministic given seed
    CHECK(sample_states(g, 0.5, 3) == sample_states(g, 0.5, 3));
}

TEST_CASE("render_pair zero-signal case is exactly the bias") {
    const auto preset = desk_preset_5um();
    OpticsConfig o = preset.optics;
    o.bright_rate = o.dark_rate = o.background_rate = 0.0;
    o.read_noise = 0.0;
    o.bias = 100.0;
    const auto states = sample_states(preset.geometry, 1.0, 1);
    const auto [lo, sh] = render_pair(states, preset.geometry, o, 15.0, 2);
    for (double v : lo.px)
        CHECK(v == doctest::Approx(100.0));
    for (double v : sh.px)
        CHECK(v == doctest::Approx(100.0));
}

TEST_CASE("render_pair signal mean matches the analytic value") {
    const auto preset = desk_preset_5um();
    OpticsConfig o = preset.optics;
    o.background_rate = 0.0;
    o.dark_rate = 0.0;
    LatticeGeometry g = preset.geometry;
    const double duration = 15.0;

    std::vector<uint8_t> states(g.sites(), 0);
    states[4] = 1;  // center site only

    const int shots = 1000;
    double acc_long = 0, acc_short = 0;
    for (int k = 0; k < shots; ++k) {
        const auto [lo, sh] = render_pair(states, g, o, duration, hash_seed(5, k));
        acc_long += patch_sum(lo, g, 4) - o.bias * g.patch_px * g.patch_px;
        acc_short += patch_sum(sh, g, 4) - o.bias * g.patch_px * g.patch_px;
    }
    acc_long /= shots;
    acc_short /= shots;

    // PSF mass inside the centered patch (pixel bin edges at half-integers)
    const double half = g.patch_px / 2 + 0.5;
    const double mass1d = normal_cdf(half / o.psf_sigma_px) - normal_cdf(-half / o.psf_sigma_px);
    const double expected = o.em_gain * o.bright_rate * duration * mass1d * mass1d;
    CHECK(std::abs(acc_long - expected) / expected < 0.05);

    // thinning ratio
    CHECK(std::abs(acc_short / acc_long - o.attenuation) < 0.01);
}

TEST_CASE("photon counts are Poisson (chi-square dispersion test)") {
    const auto preset = desk_preset_5um();
    OpticsConfig o = preset.optics;
    o.background_rate = 0.0;
    LatticeGeometry g = preset.geometry;
    std::vector<uint8_t> states(g.sites(), 1);

    const int n = 10000;
    std::vector<double> counts(n);
    double mean = 0;
    for (int k = 0; k < n; ++k) {
        RenderDebug dbg;
        render_pair(states, g, o, 15.0, hash_seed(21, k), &dbg);
        double total = 0;
        for (double v : dbg.long_photons.px)
            total += v;
        counts[k] = total;
        mean += total;
    }
    mean /= n;
    double var = 0;
    for (double c : counts)
        var += (c - mean) * (c - mean);
    var /= (n - 1);

    // dispersion statistic ~ chi2(n-1); Wilson-Hilferty for the 1% two-sided band
    const double dof = n - 1;
    const double z995 = 2.5758;
    auto chi2_quantile = [&](double z) {
        const double t = 1.0 - 2.0 / (9.0 * dof) + z * std::sqrt(2.0 / (9.0 * dof));
        return dof * t * t * t;
    };
    const double stat = dof * var / mean;
    CHECK(stat > chi2_quantile(-z995));
    CHECK(stat < chi2_quantile(z995));
}

TEST_CASE("short and long frames of one shot are correlated; shuffling destroys it") {
    const auto preset = desk_preset_5um();
    LatticeGeometry g = preset.geometry;
    std::vector<uint8_t> states(g.sites(), 1);

    // thinning of shared arrivals gives corr ~ sqrt(q)/2 on the camera scale;
    // keep background and read noise small so it is measurable
    OpticsConfig o = preset.optics;
    o.attenuation = 0.5;
    o.background_rate = 0.05;
    o.read_noise = 1.0;

    const int n = 800;
    std::vector<double> ls(n), ss(n);
    for (int k = 0; k < n; ++k) {
        const auto [lo, sh] = render_pair(states, g, o, 15.0, hash_seed(31, k));
        ls[k] = patch_sum(lo, g, 4);
        ss[k] = patch_sum(sh, g, 4);
    }
    auto corr = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double ma = 0, mb = 0;
        for (int i = 0; i < n; ++i) {
            ma += a[i];
            mb += b[i];
        }
        ma /= n;
        mb /= n;
        double num = 0, va = 0, vb = 0;
        for (int i = 0; i < n; ++i) {
            num += (a[i] - ma) * (b[i] - mb);
            va += (a[i] - ma) * (a[i] - ma);
            vb += (b[i] - mb) * (b[i] - mb);
        }
        return num / std::sqrt(va * vb);
    };
    const double paired = corr(ls, ss);
    std::vector<double> shuffled(ss);
    std::rotate(shuffled.begin(), shuffled.begin() + 1, shuffled.end());
    const double broken = corr(ls, shuffled);
    CHECK(paired > 0.2);
    CHECK(broken < paired * 0.5);
}

TEST_CASE("generate_dataset determinism and parallel invariance") {
    const auto preset = desk_preset_5um();
    const std::vector<double> durations{15.0, 47.0};

    set_parallel(true);
    const Dataset a = generate_dataset(preset.geometry, preset.optics, durations, 10, 0.5, 77);
    const Dataset b = generate_dataset(preset.geometry, preset.optics, durations, 10, 0.5, 77);
    set_parallel(false);
    const Dataset c = generate_dataset(preset.geometry, preset.optics, durations, 10, 0.5, 77);
    set_parallel(true);

    REQUIRE(a.shots.size() == 20);
    for (size_t i = 0; i < a.shots.size(); ++i) {
        CHECK(a.shots[i].long_image.px == b.shots[i].long_image.px);
        CHECK(a.shots[i].long_image.px == c.shots[i].long_image.px);
        CHECK(a.shots[i].short_image.px == c.shots[i].short_image.px);
        CHECK(a.shots[i].true_states == c.shots[i].true_states);
    }

    // effective short durations are attenuation * long durations
    CHECK(a.shots.front().duration_ms * preset.optics.attenuation == doctest::Approx(1.5));

    // empty dataset is valid but unsplittable
    const Dataset empty =
        generate_dataset(preset.geometry, preset.optics, durations, 0, 0.5, 1);
    CHECK(empty.shots.empty());
    CHECK_THROWS(compute_norm_stats(empty));

    CHECK_THROWS(generate_dataset(preset.geometry, preset.optics, {}, 5, 0.5, 1));
}

TEST_CASE("splits are disjoint, cover all shots, and follow 65/15/20") {
    const auto preset = desk_preset_5um();
    const Dataset d =
        generate_dataset(preset.geometry, preset.optics, {15.0, 47.0}, 100, 0.5, 3);
    CHECK(d.train_idx.size() + d.val_idx.size() + d.test_idx.size() == d.shots.size());
    std::vector<uint8_t> seen(d.shots.size(), 0);
    for (auto idx : {d.train_idx, d.val_idx, d.test_idx})
        for (size_t i : idx) {
            CHECK_FALSE(seen[i]);
            seen[i] = 1;
        }
    CHECK(d.train_idx.size() == 130);  // 65% of 200
    CHECK(d.val_idx.size() == 30);
    CHECK(d.test_idx.size() == 40);
}

TEST_CASE("normalization formula, inverse, and degenerate range") {
    NormStats stats{1.0, 0.0, 2.0};
    Frame f(1, 3);
    f.px = {0.0, 1.0, 2.0};
    const Frame n = normalize(f, stats);
    CHECK(n.px[0] == doctest::Approx(-0.5));
    CHECK(n.px[1] == doctest::Approx(0.0));
    CHECK(n.px[2] == doctest::Approx(0.5));

    const Frame back = denormalize(n, stats);
    for (int i = 0; i < 3; ++i)
        CHECK(back.px[i] == doctest::Approx(f.px[i]).epsilon(1e-9));

    // held-out pixel outside [i_min, i_max] maps by the same affine rule
    Frame out(1, 1);
    out.px = {5.0};
    CHECK(normalize(out, stats).px[0] == doctest::Approx((5.0 - 1.0) / 2.0));

    const auto preset = desk_preset_5um();
    OpticsConfig o = preset.optics;
    o.bright_rate = o.dark_rate = o.background_rate = 0.0;
    o.read_noise = 0.0;
    Dataset flat = generate_dataset(preset.geometry, o, {15.0}, 10, 0.5, 5);
    CHECK_THROWS_WITH(compute_norm_stats(flat), "degenerate normalization range");
}

TEST_CASE("norm stats come from the train split only") {
    const auto preset = desk_preset_5um();
    const Dataset d =
        generate_dataset(preset.geometry, preset.optics, {15.0}, 40, 0.5, 9);
    const NormStats stats = compute_norm_stats(d);
    double mn = 1e300, mx = -1e300, sum = 0;
    long long count = 0;
    for (size_t i : d.train_idx)
        for (const Frame* f : {&d.shots[i].long_image, &d.shots[i].short_image})
            for (double v : f->px) {
                mn = std::min(mn, v);
                mx = std::max(mx, v);
                sum += v;
                ++count;
            }
    CHECK(stats.i_min == doctest::Approx(mn));
    CHECK(stats.i_max == doctest::Approx(mx));
    CHECK(stats.mu == doctest::Approx(sum / count));
}

TEST_CASE("dataset save/load round trip and corruption errors") {
    const auto preset = desk_preset_5um();
    Dataset d = generate_dataset(preset.geometry, preset.optics, {15.0}, 12, 0.5, 13);
    d.norm = compute_norm_stats(d);
    const auto dir = temp_dir("ds");
    save_dataset(d, dir.string());

    // file sizes follow the format arithmetic exactly
    const size_t frame_px = static_cast<size_t>(d.geometry.image_h) * d.geometry.image_w;
    CHECK(std::filesystem::file_size(dir / "frames.bin") ==
          2 * d.shots.size() * frame_px * 4);
    CHECK(std::filesystem::file_size(dir / "states.bin") ==
          d.shots.size() * static_cast<size_t>(d.geometry.sites()));

    const Dataset loaded = load_dataset(dir.string());
    REQUIRE(loaded.shots.size() == d.shots.size());
    CHECK(loaded.train_idx == d.train_idx);
    CHECK(loaded.norm->mu == doctest::Approx(d.norm->mu));
    for (size_t i = 0; i < d.shots.size(); ++i) {
        CHECK(loaded.shots[i].true_states == d.shots[i].true_states);
        CHECK(loaded.shots[i].seed == d.shots[i].seed);
        // frames are stored as f32
        for (size_t p = 0; p < frame_px; ++p)
            CHECK(loaded.shots[i].long_image.px[p] ==
                  doctest::Approx(d.shots[i].long_image.px[p]).epsilon(1e-6));
    }

    SUBCASE("corrupt meta magic") {
        auto meta_path = dir / "meta.json";
        std::ifstream in(meta_path);
        std::string content((std::istreambuf_iterator<char>(in)), {});
        in.close();
        auto pos = content.find("atomread-dataset");
        content.replace(pos, 8, "corrupted");
        std::ofstream out(meta_path, std::ios::trunc);
        out << content;
        out.close();
        CHECK_THROWS(load_dataset(dir.string()));
    }
    SUBCASE("flipped byte fails the checksum") {
        auto frames_path = dir / "frames.bin";
        std::fstream f(frames_path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(100);
        char byte;
        f.seekg(100);
        f.read(&byte, 1);
        byte = static_cast<char>(byte ^ 0xff);
        f.seekp(100);
        f.write(&byte, 1);
        f.close();
        CHECK_THROWS_WITH(load_dataset(dir.string()), "dataset checksum failure: frames.bin");
    }
    SUBCASE("truncated frames file") {
        std::filesystem::resize_file(dir / "frames.bin", 1000);
        CHECK_THROWS(load_dataset(dir.string()));
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("stitching geometry, identity tiling, and bookkeeping") {
    const auto preset = desk_preset_5um();
    const Dataset src = generate_dataset(preset.geometry, preset.optics, {15.0}, 20, 0.5, 17);

    SUBCASE("identity tiling reproduces the source shot inside every patch") {
        std::vector<std::pair<size_t, int>> identity;
        for (int s = 0; s < 9; ++s)
            identity.push_back({3, s});
        const StitchedShot st = stitch_array_with_map(src, 3, 3, identity, 1);
        CHECK(st.geometry.image_h == src.geometry.image_h);
        CHECK(st.shot.true_states == src.shots[3].true_states);
        for (int s = 0; s < 9; ++s) {
            CHECK(patch_sum(st.shot.long_image, st.geometry, s) ==
                  doctest::Approx(patch_sum(src.shots[3].long_image, src.geometry, s)));
            CHECK(patch_sum(st.shot.short_image, st.geometry, s) ==
                  doctest::Approx(patch_sum(src.shots[3].short_image, src.geometry, s)));
        }
    }

    SUBCASE("8x8 target has the derived frame size and 64 state bits") {
        const StitchedShot st = stitch_array(src, 8, 8, 5);
        const int expect_h = 7 * src.geometry.pitch_px + 2 * src.geometry.origin_y;
        CHECK(st.geometry.image_h == expect_h);
        CHECK(st.geometry.image_w == expect_h);
        CHECK(st.shot.true_states.size() == 64);

        // per-patch pixels match the recorded sources exactly
        for (int t = 0; t < 64; ++t) {
            const auto& [shot_id, site_id] = st.sources[t];
            CHECK(patch_sum(st.shot.long_image, st.geometry, t) ==
                  doctest::Approx(
                      patch_sum(src.shots[shot_id].long_image, src.geometry, site_id)));
        }
    }

    SUBCASE("stitch is deterministic and respects the size limit") {
        const StitchedShot a = stitch_array(src, 4, 4, 9);
        const StitchedShot b = stitch_array(src, 4, 4, 9);
        CHECK(a.shot.long_image.px == b.shot.long_image.px);

        StitchOptions opts;
        opts.max_frame_px = 40;
        CHECK_THROWS(stitch_array(src, 8, 8, 1, opts));
        CHECK_THROWS(stitch_array(src, 2, 2, 1));  // target smaller than source
    }

    SUBCASE("paper scaling sizes fit the default limit") {
        for (int n : {4, 8, 16, 32, 64}) {
            const auto g = stitched_geometry(src.geometry, n, n);
            CHECK(g.image_h <= 4096);
            g.validate();
        }
    }
}

TEST_CASE("relabeling from the long exposure stays close to ground truth") {
    const auto preset = desk_preset_5um();
    Dataset d = generate_dataset(preset.geometry, preset.optics, {100.0}, 60, 0.5, 23);
    std::vector<std::vector<uint8_t>> truth;
    for (const auto& s : d.shots)
        truth.push_back(s.true_states);
    relabel_from_long_exposure(d);
    long long agree = 0, total = 0;
    for (size_t i = 0; i < d.shots.size(); ++i)
        for (int s = 0; s < d.geometry.sites(); ++s) {
            agree += d.shots[i].true_states[s] == truth[i][s];
            ++total;
        }
    // at 100 ms the long path separates cleanly, so labels barely change
    CHECK(static_cast<double>(agree) / total > 0.99);
}
