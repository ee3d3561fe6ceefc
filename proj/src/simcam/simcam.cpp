#include "atomread/simcam/simcam.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

#include <json.hpp>

#include "atomread/core/checksum.hpp"
#include "atomread/core/parallel.hpp"
#include "atomread/core/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace atomread::simcam {

void LatticeGeometry::validate() const {
    require(rows >= 1 && cols >= 1, "geometry: rows/cols must be >= 1");
    require(pitch_px >= 1, "geometry: pitch must be >= 1");
    require(patch_px % 2 == 1, "geometry: patch_px must be odd");
    require(patch_px <= pitch_px + 2, "geometry: patch_px must be <= pitch_px + 2");
    const int half = patch_px / 2;
    for (int s = 0; s < sites(); ++s) {
        const int cy = site_center_y(s), cx = site_center_x(s);
        require(cy - half >= 0 && cy + half <= image_h - 1 && cx - half >= 0 &&
                    cx + half <= image_w - 1,
                "geometry: site " + std::to_string(s) + " patch leaves the frame");
    }
}

void OpticsConfig::validate() const {
    require(attenuation > 0.0 && attenuation <= 1.0, "optics: attenuation must be in (0,1]");
    require(bright_rate >= 0.0 && dark_rate >= 0.0 && background_rate >= 0.0,
            "optics: rates must be >= 0");
    require(em_gain > 0.0, "optics: em_gain must be > 0");
    require(psf_sigma_px > 0.0, "optics: psf_sigma_px must be > 0");
    require(read_noise >= 0.0, "optics: read_noise must be >= 0");
}

std::vector<size_t> Dataset::split(const std::string& name) const {
    if (name == "train")
        return train_idx;
    if (name == "val")
        return val_idx;
    if (name == "test")
        return test_idx;
    throw std::invalid_argument("unknown split: " + name);
}

std::vector<uint8_t> sample_states(const LatticeGeometry& geometry, double p_bright,
                                   uint64_t rng_seed) {
    require(p_bright >= 0.0 && p_bright <= 1.0, "p_bright must be in [0,1]");
    auto rng = make_engine(rng_seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<uint8_t> states(static_cast<size_t>(geometry.sites()));
    for (auto& s : states)
        s = uni(rng) < p_bright ? 1 : 0;
    return states;
}

namespace {

// Photon counts -> camera counts: EM register as Gamma(n, gain), then read
// noise and bias.
void apply_camera(const Frame& photons, const OpticsConfig& o, std::mt19937_64& rng,
                  Frame& out) {
    std::normal_distribution<double> readn(0.0, 1.0);
    for (size_t i = 0; i < photons.px.size(); ++i) {
        const double n = photons.px[i];
        double counts = 0.0;
        if (n > 0.0) {
            std::gamma_distribution<double> gamma(n, o.em_gain);
            counts = gamma(rng);
        }
        counts += o.bias;
        if (o.read_noise > 0.0)
            counts += o.read_noise * readn(rng);
        out.px[i] = counts;
    }
}

}  // namespace

std::pair<Frame, Frame> render_pair(const std::vector<uint8_t>& states,
                                    const LatticeGeometry& geometry,
                                    const OpticsConfig& optics, double duration_ms,
                                    uint64_t rng_seed, RenderDebug* debug) {
    geometry.validate();
    optics.validate();
    require(static_cast<int>(states.size()) == geometry.sites(),
            "render_pair: states length != rows*cols");
    require(duration_ms > 0.0, "render_pair: duration must be > 0");

    auto rng = make_engine(rng_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    Frame long_photons(geometry.image_h, geometry.image_w);
    Frame short_photons(geometry.image_h, geometry.image_w);

    // Shared photon-arrival realization; the secondary path keeps each photon
    // with probability `attenuation` (binomial thinning).
    for (int s = 0; s < geometry.sites(); ++s) {
        const double rate = states[static_cast<size_t>(s)] ? optics.bright_rate
                                                           : optics.dark_rate;
        const double mean_photons = rate * duration_ms;
        long n = 0;
        if (mean_photons > 0.0) {
            std::poisson_distribution<long> poisson(mean_photons);
            n = poisson(rng);
        }
        const double cy = geometry.site_center_y(s);
        const double cx = geometry.site_center_x(s);
        for (long k = 0; k < n; ++k) {
            const double py = cy + optics.psf_sigma_px * gauss(rng);
            const double px = cx + optics.psf_sigma_px * gauss(rng);
            const bool keep_short = uni(rng) < optics.attenuation;
            const int iy = static_cast<int>(std::lround(py));
            const int ix = static_cast<int>(std::lround(px));
            if (iy < 0 || iy >= geometry.image_h || ix < 0 || ix >= geometry.image_w)
                continue;
            long_photons.at(iy, ix) += 1.0;
            if (keep_short)
                short_photons.at(iy, ix) += 1.0;
        }
    }

    // Independent per-pixel background on each path, scaled by the path
    // fraction of the shared exposure.
    const double bg_long = optics.background_rate * duration_ms;
    const double bg_short = bg_long * optics.attenuation;
    for (auto [photons, mean] : {std::pair<Frame*, double>{&long_photons, bg_long},
                                 std::pair<Frame*, double>{&short_photons, bg_short}}) {
        if (mean <= 0.0)
            continue;
        std::poisson_distribution<long> poisson(mean);
        for (auto& p : photons->px)
            p += static_cast<double>(poisson(rng));
    }

    if (debug) {
        debug->long_photons = long_photons;
        debug->short_photons = short_photons;
    }

    Frame long_image(geometry.image_h, geometry.image_w);
    Frame short_image(geometry.image_h, geometry.image_w);
    apply_camera(long_photons, optics, rng, long_image);
    apply_camera(short_photons, optics, rng, short_image);
    return {std::move(long_image), std::move(short_image)};
}

Dataset generate_dataset(const LatticeGeometry& geometry, const OpticsConfig& optics,
                         const std::vector<double>& durations_ms,
                         int shots_per_duration, double p_bright, uint64_t base_seed) {
    require(!durations_ms.empty(), "generate_dataset: durations must be non-empty");
    require(shots_per_duration >= 0, "generate_dataset: negative shot count");
    geometry.validate();
    optics.validate();

    Dataset d;
    d.geometry = geometry;
    d.optics = optics;
    // repeated durations are allowed (weighted pooling); keep distinct values
    for (double dur : durations_ms)
        if (std::find(d.durations_ms.begin(), d.durations_ms.end(), dur) ==
            d.durations_ms.end())
            d.durations_ms.push_back(dur);
    d.base_seed = base_seed;
    d.p_bright = p_bright;

    const size_t total = durations_ms.size() * static_cast<size_t>(shots_per_duration);
    d.shots.resize(total);
    parallel_for(static_cast<int64_t>(total), [&](int64_t k) {
        const uint64_t shot_seed = hash_seed(base_seed, static_cast<uint64_t>(k));
        ShotRecord& shot = d.shots[static_cast<size_t>(k)];
        shot.seed = shot_seed;
        shot.duration_ms =
            durations_ms[static_cast<size_t>(k) / static_cast<size_t>(shots_per_duration)];
        shot.true_states = sample_states(geometry, p_bright, hash_seed(shot_seed, 1));
        auto [lo, sh] = render_pair(shot.true_states, geometry, optics,
                                    shot.duration_ms, hash_seed(shot_seed, 2));
        shot.long_image = std::move(lo);
        shot.short_image = std::move(sh);
    });

    if (!d.shots.empty())
        assign_splits(d);
    return d;
}

void assign_splits(Dataset& dataset, double train_frac, double val_frac,
                   uint64_t seed_salt) {
    require(!dataset.shots.empty(), "assign_splits: empty dataset");
    require(train_frac > 0.0 && val_frac >= 0.0 && train_frac + val_frac < 1.0 + 1e-12,
            "assign_splits: bad fractions");
    dataset.train_idx.clear();
    dataset.val_idx.clear();
    dataset.test_idx.clear();

    // Stratified per duration so every duration is represented in each split.
    std::vector<double> durations;
    for (const auto& s : dataset.shots)
        if (std::find(durations.begin(), durations.end(), s.duration_ms) == durations.end())
            durations.push_back(s.duration_ms);

    for (size_t g = 0; g < durations.size(); ++g) {
        std::vector<size_t> idx;
        for (size_t i = 0; i < dataset.shots.size(); ++i)
            if (dataset.shots[i].duration_ms == durations[g])
                idx.push_back(i);
        auto rng = make_engine(hash_seed(dataset.base_seed ^ seed_salt, 0xA110 + g));
        std::shuffle(idx.begin(), idx.end(), rng);
        const size_t n = idx.size();
        const size_t n_train = static_cast<size_t>(std::lround(train_frac * n));
        const size_t n_val = std::min(n - n_train,
                                      static_cast<size_t>(std::lround(val_frac * n)));
        for (size_t i = 0; i < n; ++i) {
            if (i < n_train)
                dataset.train_idx.push_back(idx[i]);
            else if (i < n_train + n_val)
                dataset.val_idx.push_back(idx[i]);
            else
                dataset.test_idx.push_back(idx[i]);
        }
    }
    std::sort(dataset.train_idx.begin(), dataset.train_idx.end());
    std::sort(dataset.val_idx.begin(), dataset.val_idx.end());
    std::sort(dataset.test_idx.begin(), dataset.test_idx.end());
}

namespace {
double patch_sum(const Frame& f, const LatticeGeometry& g, int site) {
    const int half = g.patch_px / 2;
    const int cy = g.site_center_y(site), cx = g.site_center_x(site);
    double acc = 0.0;
    for (int y = cy - half; y <= cy + half; ++y)
        for (int x = cx - half; x <= cx + half; ++x)
            acc += f.at(y, x);
    return acc;
}
}  // namespace

void relabel_from_long_exposure(Dataset& dataset) {
    require(!dataset.shots.empty(), "relabel: empty dataset");
    const int sites = dataset.geometry.sites();
    for (int s = 0; s < sites; ++s) {
        std::vector<double> sums(dataset.shots.size());
        for (size_t i = 0; i < dataset.shots.size(); ++i)
            sums[i] = patch_sum(dataset.shots[i].long_image, dataset.geometry, s);
        // 1-D two-means split of the long-exposure sums.
        auto [mn, mx] = std::minmax_element(sums.begin(), sums.end());
        double c0 = *mn, c1 = *mx;
        for (int iter = 0; iter < 50; ++iter) {
            double s0 = 0, s1 = 0;
            long n0 = 0, n1 = 0;
            const double mid = 0.5 * (c0 + c1);
            for (double v : sums)
                (v < mid ? (s0 += v, ++n0) : (s1 += v, ++n1));
            if (n0 == 0 || n1 == 0)
                break;
            const double nc0 = s0 / n0, nc1 = s1 / n1;
            if (nc0 == c0 && nc1 == c1)
                break;
            c0 = nc0;
            c1 = nc1;
        }
        const double threshold = 0.5 * (c0 + c1);
        for (size_t i = 0; i < dataset.shots.size(); ++i)
            dataset.shots[i].true_states[static_cast<size_t>(s)] =
                sums[i] >= threshold ? 1 : 0;
    }
}

LatticeGeometry stitched_geometry(const LatticeGeometry& source, int target_rows,
                                  int target_cols) {
    LatticeGeometry g = source;
    g.rows = target_rows;
    g.cols = target_cols;
    g.image_h = (target_rows - 1) * source.pitch_px + 2 * source.origin_y;
    g.image_w = (target_cols - 1) * source.pitch_px + 2 * source.origin_x;
    return g;
}

namespace {

struct BackgroundStats {
    double mean = 0.0, std = 0.0;
};

BackgroundStats background_stats(const Dataset& source,
                                 const std::vector<size_t>& shot_ids, bool long_path) {
    const auto& g = source.geometry;
    const int half = g.patch_px / 2;
    std::vector<uint8_t> in_patch(static_cast<size_t>(g.image_h) * g.image_w, 0);
    for (int s = 0; s < g.sites(); ++s) {
        const int cy = g.site_center_y(s), cx = g.site_center_x(s);
        for (int y = cy - half; y <= cy + half; ++y)
            for (int x = cx - half; x <= cx + half; ++x)
                in_patch[static_cast<size_t>(y) * g.image_w + x] = 1;
    }
    double sum = 0.0, sum2 = 0.0;
    long count = 0;
    for (size_t id : shot_ids) {
        const Frame& f = long_path ? source.shots[id].long_image
                                   : source.shots[id].short_image;
        for (size_t i = 0; i < f.px.size(); ++i) {
            if (in_patch[i])
                continue;
            sum += f.px[i];
            sum2 += f.px[i] * f.px[i];
            ++count;
        }
    }
    BackgroundStats st;
    if (count > 0) {
        st.mean = sum / count;
        st.std = std::sqrt(std::max(0.0, sum2 / count - st.mean * st.mean));
    }
    return st;
}

void paste_patch(Frame& dst, const LatticeGeometry& dst_g, int dst_site,
                 const Frame& src, const LatticeGeometry& src_g, int src_site) {
    const int half = dst_g.patch_px / 2;
    const int dy = dst_g.site_center_y(dst_site), dx = dst_g.site_center_x(dst_site);
    const int sy = src_g.site_center_y(src_site), sx = src_g.site_center_x(src_site);
    for (int y = -half; y <= half; ++y)
        for (int x = -half; x <= half; ++x)
            dst.at(dy + y, dx + x) = src.at(sy + y, sx + x);
}

}  // namespace

StitchedShot stitch_array_with_map(const Dataset& source, int target_rows,
                                   int target_cols,
                                   const std::vector<std::pair<size_t, int>>& tile_map,
                                   uint64_t rng_seed, const StitchOptions& opts) {
    require(!source.shots.empty(), "stitch: empty source dataset");
    require(target_rows >= source.geometry.rows && target_cols >= source.geometry.cols,
            "stitch: target dims must be >= source dims");
    const LatticeGeometry g = stitched_geometry(source.geometry, target_rows, target_cols);
    require(g.image_h <= opts.max_frame_px && g.image_w <= opts.max_frame_px,
            "stitch: target frame exceeds configured max size");
    require(static_cast<int>(tile_map.size()) == g.sites(), "stitch: tile map size mismatch");
    g.validate();

    std::vector<size_t> used;
    for (const auto& [shot, site] : tile_map) {
        require(shot < source.shots.size(), "stitch: shot index out of range");
        require(site >= 0 && site < source.geometry.sites(),
                "stitch: site index out of range");
        if (std::find(used.begin(), used.end(), shot) == used.end())
            used.push_back(shot);
    }

    const BackgroundStats bg_long = background_stats(source, used, true);
    const BackgroundStats bg_short = background_stats(source, used, false);

    StitchedShot out;
    out.geometry = g;
    out.sources = tile_map;
    out.shot.seed = rng_seed;
    out.shot.duration_ms = source.shots[tile_map.front().first].duration_ms;
    out.shot.long_image = Frame(g.image_h, g.image_w);
    out.shot.short_image = Frame(g.image_h, g.image_w);
    out.shot.true_states.resize(static_cast<size_t>(g.sites()));

    auto rng = make_engine(hash_seed(rng_seed, 0xBACC));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (auto& p : out.shot.long_image.px)
        p = bg_long.mean + bg_long.std * gauss(rng);
    for (auto& p : out.shot.short_image.px)
        p = bg_short.mean + bg_short.std * gauss(rng);

    for (int t = 0; t < g.sites(); ++t) {
        const auto& [shot_id, site_id] = tile_map[static_cast<size_t>(t)];
        const ShotRecord& src = source.shots[shot_id];
        out.shot.true_states[static_cast<size_t>(t)] =
            src.true_states[static_cast<size_t>(site_id)];
        paste_patch(out.shot.long_image, g, t, src.long_image, source.geometry, site_id);
        paste_patch(out.shot.short_image, g, t, src.short_image, source.geometry, site_id);
    }
    return out;
}

StitchedShot stitch_array(const Dataset& source, int target_rows, int target_cols,
                          uint64_t rng_seed, const StitchOptions& opts) {
    const LatticeGeometry g = stitched_geometry(source.geometry, target_rows, target_cols);
    auto rng = make_engine(hash_seed(rng_seed, 0x711E));
    std::uniform_int_distribution<size_t> shot_pick(0, source.shots.size() - 1);
    std::uniform_int_distribution<int> site_pick(0, source.geometry.sites() - 1);
    std::vector<std::pair<size_t, int>> tile_map(static_cast<size_t>(g.sites()));
    for (auto& t : tile_map)
        t = {shot_pick(rng), site_pick(rng)};
    return stitch_array_with_map(source, target_rows, target_cols, tile_map, rng_seed,
                                 opts);
}

Dataset make_stitched_dataset(const Dataset& source, int target_rows, int target_cols,
                              int n_shots, uint64_t seed, const StitchOptions& opts) {
    Dataset d;
    d.geometry = stitched_geometry(source.geometry, target_rows, target_cols);
    d.optics = source.optics;
    d.norm = source.norm;
    d.denoised = source.denoised;
    d.base_seed = seed;
    d.p_bright = source.p_bright;
    d.shots.resize(static_cast<size_t>(n_shots));
    parallel_for(n_shots, [&](int64_t k) {
        StitchedShot s = stitch_array(source, target_rows, target_cols,
                                      hash_seed(seed, static_cast<uint64_t>(k)), opts);
        d.shots[static_cast<size_t>(k)] = std::move(s.shot);
    });
    for (const auto& s : d.shots)
        if (std::find(d.durations_ms.begin(), d.durations_ms.end(), s.duration_ms) ==
            d.durations_ms.end())
            d.durations_ms.push_back(s.duration_ms);
    d.test_idx.resize(d.shots.size());
    std::iota(d.test_idx.begin(), d.test_idx.end(), 0);
    return d;
}

Dataset subset_dataset(const Dataset& d, const std::vector<size_t>& indices) {
    Dataset out;
    out.geometry = d.geometry;
    out.optics = d.optics;
    out.norm = d.norm;
    out.denoised = d.denoised;
    out.base_seed = d.base_seed;
    out.p_bright = d.p_bright;
    for (size_t i : indices) {
        require(i < d.shots.size(), "subset: index out of range");
        out.shots.push_back(d.shots[i]);
    }
    for (const auto& s : out.shots)
        if (std::find(out.durations_ms.begin(), out.durations_ms.end(), s.duration_ms) ==
            out.durations_ms.end())
            out.durations_ms.push_back(s.duration_ms);
    out.test_idx.resize(out.shots.size());
    std::iota(out.test_idx.begin(), out.test_idx.end(), 0);
    return out;
}

NormStats compute_norm_stats(const Dataset& dataset, const std::string& split) {
    const auto idx = dataset.split(split);
    require(!idx.empty(), "compute_norm_stats: empty split");
    double sum = 0.0;
    double mn = std::numeric_limits<double>::infinity();
    double mx = -std::numeric_limits<double>::infinity();
    long long count = 0;
    for (size_t i : idx) {
        for (const Frame* f :
             {&dataset.shots[i].long_image, &dataset.shots[i].short_image}) {
            for (double v : f->px) {
                sum += v;
                mn = std::min(mn, v);
                mx = std::max(mx, v);
            }
            count += static_cast<long long>(f->px.size());
        }
    }
    if (!(mx > mn))
        throw std::runtime_error("degenerate normalization range");
    return NormStats{sum / static_cast<double>(count), mn, mx};
}

Frame normalize(const Frame& image, const NormStats& stats) {
    require(stats.i_max > stats.i_min, "normalize: degenerate normalization range");
    Frame out(image.h, image.w);
    const double inv = 1.0 / (stats.i_max - stats.i_min);
    for (size_t i = 0; i < image.px.size(); ++i)
        out.px[i] = (image.px[i] - stats.mu) * inv;
    return out;
}

Frame denormalize(const Frame& image, const NormStats& stats) {
    Frame out(image.h, image.w);
    const double range = stats.i_max - stats.i_min;
    for (size_t i = 0; i < image.px.size(); ++i)
        out.px[i] = image.px[i] * range + stats.mu;
    return out;
}

namespace {

json geometry_to_json(const LatticeGeometry& g) {
    return {{"rows", g.rows},         {"cols", g.cols},
            {"pitch_px", g.pitch_px}, {"patch_px", g.patch_px},
            {"image_h", g.image_h},   {"image_w", g.image_w},
            {"origin_y", g.origin_y}, {"origin_x", g.origin_x}};
}

LatticeGeometry geometry_from_json(const json& j) {
    LatticeGeometry g;
    g.rows = j.at("rows");
    g.cols = j.at("cols");
    g.pitch_px = j.at("pitch_px");
    g.patch_px = j.at("patch_px");
    g.image_h = j.at("image_h");
    g.image_w = j.at("image_w");
    g.origin_y = j.at("origin_y");
    g.origin_x = j.at("origin_x");
    return g;
}

json optics_to_json(const OpticsConfig& o) {
    return {{"bright_rate", o.bright_rate},
            {"dark_rate", o.dark_rate},
            {"background_rate", o.background_rate},
            {"psf_sigma_px", o.psf_sigma_px},
            {"attenuation", o.attenuation},
            {"em_gain", o.em_gain},
            {"read_noise", o.read_noise},
            {"bias", o.bias}};
}

OpticsConfig optics_from_json(const json& j) {
    OpticsConfig o;
    o.bright_rate = j.at("bright_rate");
    o.dark_rate = j.at("dark_rate");
    o.background_rate = j.at("background_rate");
    o.psf_sigma_px = j.at("psf_sigma_px");
    o.attenuation = j.at("attenuation");
    o.em_gain = j.at("em_gain");
    o.read_noise = j.at("read_noise");
    o.bias = j.at("bias");
    return o;
}

constexpr int kDatasetVersion = 1;

}  // namespace

void save_dataset(const Dataset& dataset, const std::string& dir) {
    fs::create_directories(dir);
    const auto& g = dataset.geometry;
    const size_t frame_px = static_cast<size_t>(g.image_h) * g.image_w;
    const size_t n = dataset.shots.size();

    // frames.bin: all long frames then all short frames, f32 LE, shot-major.
    std::vector<float> buf(frame_px);
    std::ofstream frames(fs::path(dir) / "frames.bin", std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(frames), "cannot write frames.bin");
    auto write_frame = [&](const Frame& f) {
        for (size_t i = 0; i < frame_px; ++i)
            buf[i] = static_cast<float>(f.px[i]);
        frames.write(reinterpret_cast<const char*>(buf.data()),
                     static_cast<std::streamsize>(frame_px * sizeof(float)));
    };
    for (const auto& s : dataset.shots)
        write_frame(s.long_image);
    for (const auto& s : dataset.shots)
        write_frame(s.short_image);
    frames.close();

    std::ofstream states(fs::path(dir) / "states.bin", std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(states), "cannot write states.bin");
    for (const auto& s : dataset.shots)
        states.write(reinterpret_cast<const char*>(s.true_states.data()),
                     static_cast<std::streamsize>(s.true_states.size()));
    states.close();

    json meta;
    meta["format"] = "atomread-dataset";
    meta["version"] = kDatasetVersion;
    meta["geometry"] = geometry_to_json(g);
    meta["optics"] = optics_to_json(dataset.optics);
    meta["durations_ms"] = dataset.durations_ms;
    meta["p_bright"] = dataset.p_bright;
    meta["base_seed"] = dataset.base_seed;
    meta["denoised"] = dataset.denoised;
    meta["n_shots"] = n;
    json seeds = json::array(), durs = json::array();
    for (const auto& s : dataset.shots) {
        seeds.push_back(s.seed);
        durs.push_back(s.duration_ms);
    }
    meta["shot_seeds"] = std::move(seeds);
    meta["shot_durations_ms"] = std::move(durs);
    meta["splits"] = {{"train", dataset.train_idx},
                      {"val", dataset.val_idx},
                      {"test", dataset.test_idx}};
    if (dataset.norm)
        meta["norm"] = {{"mu", dataset.norm->mu},
                        {"i_min", dataset.norm->i_min},
                        {"i_max", dataset.norm->i_max}};
    meta["checksums"] = {
        {"frames", fnv1a64_file_hex((fs::path(dir) / "frames.bin").string())},
        {"states", fnv1a64_file_hex((fs::path(dir) / "states.bin").string())}};

    std::ofstream mj(fs::path(dir) / "meta.json", std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(mj), "cannot write meta.json");
    mj << meta.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream mj(fs::path(dir) / "meta.json");
    if (!mj)
        throw std::runtime_error("dataset missing meta.json: " + dir);
    json meta = json::parse(mj);

    if (meta.value("format", "") != std::string("atomread-dataset"))
        throw std::runtime_error("dataset header magic mismatch");
    if (meta.at("version").get<int>() != kDatasetVersion)
        throw std::runtime_error("dataset version mismatch");

    Dataset d;
    d.geometry = geometry_from_json(meta.at("geometry"));
    d.optics = optics_from_json(meta.at("optics"));
    d.durations_ms = meta.at("durations_ms").get<std::vector<double>>();
    d.p_bright = meta.at("p_bright");
    d.base_seed = meta.at("base_seed");
    d.denoised = meta.value("denoised", false);
    d.train_idx = meta.at("splits").at("train").get<std::vector<size_t>>();
    d.val_idx = meta.at("splits").at("val").get<std::vector<size_t>>();
    d.test_idx = meta.at("splits").at("test").get<std::vector<size_t>>();
    if (meta.contains("norm"))
        d.norm = NormStats{meta["norm"].at("mu"), meta["norm"].at("i_min"),
                           meta["norm"].at("i_max")};

    const std::string frames_path = (fs::path(dir) / "frames.bin").string();
    const std::string states_path = (fs::path(dir) / "states.bin").string();
    if (fnv1a64_file_hex(frames_path) != meta.at("checksums").at("frames"))
        throw std::runtime_error("dataset checksum failure: frames.bin");
    if (fnv1a64_file_hex(states_path) != meta.at("checksums").at("states"))
        throw std::runtime_error("dataset checksum failure: states.bin");

    const size_t n = meta.at("n_shots");
    const auto seeds = meta.at("shot_seeds").get<std::vector<uint64_t>>();
    const auto durs = meta.at("shot_durations_ms").get<std::vector<double>>();
    require(seeds.size() == n && durs.size() == n, "dataset meta table size mismatch");

    const size_t frame_px =
        static_cast<size_t>(d.geometry.image_h) * d.geometry.image_w;
    const size_t sites = static_cast<size_t>(d.geometry.sites());

    std::ifstream frames(frames_path, std::ios::binary);
    if (!frames)
        throw std::runtime_error("dataset missing frames.bin");
    frames.seekg(0, std::ios::end);
    const auto fsize = static_cast<size_t>(frames.tellg());
    if (fsize != 2 * n * frame_px * sizeof(float))
        throw std::runtime_error("dataset frames.bin truncated");
    frames.seekg(0);

    d.shots.resize(n);
    std::vector<float> buf(frame_px);
    auto read_frame = [&](Frame& f) {
        frames.read(reinterpret_cast<char*>(buf.data()),
                    static_cast<std::streamsize>(frame_px * sizeof(float)));
        f = Frame(d.geometry.image_h, d.geometry.image_w);
        for (size_t i = 0; i < frame_px; ++i)
            f.px[i] = static_cast<double>(buf[i]);
    };
    for (size_t i = 0; i < n; ++i)
        read_frame(d.shots[i].long_image);
    for (size_t i = 0; i < n; ++i)
        read_frame(d.shots[i].short_image);

    std::ifstream states(states_path, std::ios::binary);
    if (!states)
        throw std::runtime_error("dataset missing states.bin");
    states.seekg(0, std::ios::end);
    if (static_cast<size_t>(states.tellg()) != n * sites)
        throw std::runtime_error("dataset states.bin truncated");
    states.seekg(0);
    for (size_t i = 0; i < n; ++i) {
        d.shots[i].true_states.resize(sites);
        states.read(reinterpret_cast<char*>(d.shots[i].true_states.data()),
                    static_cast<std::streamsize>(sites));
        d.shots[i].seed = seeds[i];
        d.shots[i].duration_ms = durs[i];
    }
    return d;
}

Preset desk_preset_5um() {
    Preset p;
    p.geometry = LatticeGeometry{3, 3, 9, 9, 28, 28, 5, 5};
    p.optics = OpticsConfig{};
    p.optics.bright_rate = 36.0;
    p.optics.dark_rate = 0.36;
    p.optics.background_rate = 2.0;
    p.optics.psf_sigma_px = 1.4;  // tighter spacing -> larger sigma/pitch ratio
    p.durations_ms = {15.0, 22.0, 32.0, 47.0, 68.0, 100.0};
    return p;
}

Preset desk_preset_9um() {
    Preset p;
    p.geometry = LatticeGeometry{3, 3, 10, 9, 32, 32, 6, 6};
    p.optics = OpticsConfig{};
    p.optics.bright_rate = 36.0;
    p.optics.dark_rate = 0.36;
    p.optics.background_rate = 2.0;
    p.optics.psf_sigma_px = 1.3;
    p.durations_ms = {15.0, 22.0, 32.0, 47.0, 68.0, 100.0};
    return p;
}

}  // namespace atomread::simcam
