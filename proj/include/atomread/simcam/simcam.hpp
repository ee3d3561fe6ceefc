#ifndef ATOMREAD_SIMCAM_SIMCAM_HPP
#define ATOMREAD_SIMCAM_SIMCAM_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "atomread/core/tensor.hpp"

namespace atomread::simcam {

// Site lattice placed on a pixel frame. Site (r, c) is centered at
// origin + (r, c) * pitch.
struct LatticeGeometry {
    int rows = 3, cols = 3;
    int pitch_px = 9;
    int patch_px = 9;  // odd
    int image_h = 28, image_w = 28;
    int origin_y = 5, origin_x = 5;

    int sites() const { return rows * cols; }
    int site_center_y(int site) const { return origin_y + (site / cols) * pitch_px; }
    int site_center_x(int site) const { return origin_x + (site % cols) * pitch_px; }
    void validate() const;
};

struct OpticsConfig {
    double bright_rate = 36.0;      // detected photons / ms, bright site
    double dark_rate = 0.36;         // off-resonant scattering of dark sites
    double background_rate = 2.0;   // photons / pixel / ms on the primary path
    double psf_sigma_px = 1.4;
    double attenuation = 0.1;       // secondary-path fraction of the shared signal
    double em_gain = 50.0;          // camera counts per detected photon
    double read_noise = 10.0;       // Gaussian std in counts
    double bias = 100.0;
    void validate() const;
};

// One shot: the photon stream is realized once; the short frame is a
// binomial thinning of it, so the two frames stay correlated.
struct ShotRecord {
    std::vector<uint8_t> true_states;  // 1 = bright, row-major sites
    Frame long_image;
    Frame short_image;
    double duration_ms = 0.0;  // long-path exposure
    uint64_t seed = 0;
};

struct NormStats {
    double mu = 0.0;
    double i_min = 0.0;
    double i_max = 1.0;
};

struct Dataset {
    LatticeGeometry geometry;
    OpticsConfig optics;
    std::vector<ShotRecord> shots;
    std::vector<size_t> train_idx, val_idx, test_idx;
    std::optional<NormStats> norm;
    std::vector<double> durations_ms;  // distinct long-path durations generated
    uint64_t base_seed = 0;
    double p_bright = 0.5;
    bool denoised = false;  // short frames replaced by denoiser output

    std::vector<size_t> split(const std::string& name) const;
};

std::vector<uint8_t> sample_states(const LatticeGeometry& geometry, double p_bright,
                                   uint64_t rng_seed);

// Pre-camera photon count frames, exposed for the dispersion/correlation
// statistics tests.
struct RenderDebug {
    Frame long_photons;
    Frame short_photons;
};

std::pair<Frame, Frame> render_pair(const std::vector<uint8_t>& states,
                                    const LatticeGeometry& geometry,
                                    const OpticsConfig& optics, double duration_ms,
                                    uint64_t rng_seed, RenderDebug* debug = nullptr);

// Shot k draws seed hash(base_seed, k); generation parallelizes over shots
// and is invariant to worker count.
Dataset generate_dataset(const LatticeGeometry& geometry, const OpticsConfig& optics,
                         const std::vector<double>& durations_ms,
                         int shots_per_duration, double p_bright, uint64_t base_seed);

void assign_splits(Dataset& dataset, double train_frac = 0.65, double val_frac = 0.15,
                   uint64_t seed_salt = 0);

// Optional label pipeline emulation: relabel sites by thresholding the
// long-exposure patch sum, which injects realistic label noise.
void relabel_from_long_exposure(Dataset& dataset);

struct StitchedShot {
    ShotRecord shot;
    // source of each target site: index into source.shots and source site
    std::vector<std::pair<size_t, int>> sources;
    LatticeGeometry geometry;
};

struct StitchOptions {
    int max_frame_px = 4096;
};

// Tiles randomly drawn site patches (long and short from the same source
// shot) onto a larger lattice with the source pitch; margins are filled from
// the source background statistics.
StitchedShot stitch_array(const Dataset& source, int target_rows, int target_cols,
                          uint64_t rng_seed, const StitchOptions& opts = {});

// Deterministic variant with explicit (shot, site) assignment per target site.
StitchedShot stitch_array_with_map(const Dataset& source, int target_rows,
                                   int target_cols,
                                   const std::vector<std::pair<size_t, int>>& tile_map,
                                   uint64_t rng_seed, const StitchOptions& opts = {});

LatticeGeometry stitched_geometry(const LatticeGeometry& source, int target_rows,
                                  int target_cols);

// A whole stitched dataset sharing one geometry, for the scaling studies.
Dataset make_stitched_dataset(const Dataset& source, int target_rows, int target_cols,
                              int n_shots, uint64_t seed, const StitchOptions& opts = {});

// Copy of the selected shots (all assigned to the test split), e.g. to build
// stitch sources from held-out data.
Dataset subset_dataset(const Dataset& d, const std::vector<size_t>& indices);

// I' = (I - mu) / (i_max - i_min), stats from the train split (long and short
// frames pooled). Constant split -> "degenerate normalization range".
NormStats compute_norm_stats(const Dataset& dataset, const std::string& split = "train");
Frame normalize(const Frame& image, const NormStats& stats);
Frame denormalize(const Frame& image, const NormStats& stats);

void save_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// Desk-scale presets: 3x3 sites in 28x28 (5um analog, wider psf/pitch ratio)
// and 3x3 in 32x32 (9um analog).
struct Preset {
    LatticeGeometry geometry;
    OpticsConfig optics;
    std::vector<double> durations_ms;
};
Preset desk_preset_5um();
Preset desk_preset_9um();

}  // namespace atomread::simcam

#endif
