#ifndef ATOMREAD_CLASSIFY_CLASSIFY_HPP
#define ATOMREAD_CLASSIFY_CLASSIFY_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "atomread/core/tensor.hpp"
#include "atomread/simcam/simcam.hpp"

namespace atomread::classify {

enum class Kind { Threshold, MatchedFilter, Fnn, MfNn, CnnSite };
std::string kind_name(Kind k);
Kind kind_from_name(const std::string& name);

struct SitePatch {
    int site = 0;
    int patch_px = 0;
    std::vector<double> pixels;  // row-major patch_px x patch_px
    double sum() const;
};

std::vector<SitePatch> extract_patches(const Frame& frame,
                                       const simcam::LatticeGeometry& geometry);

// Unit-L2 template of (mean bright - mean dark); score is the inner product
// against the dark-mean-centered patch.
struct MatchedFilterTemplate {
    std::vector<double> weights;
    std::vector<double> dark_mean;
    double score(const std::vector<double>& patch_pixels) const;
};

MatchedFilterTemplate build_matched_filter(const std::vector<SitePatch>& patches,
                                           const std::vector<uint8_t>& labels,
                                           bool zero_mean_projection = false);

struct NnHyper {
    double lr = 1e-3;
    int max_epochs = 80;
    int batch_size = 32;
    int patience = 5;  // epochs without val-accuracy improvement
    uint64_t seed = 1;
    int hidden_fnn = 64;
    int hidden_mfnn = 16;
};

// One per-site discriminator. Decision score is a signed scalar per patch
// (>= 0 predicts bright): summed-intensity margin for the threshold model,
// centered matched-filter response, or the logit margin for the networks.
struct ClassifierModel {
    Kind kind = Kind::Threshold;
    int site = 0;
    int patch_px = 0;
    std::string source = "raw-short";

    // threshold model
    double threshold = 0.0;
    double mean_dark = 0.0, mean_bright = 0.0;
    double var_dark = 0.0, var_bright = 0.0;

    // matched filter
    MatchedFilterTemplate mf;
    double mf_threshold = 0.0;

    // networks: flat parameter blobs per layer, plus input standardization
    double feat_mean = 0.0, feat_std = 1.0;
    double mf_feat_mean = 0.0, mf_feat_std = 1.0;
    std::vector<std::vector<double>> weights;  // layer order fixed per kind
    std::vector<std::vector<double>> biases;

    double decision_score(const SitePatch& patch) const;
    uint8_t predict(const SitePatch& patch) const {
        return decision_score(patch) >= 0.0 ? 1 : 0;
    }
    size_t param_count() const;
};

// Per-site Gaussian fit of summed patch intensity per class; threshold at the
// equal-likelihood crossing between the class means.
ClassifierModel fit_threshold(const std::vector<SitePatch>& patches,
                              const std::vector<uint8_t>& labels, int site = 0);

ClassifierModel fit_matched_filter(const std::vector<SitePatch>& patches,
                                   const std::vector<uint8_t>& labels, int site = 0,
                                   bool zero_mean_projection = false);

ClassifierModel train_site_classifier(Kind kind,
                                      const std::vector<SitePatch>& train_patches,
                                      const std::vector<uint8_t>& train_labels,
                                      const std::vector<SitePatch>& val_patches,
                                      const std::vector<uint8_t>& val_labels,
                                      const NnHyper& hyper, int site = 0);

struct SiteDecision {
    uint8_t prediction = 0;
    double score = 0.0;
};

// Applies one model per site (or a single shared model) to the frame.
std::vector<SiteDecision> classify_array(const std::vector<ClassifierModel>& models,
                                         const Frame& frame,
                                         const simcam::LatticeGeometry& geometry);

struct GmmModel {
    double w0 = 0.5, w1 = 0.5;
    double m0 = 0.0, m1 = 1.0;  // m0 < m1; component 1 maps to bright
    double v0 = 1.0, v1 = 1.0;
    double log_likelihood = 0.0;
    int iterations = 0;
    // posterior responsibility of each component for a score
    std::pair<double, double> responsibilities(double score) const;
};

GmmModel gmm_fit(const std::vector<double>& scores);

struct FilterResult {
    std::vector<uint8_t> retained;
    std::vector<uint8_t> labels;  // component with higher mean = bright
    double retained_fraction = 0.0;
};

FilterResult confidence_filter(const std::vector<double>& scores, const GmmModel& gmm,
                               double tau);

struct LatencyStats {
    double mean_s = 0.0, p50_s = 0.0, p99_s = 0.0;
};

struct ClassifierReport {
    std::vector<double> per_site_delta;
    double delta = 0.0;  // averaged per-site infidelity
    double bright_to_dark = 0.0;
    double dark_to_bright = 0.0;
    std::optional<double> eta;  // 1 - delta_method / delta_baseline
    std::string baseline_name;
    double retained_fraction = 1.0;
    long long evaluated_sites = 0;
    LatencyStats latency;
};

// frames[i] pairs with labels[i]; shot_mask (optional, same length) restricts
// the evaluation to retained shots.
ClassifierReport evaluate(const std::vector<ClassifierModel>& models,
                          const std::vector<Frame>& frames,
                          const std::vector<std::vector<uint8_t>>& labels,
                          const simcam::LatticeGeometry& geometry,
                          std::optional<double> baseline_delta = std::nullopt,
                          const std::string& baseline_name = "",
                          const std::vector<uint8_t>* shot_mask = nullptr);

// Per-site training over a set of frames; parallel across sites.
std::vector<ClassifierModel> train_per_site(Kind kind, const std::vector<Frame>& train_frames,
                                            const std::vector<std::vector<uint8_t>>& train_labels,
                                            const std::vector<Frame>& val_frames,
                                            const std::vector<std::vector<uint8_t>>& val_labels,
                                            const simcam::LatticeGeometry& geometry,
                                            const NnHyper& hyper);

// Single model trained on patches pooled across sites, for stitched arrays
// where per-site data is thin.
ClassifierModel train_shared(Kind kind, const std::vector<Frame>& train_frames,
                             const std::vector<std::vector<uint8_t>>& train_labels,
                             const std::vector<Frame>& val_frames,
                             const std::vector<std::vector<uint8_t>>& val_labels,
                             const simcam::LatticeGeometry& geometry,
                             const NnHyper& hyper);

void save_models(const std::vector<ClassifierModel>& models, const std::string& path);
std::vector<ClassifierModel> load_models(const std::string& path);

}  // namespace atomread::classify

#endif
