#ifndef ATOMREAD_METRICS_METRICS_HPP
#define ATOMREAD_METRICS_METRICS_HPP

#include <vector>

#include "atomread/core/tensor.hpp"

namespace atomread::metrics {

struct ImageQuality {
    double psnr_db = 0.0;
    double ssim = 0.0;
    double mean_l1 = 0.0;
};

// Counts of (reference state, test state) pairs of site-averaged intensities.
// q1 = bright-bright, q2 = bright-dark, q3 = dark-dark, q4 = dark-bright,
// where the first coordinate is the reference side.
struct QuadrantCounts {
    long long q1 = 0, q2 = 0, q3 = 0, q4 = 0;
    long long total() const { return q1 + q2 + q3 + q4; }
    double mismatch_fraction() const {
        return total() == 0 ? 0.0 : static_cast<double>(q2 + q4) / static_cast<double>(total());
    }
};

double mean_squared_error(const Frame& a, const Frame& b);

// 10*log10(max_value^2 / MSE); identical images give +inf.
double psnr(const Frame& a, const Frame& b, double max_value);

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
};

// Mean local SSIM over Gaussian-weighted windows fully inside the image.
// dynamic_range is the L constant; C1=(k1*L)^2, C2=(k2*L)^2.
double ssim(const Frame& a, const Frame& b, double dynamic_range,
            const SsimParams& params = {});

double mean_l1(const Frame& a, const Frame& b);

ImageQuality image_quality(const Frame& test, const Frame& reference,
                           double dynamic_range, const SsimParams& params = {});

QuadrantCounts quadrant_analysis(const std::vector<double>& test_means,
                                 const std::vector<double>& reference_means,
                                 double test_threshold, double reference_threshold);

}  // namespace atomread::metrics

#endif
