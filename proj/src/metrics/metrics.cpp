#include "atomread/metrics/metrics.hpp"

#include <cmath>
#include <limits>

namespace atomread::metrics {

double mean_squared_error(const Frame& a, const Frame& b) {
    require(a.same_shape(b), "mse: shape mismatch");
    require(a.size() > 0, "mse: empty image");
    double acc = 0.0;
    for (size_t i = 0; i < a.px.size(); ++i) {
        const double d = a.px[i] - b.px[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.px.size());
}

double psnr(const Frame& a, const Frame& b, double max_value) {
    require(max_value > 0.0, "psnr: max_value must be positive");
    const double mse = mean_squared_error(a, b);
    if (mse == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(max_value * max_value / mse);
}

double ssim(const Frame& a, const Frame& b, double dynamic_range, const SsimParams& p) {
    require(a.same_shape(b), "ssim: shape mismatch");
    require(a.h >= p.window && a.w >= p.window, "ssim: image smaller than window");
    require(p.window % 2 == 1, "ssim: window must be odd");

    // Separable Gaussian window, normalized to sum 1.
    std::vector<double> g(p.window);
    const int half = p.window / 2;
    double gsum = 0.0;
    for (int i = 0; i < p.window; ++i) {
        const double d = i - half;
        g[i] = std::exp(-d * d / (2.0 * p.sigma * p.sigma));
        gsum += g[i];
    }
    for (double& v : g)
        v /= gsum;

    const double c1 = (p.k1 * dynamic_range) * (p.k1 * dynamic_range);
    const double c2 = (p.k2 * dynamic_range) * (p.k2 * dynamic_range);

    // Horizontal pass of the five weighted moment images, then vertical pass
    // at each valid window center.
    const int hw = a.w - p.window + 1;
    auto hfilter = [&](const Frame& src, std::vector<double>& dst) {
        dst.assign(static_cast<size_t>(a.h) * hw, 0.0);
        for (int y = 0; y < a.h; ++y)
            for (int x = 0; x < hw; ++x) {
                double acc = 0.0;
                for (int k = 0; k < p.window; ++k)
                    acc += g[k] * src.at(y, x + k);
                dst[static_cast<size_t>(y) * hw + x] = acc;
            }
    };

    Frame aa(a.h, a.w), bb(a.h, a.w), ab(a.h, a.w);
    for (size_t i = 0; i < a.px.size(); ++i) {
        aa.px[i] = a.px[i] * a.px[i];
        bb.px[i] = b.px[i] * b.px[i];
        ab.px[i] = a.px[i] * b.px[i];
    }
    std::vector<double> ma, mb, maa, mbb, mab;
    hfilter(a, ma);
    hfilter(b, mb);
    hfilter(aa, maa);
    hfilter(bb, mbb);
    hfilter(ab, mab);

    const int vh = a.h - p.window + 1;
    double total = 0.0;
    for (int y = 0; y < vh; ++y)
        for (int x = 0; x < hw; ++x) {
            double mu_a = 0, mu_b = 0, e_aa = 0, e_bb = 0, e_ab = 0;
            for (int k = 0; k < p.window; ++k) {
                const size_t idx = static_cast<size_t>(y + k) * hw + x;
                mu_a += g[k] * ma[idx];
                mu_b += g[k] * mb[idx];
                e_aa += g[k] * maa[idx];
                e_bb += g[k] * mbb[idx];
                e_ab += g[k] * mab[idx];
            }
            const double var_a = e_aa - mu_a * mu_a;
            const double var_b = e_bb - mu_b * mu_b;
            const double cov = e_ab - mu_a * mu_b;
            const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            total += num / den;
        }
    return total / (static_cast<double>(vh) * hw);
}

double mean_l1(const Frame& a, const Frame& b) {
    require(a.same_shape(b), "mean_l1: shape mismatch");
    require(a.size() > 0, "mean_l1: empty image");
    double acc = 0.0;
    for (size_t i = 0; i < a.px.size(); ++i)
        acc += std::abs(a.px[i] - b.px[i]);
    return acc / static_cast<double>(a.px.size());
}

ImageQuality image_quality(const Frame& test, const Frame& reference,
                           double dynamic_range, const SsimParams& params) {
    ImageQuality q;
    q.psnr_db = psnr(test, reference, dynamic_range);
    q.ssim = ssim(test, reference, dynamic_range, params);
    q.mean_l1 = mean_l1(test, reference);
    return q;
}

QuadrantCounts quadrant_analysis(const std::vector<double>& test_means,
                                 const std::vector<double>& reference_means,
                                 double test_threshold, double reference_threshold) {
    require(test_means.size() == reference_means.size(), "quadrant: length mismatch");
    QuadrantCounts q;
    for (size_t i = 0; i < test_means.size(); ++i) {
        const bool ref_bright = reference_means[i] >= reference_threshold;
        const bool test_bright = test_means[i] >= test_threshold;
        if (ref_bright && test_bright)
            ++q.q1;
        else if (ref_bright && !test_bright)
            ++q.q2;
        else if (!ref_bright && !test_bright)
            ++q.q3;
        else
            ++q.q4;
    }
    return q;
}

}  // namespace atomread::metrics
