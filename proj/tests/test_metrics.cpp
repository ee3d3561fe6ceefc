#include <doctest.h>

#include <cmath>
#include <random>

#include "atomread/metrics/metrics.hpp"

using namespace atomread;
using metrics::SsimParams;

namespace {

Frame random_frame(int h, int w, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
    std::uniform_real_distribution<double> uni(lo, hi);
    Frame f(h, w);
    for (auto& p : f.px)
        p = uni(rng);
    return f;
}

// Brute-force oracles, written independently of the library implementations.
double psnr_oracle(const Frame& a, const Frame& b, double max_value) {
    double mse = 0.0;
    for (int y = 0; y < a.h; ++y)
        for (int x = 0; x < a.w; ++x)
            mse += (a.at(y, x) - b.at(y, x)) * (a.at(y, x) - b.at(y, x));
    mse /= a.h * a.w;
    return 10.0 * std::log10(max_value * max_value / mse);
}

double l1_oracle(const Frame& a, const Frame& b) {
    double acc = 0.0;
    for (int y = 0; y < a.h; ++y)
        for (int x = 0; x < a.w; ++x)
            acc += std::fabs(a.at(y, x) - b.at(y, x));
    return acc / (a.h * a.w);
}

// Naive SSIM: recompute every Gaussian-weighted window moment from scratch.
double ssim_oracle(const Frame& a, const Frame& b, double range, int window,
                   double sigma, double k1, double k2) {
    const int half = window / 2;
    std::vector<std::vector<double>> g(window, std::vector<double>(window));
    double gsum = 0.0;
    for (int i = 0; i < window; ++i)
        for (int j = 0; j < window; ++j) {
            g[i][j] = std::exp(-((i - half) * (i - half) + (j - half) * (j - half)) /
                               (2.0 * sigma * sigma));
            gsum += g[i][j];
        }
    for (auto& row : g)
        for (auto& v : row)
            v /= gsum;

    const double c1 = (k1 * range) * (k1 * range);
    const double c2 = (k2 * range) * (k2 * range);
    double total = 0.0;
    int count = 0;
    for (int y = 0; y + window <= a.h; ++y)
        for (int x = 0; x + window <= a.w; ++x) {
            double ma = 0, mb = 0;
            for (int i = 0; i < window; ++i)
                for (int j = 0; j < window; ++j) {
                    ma += g[i][j] * a.at(y + i, x + j);
                    mb += g[i][j] * b.at(y + i, x + j);
                }
            double va = 0, vb = 0, cov = 0;
            for (int i = 0; i < window; ++i)
                for (int j = 0; j < window; ++j) {
                    va += g[i][j] * a.at(y + i, x + j) * a.at(y + i, x + j);
                    vb += g[i][j] * b.at(y + i, x + j) * b.at(y + i, x + j);
                    cov += g[i][j] * a.at(y + i, x + j) * b.at(y + i, x + j);
                }
            va -= ma * ma;
            vb -= mb * mb;
            cov -= ma * mb;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                     ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    return total / count;
}

}  // namespace

TEST_CASE("psnr closed forms") {
    Frame a(4, 4, 0.3), b(4, 4, 0.3);
    CHECK(std::isinf(metrics::psnr(a, b, 1.0)));

    for (auto& p : b.px)
        p += 0.1;  // uniform |a-b| = 0.1 -> MSE 0.01 -> 20 dB
    CHECK(metrics::psnr(a, b, 1.0) == doctest::Approx(20.0).epsilon(1e-12));

    Frame c(3, 4, 0.0);
    CHECK_THROWS(metrics::psnr(a, c, 1.0));
    CHECK_THROWS(metrics::psnr(a, b, 0.0));
}

TEST_CASE("psnr strictly decreasing in mse") {
    Frame a(6, 6, 0.5);
    Frame b = a;
    double last = std::numeric_limits<double>::infinity();
    for (double delta : {0.01, 0.02, 0.05, 0.1, 0.4}) {
        for (size_t i = 0; i < b.px.size(); ++i)
            b.px[i] = a.px[i] + delta;
        const double p = metrics::psnr(a, b, 1.0);
        CHECK(p < last);
        last = p;
    }
}

TEST_CASE("psnr/l1 against brute-force oracle on random pairs") {
    std::mt19937_64 rng(7);
    for (int k = 0; k < 100; ++k) {
        Frame a = random_frame(8, 8, rng);
        Frame b = random_frame(8, 8, rng);
        CHECK(metrics::psnr(a, b, 1.0) ==
              doctest::Approx(psnr_oracle(a, b, 1.0)).epsilon(1e-9));
        CHECK(metrics::mean_l1(a, b) == doctest::Approx(l1_oracle(a, b)).epsilon(1e-12));
        CHECK(metrics::mean_l1(a, b) == doctest::Approx(metrics::mean_l1(b, a)));
    }
}

TEST_CASE("mean_l1 closed forms") {
    Frame a(5, 5, 1.0), b(5, 5, 1.0);
    CHECK(metrics::mean_l1(a, b) == 0.0);
    for (auto& p : b.px)
        p += 0.036;
    CHECK(metrics::mean_l1(a, b) == doctest::Approx(0.036).epsilon(1e-12));
}

TEST_CASE("ssim identity, symmetry and oracle") {
    std::mt19937_64 rng(11);
    Frame a = random_frame(16, 16, rng);
    CHECK(metrics::ssim(a, a, 1.0) == doctest::Approx(1.0).epsilon(1e-12));

    Frame b = random_frame(16, 16, rng);
    const double sab = metrics::ssim(a, b, 1.0);
    const double sba = metrics::ssim(b, a, 1.0);
    CHECK(sab == doctest::Approx(sba).epsilon(1e-12));
    CHECK(sab == doctest::Approx(ssim_oracle(a, b, 1.0, 11, 1.5, 0.01, 0.03)).epsilon(1e-9));

    // window-7 variant used for small frames
    SsimParams p7;
    p7.window = 7;
    Frame s1 = random_frame(8, 8, rng);
    Frame s2 = random_frame(8, 8, rng);
    CHECK(metrics::ssim(s1, s2, 1.0, p7) ==
          doctest::Approx(ssim_oracle(s1, s2, 1.0, 7, 1.5, 0.01, 0.03)).epsilon(1e-9));

    CHECK_THROWS(metrics::ssim(s1, s2, 1.0));  // 8x8 smaller than default window
}

TEST_CASE("ssim of an inverted zero-mean image is negative") {
    std::mt19937_64 rng(13);
    Frame a = random_frame(12, 12, rng, -0.5, 0.5);
    double mean = 0;
    for (double v : a.px)
        mean += v;
    mean /= a.px.size();
    for (auto& v : a.px)
        v -= mean;
    Frame b = a;
    for (auto& v : b.px)
        v = -v;
    // pick L so the stabilizers absorb the residual window means and the
    // anti-correlated structure term carries the sign
    const double range = 10.0;
    CHECK(metrics::ssim(a, b, range) < 0.0);
    CHECK(metrics::ssim(a, b, range) ==
          doctest::Approx(ssim_oracle(a, b, range, 11, 1.5, 0.01, 0.03)).epsilon(1e-9));
}

TEST_CASE("ssim constant-vs-constant closed form") {
    // variance terms vanish; SSIM = (2 m1 m2 + C1)/(m1^2 + m2^2 + C1)
    const double m1 = 0.4, m2 = 0.6, range = 1.0;
    Frame a(12, 12, m1), b(12, 12, m2);
    const double c1 = 0.01 * 0.01;
    const double expected = (2 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1);
    CHECK(metrics::ssim(a, b, range) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("quadrant analysis") {
    SUBCASE("identical vectors have no mismatch") {
        std::vector<double> v{0.1, 0.9, 0.4, 0.8};
        auto q = metrics::quadrant_analysis(v, v, 0.5, 0.5);
        CHECK(q.q2 + q.q4 == 0);
        CHECK(q.total() == 4);
    }
    SUBCASE("inverted vectors are all mismatch") {
        std::vector<double> ref{0.1, 0.9, 0.3, 0.7};
        std::vector<double> test;
        for (double v : ref)
            test.push_back(1.0 - v);
        auto q = metrics::quadrant_analysis(test, ref, 0.5, 0.5);
        CHECK(q.q1 + q.q3 == 0);
        CHECK(q.mismatch_fraction() == doctest::Approx(1.0));
    }
    SUBCASE("counts land in the right quadrants") {
        std::vector<double> ref{0.9, 0.9, 0.1, 0.1};
        std::vector<double> test{0.9, 0.1, 0.1, 0.9};
        auto q = metrics::quadrant_analysis(test, ref, 0.5, 0.5);
        CHECK(q.q1 == 1);  // bright-bright
        CHECK(q.q2 == 1);  // ref bright, test dark
        CHECK(q.q3 == 1);  // dark-dark
        CHECK(q.q4 == 1);  // ref dark, test bright
    }
}
