#include "atomread/classify/classify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "atomread/core/container.hpp"
#include "atomread/core/parallel.hpp"
#include "atomread/core/rng.hpp"
#include "atomread/nn/ops.hpp"

namespace atomread::classify {

std::string kind_name(Kind k) {
    switch (k) {
        case Kind::Threshold: return "threshold";
        case Kind::MatchedFilter: return "mf";
        case Kind::Fnn: return "fnn";
        case Kind::MfNn: return "mfnn";
        case Kind::CnnSite: return "cnn";
    }
    return "?";
}

Kind kind_from_name(const std::string& name) {
    if (name == "threshold") return Kind::Threshold;
    if (name == "mf") return Kind::MatchedFilter;
    if (name == "fnn") return Kind::Fnn;
    if (name == "mfnn") return Kind::MfNn;
    if (name == "cnn") return Kind::CnnSite;
    throw std::invalid_argument("unknown classifier kind: " + name);
}

double SitePatch::sum() const {
    return std::accumulate(pixels.begin(), pixels.end(), 0.0);
}

std::vector<SitePatch> extract_patches(const Frame& frame,
                                       const simcam::LatticeGeometry& geometry) {
    require(frame.h == geometry.image_h && frame.w == geometry.image_w,
            "extract_patches: frame does not match geometry");
    const int half = geometry.patch_px / 2;
    std::vector<SitePatch> out(static_cast<size_t>(geometry.sites()));
    for (int s = 0; s < geometry.sites(); ++s) {
        SitePatch& p = out[static_cast<size_t>(s)];
        p.site = s;
        p.patch_px = geometry.patch_px;
        p.pixels.resize(static_cast<size_t>(geometry.patch_px) * geometry.patch_px);
        const int cy = geometry.site_center_y(s), cx = geometry.site_center_x(s);
        size_t i = 0;
        for (int y = cy - half; y <= cy + half; ++y)
            for (int x = cx - half; x <= cx + half; ++x)
                p.pixels[i++] = frame.at(y, x);
    }
    return out;
}

double MatchedFilterTemplate::score(const std::vector<double>& patch_pixels) const {
    require(patch_pixels.size() == weights.size(), "mf score: size mismatch");
    double acc = 0.0;
    for (size_t i = 0; i < weights.size(); ++i)
        acc += weights[i] * (patch_pixels[i] - dark_mean[i]);
    return acc;
}

MatchedFilterTemplate build_matched_filter(const std::vector<SitePatch>& patches,
                                           const std::vector<uint8_t>& labels,
                                           bool zero_mean_projection) {
    require(patches.size() == labels.size() && !patches.empty(),
            "matched filter: patches/labels mismatch");
    const size_t dim = patches.front().pixels.size();
    std::vector<double> bright(dim, 0.0), dark(dim, 0.0);
    long nb = 0, nd = 0;
    for (size_t i = 0; i < patches.size(); ++i) {
        auto& acc = labels[i] ? bright : dark;
        (labels[i] ? nb : nd)++;
        for (size_t j = 0; j < dim; ++j)
            acc[j] += patches[i].pixels[j];
    }
    require(nb > 0 && nd > 0, "matched filter: both classes required");
    for (size_t j = 0; j < dim; ++j) {
        bright[j] /= nb;
        dark[j] /= nd;
    }
    MatchedFilterTemplate t;
    t.dark_mean = dark;
    t.weights.resize(dim);
    for (size_t j = 0; j < dim; ++j)
        t.weights[j] = bright[j] - dark[j];
    if (zero_mean_projection) {
        const double mean =
            std::accumulate(t.weights.begin(), t.weights.end(), 0.0) / dim;
        for (auto& v : t.weights)
            v -= mean;
    }
    double norm = 0.0;
    for (double v : t.weights)
        norm += v * v;
    norm = std::sqrt(norm);
    if (norm < 1e-300)
        throw std::runtime_error("matched filter: zero-difference template");
    for (auto& v : t.weights)
        v /= norm;
    return t;
}

namespace {

struct ClassStats {
    double mean = 0, var = 0;
    long count = 0;
};

ClassStats stats_of(const std::vector<double>& values, const std::vector<uint8_t>& labels,
                    uint8_t cls) {
    ClassStats st;
    double sum = 0;
    for (size_t i = 0; i < values.size(); ++i)
        if (labels[i] == cls) {
            sum += values[i];
            ++st.count;
        }
    if (st.count == 0)
        return st;
    st.mean = sum / st.count;
    double acc = 0;
    for (size_t i = 0; i < values.size(); ++i)
        if (labels[i] == cls) {
            const double d = values[i] - st.mean;
            acc += d * d;
        }
    st.var = st.count > 1 ? acc / st.count : 0.0;
    return st;
}

// Equal-likelihood crossing of N(m0,v0) and N(m1,v1), preferring the root
// between the means.
double gaussian_crossing(double m0, double v0, double m1, double v1) {
    if (m0 == m1)
        throw std::runtime_error("threshold fit: equal class means");
    const double lo = std::min(m0, m1), hi = std::max(m0, m1);
    if (std::abs(v0 - v1) < 1e-12)
        return 0.5 * (m0 + m1);
    const double a = 1.0 / v0 - 1.0 / v1;
    const double b = -2.0 * m0 / v0 + 2.0 * m1 / v1;
    const double c = m0 * m0 / v0 - m1 * m1 / v1 + std::log(v0 / v1);
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0)
        return 0.5 * (m0 + m1);
    const double r1 = (-b + std::sqrt(disc)) / (2.0 * a);
    const double r2 = (-b - std::sqrt(disc)) / (2.0 * a);
    const bool in1 = r1 > lo && r1 < hi, in2 = r2 > lo && r2 < hi;
    if (in1 && !in2)
        return r1;
    if (in2 && !in1)
        return r2;
    const double mid = 0.5 * (lo + hi);
    return std::abs(r1 - mid) <= std::abs(r2 - mid) ? r1 : r2;
}

void fit_two_gaussians(const std::vector<double>& values,
                       const std::vector<uint8_t>& labels, int site,
                       ClassifierModel& model) {
    const ClassStats dark = stats_of(values, labels, 0);
    const ClassStats bright = stats_of(values, labels, 1);
    if (dark.count == 0 || bright.count == 0)
        throw std::runtime_error("single-class site " + std::to_string(site) +
                                 ": both states required to fit");
    const double floor_var = 1e-12;
    model.mean_dark = dark.mean;
    model.mean_bright = bright.mean;
    model.var_dark = std::max(dark.var, floor_var);
    model.var_bright = std::max(bright.var, floor_var);
}

}  // namespace

ClassifierModel fit_threshold(const std::vector<SitePatch>& patches,
                              const std::vector<uint8_t>& labels, int site) {
    require(patches.size() == labels.size() && !patches.empty(),
            "fit_threshold: patches/labels mismatch");
    std::vector<double> sums(patches.size());
    for (size_t i = 0; i < patches.size(); ++i)
        sums[i] = patches[i].sum();

    ClassifierModel model;
    model.kind = Kind::Threshold;
    model.site = site;
    model.patch_px = patches.front().patch_px;
    fit_two_gaussians(sums, labels, site, model);
    model.threshold = gaussian_crossing(model.mean_dark, model.var_dark,
                                        model.mean_bright, model.var_bright);
    return model;
}

ClassifierModel fit_matched_filter(const std::vector<SitePatch>& patches,
                                   const std::vector<uint8_t>& labels, int site,
                                   bool zero_mean_projection) {
    ClassifierModel model;
    model.kind = Kind::MatchedFilter;
    model.site = site;
    model.patch_px = patches.front().patch_px;
    model.mf = build_matched_filter(patches, labels, zero_mean_projection);

    std::vector<double> scores(patches.size());
    for (size_t i = 0; i < patches.size(); ++i)
        scores[i] = model.mf.score(patches[i].pixels);
    fit_two_gaussians(scores, labels, site, model);
    model.mf_threshold = gaussian_crossing(model.mean_dark, model.var_dark,
                                           model.mean_bright, model.var_bright);
    return model;
}

// ---------------------------------------------------------------------------
// network training (cross-entropy, Adam, early stop on val accuracy)

namespace {

struct Dense {
    int in = 0, out = 0;
    std::vector<double> w, b, dw, db;
    nn::AdamState aw, ab;

    void init(int in_, int out_, uint64_t seed) {
        in = in_;
        out = out_;
        w.assign(static_cast<size_t>(in) * out, 0.0);
        b.assign(static_cast<size_t>(out), 0.0);
        dw.assign(w.size(), 0.0);
        db.assign(b.size(), 0.0);
        auto rng = make_engine(seed);
        std::normal_distribution<double> g(0.0, std::sqrt(2.0 / in));
        for (auto& v : w)
            v = g(rng);
    }
    void forward(const std::vector<double>& x, std::vector<double>& y) const {
        y.assign(static_cast<size_t>(out), 0.0);
        for (int o = 0; o < out; ++o) {
            double acc = b[static_cast<size_t>(o)];
            const double* wr = w.data() + static_cast<size_t>(o) * in;
            for (int i = 0; i < in; ++i)
                acc += wr[i] * x[static_cast<size_t>(i)];
            y[static_cast<size_t>(o)] = acc;
        }
    }
    void backward(const std::vector<double>& x, const std::vector<double>& dy,
                  std::vector<double>& dx) {
        dx.assign(static_cast<size_t>(in), 0.0);
        for (int o = 0; o < out; ++o) {
            const double g = dy[static_cast<size_t>(o)];
            double* dwr = dw.data() + static_cast<size_t>(o) * in;
            const double* wr = w.data() + static_cast<size_t>(o) * in;
            db[static_cast<size_t>(o)] += g;
            for (int i = 0; i < in; ++i) {
                dwr[i] += g * x[static_cast<size_t>(i)];
                dx[static_cast<size_t>(i)] += g * wr[i];
            }
        }
    }
    void zero_grad() {
        std::fill(dw.begin(), dw.end(), 0.0);
        std::fill(db.begin(), db.end(), 0.0);
    }
    void step(double lr) {
        aw.step(w, dw, lr, 0.9, 0.999);
        ab.step(b, db, lr, 0.9, 0.999);
    }
};

// logits -> CE loss and dlogits (softmax - onehot)
double ce_loss(const std::vector<double>& logits, uint8_t label,
               std::vector<double>& dlogits) {
    const double mx = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - mx), e1 = std::exp(logits[1] - mx);
    const double z = e0 + e1;
    const double p0 = e0 / z, p1 = e1 / z;
    dlogits = {p0 - (label == 0 ? 1.0 : 0.0), p1 - (label == 1 ? 1.0 : 0.0)};
    return -std::log(std::max(label == 1 ? p1 : p0, 1e-300));
}

std::vector<double> standardized_features(const ClassifierModel& m,
                                          const SitePatch& patch) {
    std::vector<double> x(patch.pixels.size());
    for (size_t i = 0; i < x.size(); ++i)
        x[i] = (patch.pixels[i] - m.feat_mean) / m.feat_std;
    if (m.kind == Kind::MfNn)
        x.push_back((m.mf.score(patch.pixels) - m.mf_feat_mean) / m.mf_feat_std);
    return x;
}

// Shared MLP trainer for FNN ([in]->hidden->2) and MF+NN ([in+1]->hidden->2).
ClassifierModel train_mlp(Kind kind, const std::vector<SitePatch>& train_patches,
                          const std::vector<uint8_t>& train_labels,
                          const std::vector<SitePatch>& val_patches,
                          const std::vector<uint8_t>& val_labels, const NnHyper& hyper,
                          int site) {
    ClassifierModel model;
    model.kind = kind;
    model.site = site;
    model.patch_px = train_patches.front().patch_px;

    // global standardization of the inputs
    double sum = 0, sum2 = 0;
    long long count = 0;
    for (const auto& p : train_patches)
        for (double v : p.pixels) {
            sum += v;
            sum2 += v * v;
            ++count;
        }
    model.feat_mean = sum / count;
    model.feat_std =
        std::max(1e-9, std::sqrt(std::max(0.0, sum2 / count - model.feat_mean * model.feat_mean)));

    if (kind == Kind::MfNn) {
        model.mf = build_matched_filter(train_patches, train_labels);
        double s = 0, s2 = 0;
        for (const auto& p : train_patches) {
            const double v = model.mf.score(p.pixels);
            s += v;
            s2 += v * v;
        }
        model.mf_feat_mean = s / train_patches.size();
        model.mf_feat_std = std::max(
            1e-9, std::sqrt(std::max(0.0, s2 / train_patches.size() -
                                              model.mf_feat_mean * model.mf_feat_mean)));
    }

    const int in_dim = static_cast<int>(train_patches.front().pixels.size()) +
                       (kind == Kind::MfNn ? 1 : 0);
    const int hidden = kind == Kind::MfNn ? hyper.hidden_mfnn : hyper.hidden_fnn;

    Dense d1, d2;
    d1.init(in_dim, hidden, hash_seed(hyper.seed, 11));
    d2.init(hidden, 2, hash_seed(hyper.seed, 12));

    std::vector<std::vector<double>> xtr(train_patches.size()), xva(val_patches.size());
    for (size_t i = 0; i < train_patches.size(); ++i)
        xtr[i] = standardized_features(model, train_patches[i]);
    for (size_t i = 0; i < val_patches.size(); ++i)
        xva[i] = standardized_features(model, val_patches[i]);

    auto val_accuracy = [&]() {
        if (xva.empty())
            return 1.0;
        long correct = 0;
        std::vector<double> h, hr, z;
        for (size_t i = 0; i < xva.size(); ++i) {
            d1.forward(xva[i], h);
            hr = h;
            for (auto& v : hr)
                v = std::max(v, 0.0);
            d2.forward(hr, z);
            if ((z[1] - z[0] >= 0.0 ? 1 : 0) == val_labels[i])
                ++correct;
        }
        return static_cast<double>(correct) / xva.size();
    };

    double best_acc = -1.0;
    std::vector<double> best_w1, best_b1, best_w2, best_b2;
    int since_best = 0;

    std::vector<size_t> order(train_patches.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
        auto rng = make_engine(hash_seed(hyper.seed, 1000 + epoch));
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t begin = 0; begin < order.size();
             begin += static_cast<size_t>(hyper.batch_size)) {
            const size_t end =
                std::min(order.size(), begin + static_cast<size_t>(hyper.batch_size));
            d1.zero_grad();
            d2.zero_grad();
            std::vector<double> h, hr, z, dz, dhr, dh, dx;
            for (size_t k = begin; k < end; ++k) {
                const auto& x = xtr[order[k]];
                d1.forward(x, h);
                hr = h;
                for (auto& v : hr)
                    v = std::max(v, 0.0);
                d2.forward(hr, z);
                ce_loss(z, train_labels[order[k]], dz);
                const double scale = 1.0 / static_cast<double>(end - begin);
                for (auto& v : dz)
                    v *= scale;
                d2.backward(hr, dz, dhr);
                dh = dhr;
                for (size_t i = 0; i < dh.size(); ++i)
                    if (h[i] <= 0.0)
                        dh[i] = 0.0;
                d1.backward(x, dh, dx);
            }
            d1.step(hyper.lr);
            d2.step(hyper.lr);
        }
        const double acc = val_accuracy();
        if (acc > best_acc) {
            best_acc = acc;
            best_w1 = d1.w;
            best_b1 = d1.b;
            best_w2 = d2.w;
            best_b2 = d2.b;
            since_best = 0;
        } else if (hyper.patience > 0 && ++since_best >= hyper.patience) {
            break;
        }
    }

    auto quantize = [](std::vector<double>& v) {
        for (auto& x : v)
            x = to_f32(x);
    };
    quantize(best_w1);
    quantize(best_b1);
    quantize(best_w2);
    quantize(best_b2);
    model.weights = {std::move(best_w1), std::move(best_w2)};
    model.biases = {std::move(best_b1), std::move(best_b2)};
    return model;
}

// CNN-site: two stride-2 3x3 convs (8, 16 channels) -> dense 32 -> 2.
struct CnnDims {
    nn::ConvSpec conv1, conv2;
    int s1 = 0, s2 = 0, flat = 0;
    explicit CnnDims(int patch_px) {
        conv1 = nn::ConvSpec{1, 8, 3, 2, 1};
        conv2 = nn::ConvSpec{8, 16, 3, 2, 1};
        s1 = nn::conv_out_dim(patch_px, conv1);
        s2 = nn::conv_out_dim(s1, conv2);
        flat = 16 * s2 * s2;
    }
};

Tensor patch_to_tensor(const ClassifierModel& m, const SitePatch& p) {
    Tensor t(1, 1, p.patch_px, p.patch_px);
    for (size_t i = 0; i < p.pixels.size(); ++i)
        t.data[i] = (p.pixels[i] - m.feat_mean) / m.feat_std;
    return t;
}

ClassifierModel train_cnn(const std::vector<SitePatch>& train_patches,
                          const std::vector<uint8_t>& train_labels,
                          const std::vector<SitePatch>& val_patches,
                          const std::vector<uint8_t>& val_labels, const NnHyper& hyper,
                          int site) {
    ClassifierModel model;
    model.kind = Kind::CnnSite;
    model.site = site;
    model.patch_px = train_patches.front().patch_px;

    double sum = 0, sum2 = 0;
    long long count = 0;
    for (const auto& p : train_patches)
        for (double v : p.pixels) {
            sum += v;
            sum2 += v * v;
            ++count;
        }
    model.feat_mean = sum / count;
    model.feat_std =
        std::max(1e-9, std::sqrt(std::max(0.0, sum2 / count - model.feat_mean * model.feat_mean)));

    const CnnDims dims(model.patch_px);
    std::vector<double> w1(dims.conv1.weight_count()), b1(8, 0.0);
    std::vector<double> w2(dims.conv2.weight_count()), b2(16, 0.0);
    {
        auto rng = make_engine(hash_seed(hyper.seed, 21));
        std::normal_distribution<double> g1(0.0, std::sqrt(2.0 / 9.0));
        for (auto& v : w1)
            v = g1(rng);
        std::normal_distribution<double> g2(0.0, std::sqrt(2.0 / (9.0 * 8.0)));
        for (auto& v : w2)
            v = g2(rng);
    }
    Dense d1, d2;
    d1.init(dims.flat, 32, hash_seed(hyper.seed, 22));
    d2.init(32, 2, hash_seed(hyper.seed, 23));
    nn::AdamState aw1, ab1, aw2, ab2;

    auto forward_logits = [&](const Tensor& x, Tensor& a1, Tensor& r1, Tensor& a2,
                              Tensor& r2, std::vector<double>& flat,
                              std::vector<double>& h, std::vector<double>& hr,
                              std::vector<double>& z) {
        nn::conv2d_forward(x, w1, b1, dims.conv1, a1);
        nn::relu_forward(a1, r1);
        nn::conv2d_forward(r1, w2, b2, dims.conv2, a2);
        nn::relu_forward(a2, r2);
        flat.assign(r2.data.begin(), r2.data.end());
        d1.forward(flat, h);
        hr = h;
        for (auto& v : hr)
            v = std::max(v, 0.0);
        d2.forward(hr, z);
    };

    auto val_accuracy = [&]() {
        if (val_patches.empty())
            return 1.0;
        long correct = 0;
        Tensor a1, r1, a2, r2;
        std::vector<double> flat, h, hr, z;
        for (size_t i = 0; i < val_patches.size(); ++i) {
            const Tensor x = patch_to_tensor(model, val_patches[i]);
            forward_logits(x, a1, r1, a2, r2, flat, h, hr, z);
            if ((z[1] - z[0] >= 0.0 ? 1 : 0) == val_labels[i])
                ++correct;
        }
        return static_cast<double>(correct) / val_patches.size();
    };

    double best_acc = -1.0;
    std::vector<double> bw1, bb1, bw2, bb2, bd1w, bd1b, bd2w, bd2b;
    int since_best = 0;

    std::vector<size_t> order(train_patches.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> dw1(w1.size()), db1(b1.size()), dw2(w2.size()), db2(b2.size());

    for (int epoch = 0; epoch < hyper.max_epochs; ++epoch) {
        auto rng = make_engine(hash_seed(hyper.seed, 2000 + epoch));
        std::shuffle(order.begin(), order.end(), rng);
        for (size_t begin = 0; begin < order.size();
             begin += static_cast<size_t>(hyper.batch_size)) {
            const size_t end =
                std::min(order.size(), begin + static_cast<size_t>(hyper.batch_size));
            std::fill(dw1.begin(), dw1.end(), 0.0);
            std::fill(db1.begin(), db1.end(), 0.0);
            std::fill(dw2.begin(), dw2.end(), 0.0);
            std::fill(db2.begin(), db2.end(), 0.0);
            d1.zero_grad();
            d2.zero_grad();

            Tensor a1, r1, a2, r2;
            std::vector<double> flat, h, hr, z, dz, dhr, dh, dflat;
            for (size_t k = begin; k < end; ++k) {
                const Tensor x = patch_to_tensor(model, train_patches[order[k]]);
                forward_logits(x, a1, r1, a2, r2, flat, h, hr, z);
                ce_loss(z, train_labels[order[k]], dz);
                const double scale = 1.0 / static_cast<double>(end - begin);
                for (auto& v : dz)
                    v *= scale;
                d2.backward(hr, dz, dhr);
                dh = dhr;
                for (size_t i = 0; i < dh.size(); ++i)
                    if (h[i] <= 0.0)
                        dh[i] = 0.0;
                d1.backward(flat, dh, dflat);

                Tensor dr2(1, 16, dims.s2, dims.s2);
                std::copy(dflat.begin(), dflat.end(), dr2.data.begin());
                Tensor da2;
                nn::relu_backward(a2, dr2, da2);
                nn::conv2d_backward_params(r1, da2, dims.conv2, dw2, db2);
                Tensor dr1(1, 8, dims.s1, dims.s1);
                nn::conv2d_backward_input(da2, w2, dims.conv2, dr1);
                Tensor da1;
                nn::relu_backward(a1, dr1, da1);
                nn::conv2d_backward_params(x, da1, dims.conv1, dw1, db1);
            }
            aw1.step(w1, dw1, hyper.lr, 0.9, 0.999);
            ab1.step(b1, db1, hyper.lr, 0.9, 0.999);
            aw2.step(w2, dw2, hyper.lr, 0.9, 0.999);
            ab2.step(b2, db2, hyper.lr, 0.9, 0.999);
            d1.step(hyper.lr);
            d2.step(hyper.lr);
        }
        const double acc = val_accuracy();
        if (acc > best_acc) {
            best_acc = acc;
            bw1 = w1;
            bb1 = b1;
            bw2 = w2;
            bb2 = b2;
            bd1w = d1.w;
            bd1b = d1.b;
            bd2w = d2.w;
            bd2b = d2.b;
            since_best = 0;
        } else if (hyper.patience > 0 && ++since_best >= hyper.patience) {
            break;
        }
    }

    for (auto* v : {&bw1, &bb1, &bw2, &bb2, &bd1w, &bd1b, &bd2w, &bd2b})
        for (auto& x : *v)
            x = to_f32(x);
    model.weights = {std::move(bw1), std::move(bw2), std::move(bd1w), std::move(bd2w)};
    model.biases = {std::move(bb1), std::move(bb2), std::move(bd1b), std::move(bd2b)};
    return model;
}

}  // namespace

double ClassifierModel::decision_score(const SitePatch& patch) const {
    switch (kind) {
        case Kind::Threshold: {
            const double orient = mean_bright >= mean_dark ? 1.0 : -1.0;
            return orient * (patch.sum() - threshold);
        }
        case Kind::MatchedFilter:
            return mf.score(patch.pixels) - mf_threshold;
        case Kind::Fnn:
        case Kind::MfNn: {
            const std::vector<double> x = standardized_features(*this, patch);
            Dense d1, d2;
            d1.in = static_cast<int>(x.size());
            d1.out = static_cast<int>(biases[0].size());
            d1.w = weights[0];
            d1.b = biases[0];
            d2.in = d1.out;
            d2.out = 2;
            d2.w = weights[1];
            d2.b = biases[1];
            std::vector<double> h, z;
            d1.forward(x, h);
            for (auto& v : h)
                v = std::max(v, 0.0);
            d2.forward(h, z);
            return z[1] - z[0];
        }
        case Kind::CnnSite: {
            const CnnDims dims(patch_px);
            const Tensor x = patch_to_tensor(*this, patch);
            Tensor a1, r1, a2, r2;
            nn::conv2d_forward(x, weights[0], biases[0], dims.conv1, a1);
            nn::relu_forward(a1, r1);
            nn::conv2d_forward(r1, weights[1], biases[1], dims.conv2, a2);
            nn::relu_forward(a2, r2);
            std::vector<double> flat(r2.data.begin(), r2.data.end());
            Dense d1, d2;
            d1.in = dims.flat;
            d1.out = 32;
            d1.w = weights[2];
            d1.b = biases[2];
            d2.in = 32;
            d2.out = 2;
            d2.w = weights[3];
            d2.b = biases[3];
            std::vector<double> h, z;
            d1.forward(flat, h);
            for (auto& v : h)
                v = std::max(v, 0.0);
            d2.forward(h, z);
            return z[1] - z[0];
        }
    }
    return 0.0;
}

size_t ClassifierModel::param_count() const {
    size_t n = 0;
    for (const auto& w : weights)
        n += w.size();
    for (const auto& b : biases)
        n += b.size();
    if (kind == Kind::Threshold)
        n += 1;
    if (kind == Kind::MatchedFilter || kind == Kind::MfNn)
        n += mf.weights.size();
    return n;
}

ClassifierModel train_site_classifier(Kind kind,
                                      const std::vector<SitePatch>& train_patches,
                                      const std::vector<uint8_t>& train_labels,
                                      const std::vector<SitePatch>& val_patches,
                                      const std::vector<uint8_t>& val_labels,
                                      const NnHyper& hyper, int site) {
    require(!train_patches.empty(), "train_site_classifier: empty train split");
    require(train_patches.size() == train_labels.size(),
            "train_site_classifier: labels mismatch");
    switch (kind) {
        case Kind::Threshold:
            return fit_threshold(train_patches, train_labels, site);
        case Kind::MatchedFilter:
            return fit_matched_filter(train_patches, train_labels, site);
        case Kind::Fnn:
        case Kind::MfNn:
            return train_mlp(kind, train_patches, train_labels, val_patches, val_labels,
                             hyper, site);
        case Kind::CnnSite:
            return train_cnn(train_patches, train_labels, val_patches, val_labels,
                             hyper, site);
    }
    throw std::logic_error("unreachable classifier kind");
}

std::vector<SiteDecision> classify_array(const std::vector<ClassifierModel>& models,
                                         const Frame& frame,
                                         const simcam::LatticeGeometry& geometry) {
    const auto patches = extract_patches(frame, geometry);
    const bool shared = models.size() == 1;
    if (!shared && static_cast<int>(models.size()) != geometry.sites())
        throw std::invalid_argument("classify_array: missing site model");
    std::vector<SiteDecision> out(patches.size());
    for (size_t s = 0; s < patches.size(); ++s) {
        const ClassifierModel& m = shared ? models[0] : models[s];
        const double score = m.decision_score(patches[s]);
        require(std::isfinite(score), "classify_array: non-finite decision score");
        out[s] = {score >= 0.0 ? uint8_t{1} : uint8_t{0}, score};
    }
    return out;
}

// ---------------------------------------------------------------------------
// two-component 1-D Gaussian mixture

std::pair<double, double> GmmModel::responsibilities(double score) const {
    auto logpdf = [](double x, double m, double v) {
        return -0.5 * std::log(2.0 * 3.14159265358979323846 * v) -
               (x - m) * (x - m) / (2.0 * v);
    };
    const double l0 = std::log(w0) + logpdf(score, m0, v0);
    const double l1 = std::log(w1) + logpdf(score, m1, v1);
    const double mx = std::max(l0, l1);
    const double e0 = std::exp(l0 - mx), e1 = std::exp(l1 - mx);
    return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

namespace {

GmmModel gmm_em(const std::vector<double>& scores, double q_lo, double q_hi,
                bool& degenerate) {
    std::vector<double> sorted(scores);
    std::sort(sorted.begin(), sorted.end());
    const size_t n = sorted.size();

    GmmModel g;
    g.m0 = sorted[static_cast<size_t>(q_lo * (n - 1))];
    g.m1 = sorted[static_cast<size_t>(q_hi * (n - 1))];
    if (g.m0 == g.m1) {
        g.m0 = sorted.front();
        g.m1 = sorted.back();
    }
    double mean = 0;
    for (double s : scores)
        mean += s;
    mean /= n;
    double var = 0;
    for (double s : scores)
        var += (s - mean) * (s - mean);
    var /= n;
    const double var_floor = std::max(var, 1e-30) * 1e-10;
    g.v0 = g.v1 = std::max(var / 4.0, var_floor);
    g.w0 = g.w1 = 0.5;

    degenerate = false;
    double prev_ll = -std::numeric_limits<double>::infinity();
    std::vector<double> r1(n);
    for (int iter = 0; iter < 200; ++iter) {
        double ll = 0.0;
        for (size_t i = 0; i < n; ++i) {
            auto [p0, p1] = g.responsibilities(scores[i]);
            r1[i] = p1;
            auto logpdf = [](double x, double m, double v) {
                return -0.5 * std::log(2.0 * 3.14159265358979323846 * v) -
                       (x - m) * (x - m) / (2.0 * v);
            };
            const double l0 = std::log(g.w0) + logpdf(scores[i], g.m0, g.v0);
            const double l1 = std::log(g.w1) + logpdf(scores[i], g.m1, g.v1);
            const double mx = std::max(l0, l1);
            ll += mx + std::log(std::exp(l0 - mx) + std::exp(l1 - mx));
        }
        g.log_likelihood = ll;
        g.iterations = iter + 1;

        double n1 = 0, s1 = 0, n0 = 0, s0 = 0;
        for (size_t i = 0; i < n; ++i) {
            n1 += r1[i];
            s1 += r1[i] * scores[i];
            n0 += 1.0 - r1[i];
            s0 += (1.0 - r1[i]) * scores[i];
        }
        if (n0 < 1e-9 || n1 < 1e-9) {
            degenerate = true;
            return g;
        }
        const double m0 = s0 / n0, m1 = s1 / n1;
        double v0 = 0, v1 = 0;
        for (size_t i = 0; i < n; ++i) {
            v0 += (1.0 - r1[i]) * (scores[i] - m0) * (scores[i] - m0);
            v1 += r1[i] * (scores[i] - m1) * (scores[i] - m1);
        }
        v0 /= n0;
        v1 /= n1;
        if (v0 < var_floor || v1 < var_floor) {
            degenerate = true;
            return g;
        }
        g.m0 = m0;
        g.m1 = m1;
        g.v0 = v0;
        g.v1 = v1;
        g.w0 = n0 / n;
        g.w1 = n1 / n;

        if (std::abs(ll - prev_ll) < 1e-8)
            break;
        prev_ll = ll;
    }
    if (g.m0 > g.m1) {
        std::swap(g.m0, g.m1);
        std::swap(g.v0, g.v1);
        std::swap(g.w0, g.w1);
    }
    return g;
}

}  // namespace

GmmModel gmm_fit(const std::vector<double>& scores) {
    require(scores.size() >= 2, "gmm_fit: need at least 2 scores");
    bool distinct = false;
    for (size_t i = 1; i < scores.size(); ++i)
        if (scores[i] != scores[0]) {
            distinct = true;
            break;
        }
    require(distinct, "gmm_fit: need at least 2 distinct scores");

    bool degenerate = false;
    GmmModel g = gmm_em(scores, 0.25, 0.75, degenerate);
    if (degenerate) {
        g = gmm_em(scores, 0.10, 0.90, degenerate);  // single re-init
        if (degenerate)
            throw std::runtime_error("gmm_fit: EM degenerate (variance collapsed)");
    }
    return g;
}

FilterResult confidence_filter(const std::vector<double>& scores, const GmmModel& gmm,
                               double tau) {
    require(tau >= 0.5 && tau < 1.0, "confidence_filter: tau must be in [0.5, 1)");
    FilterResult out;
    out.retained.resize(scores.size());
    out.labels.resize(scores.size());
    long kept = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        auto [p0, p1] = gmm.responsibilities(scores[i]);
        out.labels[i] = p1 >= p0 ? 1 : 0;  // higher-mean component = bright
        out.retained[i] = std::max(p0, p1) >= tau ? 1 : 0;
        kept += out.retained[i];
    }
    out.retained_fraction =
        scores.empty() ? 0.0 : static_cast<double>(kept) / scores.size();
    return out;
}

// ---------------------------------------------------------------------------

ClassifierReport evaluate(const std::vector<ClassifierModel>& models,
                          const std::vector<Frame>& frames,
                          const std::vector<std::vector<uint8_t>>& labels,
                          const simcam::LatticeGeometry& geometry,
                          std::optional<double> baseline_delta,
                          const std::string& baseline_name,
                          const std::vector<uint8_t>* shot_mask) {
    require(frames.size() == labels.size(), "evaluate: frames/labels mismatch");
    require(!frames.empty(), "evaluate: nothing to evaluate");
    if (shot_mask)
        require(shot_mask->size() == frames.size(), "evaluate: mask size mismatch");

    const int sites = geometry.sites();
    std::vector<long long> errors(static_cast<size_t>(sites), 0);
    std::vector<long long> seen(static_cast<size_t>(sites), 0);
    long long b2d = 0, d2b = 0, nb = 0, nd = 0;
    long long shots_used = 0;
    std::vector<double> latencies;

    for (size_t f = 0; f < frames.size(); ++f) {
        if (shot_mask && !(*shot_mask)[f])
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        const auto decisions = classify_array(models, frames[f], geometry);
        latencies.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        ++shots_used;
        for (int s = 0; s < sites; ++s) {
            const uint8_t truth = labels[f][static_cast<size_t>(s)];
            const uint8_t pred = decisions[static_cast<size_t>(s)].prediction;
            ++seen[static_cast<size_t>(s)];
            if (truth)
                ++nb;
            else
                ++nd;
            if (pred != truth) {
                ++errors[static_cast<size_t>(s)];
                if (truth)
                    ++b2d;
                else
                    ++d2b;
            }
        }
    }
    require(shots_used > 0, "evaluate: all shots masked out");

    ClassifierReport r;
    r.per_site_delta.resize(static_cast<size_t>(sites));
    double acc = 0;
    for (int s = 0; s < sites; ++s) {
        r.per_site_delta[static_cast<size_t>(s)] =
            seen[static_cast<size_t>(s)]
                ? static_cast<double>(errors[static_cast<size_t>(s)]) /
                      static_cast<double>(seen[static_cast<size_t>(s)])
                : 0.0;
        acc += r.per_site_delta[static_cast<size_t>(s)];
    }
    r.delta = acc / sites;
    r.bright_to_dark = nb ? static_cast<double>(b2d) / static_cast<double>(nb) : 0.0;
    r.dark_to_bright = nd ? static_cast<double>(d2b) / static_cast<double>(nd) : 0.0;
    r.evaluated_sites = shots_used * sites;
    r.retained_fraction =
        static_cast<double>(shots_used) / static_cast<double>(frames.size());
    if (baseline_delta) {
        require(*baseline_delta > 0.0, "evaluate: baseline delta must be positive");
        r.eta = 1.0 - r.delta / *baseline_delta;
        r.baseline_name = baseline_name;
    }

    std::sort(latencies.begin(), latencies.end());
    const size_t n = latencies.size();
    r.latency.mean_s = std::accumulate(latencies.begin(), latencies.end(), 0.0) / n;
    r.latency.p50_s = latencies[n / 2];
    r.latency.p99_s = latencies[std::min(n - 1, n * 99 / 100)];
    return r;
}

namespace {

struct SiteData {
    std::vector<SitePatch> patches;
    std::vector<uint8_t> labels;
};

std::vector<SiteData> collect_site_data(const std::vector<Frame>& frames,
                                        const std::vector<std::vector<uint8_t>>& labels,
                                        const simcam::LatticeGeometry& geometry) {
    require(frames.size() == labels.size(), "collect: frames/labels mismatch");
    std::vector<SiteData> per_site(static_cast<size_t>(geometry.sites()));
    for (size_t f = 0; f < frames.size(); ++f) {
        auto patches = extract_patches(frames[f], geometry);
        for (int s = 0; s < geometry.sites(); ++s) {
            per_site[static_cast<size_t>(s)].patches.push_back(
                std::move(patches[static_cast<size_t>(s)]));
            per_site[static_cast<size_t>(s)].labels.push_back(
                labels[f][static_cast<size_t>(s)]);
        }
    }
    return per_site;
}

}  // namespace

std::vector<ClassifierModel> train_per_site(
    Kind kind, const std::vector<Frame>& train_frames,
    const std::vector<std::vector<uint8_t>>& train_labels,
    const std::vector<Frame>& val_frames,
    const std::vector<std::vector<uint8_t>>& val_labels,
    const simcam::LatticeGeometry& geometry, const NnHyper& hyper) {
    const auto train_data = collect_site_data(train_frames, train_labels, geometry);
    const auto val_data = collect_site_data(val_frames, val_labels, geometry);

    std::vector<ClassifierModel> models(static_cast<size_t>(geometry.sites()));
    std::vector<std::string> failures(static_cast<size_t>(geometry.sites()));
    parallel_for(geometry.sites(), [&](int64_t s) {
        NnHyper h = hyper;
        h.seed = hash_seed(hyper.seed, static_cast<uint64_t>(s));
        try {
            models[static_cast<size_t>(s)] = train_site_classifier(
                kind, train_data[static_cast<size_t>(s)].patches,
                train_data[static_cast<size_t>(s)].labels,
                val_data[static_cast<size_t>(s)].patches,
                val_data[static_cast<size_t>(s)].labels, h, static_cast<int>(s));
        } catch (const std::exception& e) {
            failures[static_cast<size_t>(s)] = e.what();
        }
    });
    for (const auto& f : failures)
        if (!f.empty())
            throw std::runtime_error(f);
    return models;
}

ClassifierModel train_shared(Kind kind, const std::vector<Frame>& train_frames,
                             const std::vector<std::vector<uint8_t>>& train_labels,
                             const std::vector<Frame>& val_frames,
                             const std::vector<std::vector<uint8_t>>& val_labels,
                             const simcam::LatticeGeometry& geometry,
                             const NnHyper& hyper) {
    const auto train_data = collect_site_data(train_frames, train_labels, geometry);
    const auto val_data = collect_site_data(val_frames, val_labels, geometry);
    std::vector<SitePatch> tp;
    std::vector<uint8_t> tl;
    for (const auto& sd : train_data) {
        tp.insert(tp.end(), sd.patches.begin(), sd.patches.end());
        tl.insert(tl.end(), sd.labels.begin(), sd.labels.end());
    }
    std::vector<SitePatch> vp;
    std::vector<uint8_t> vl;
    for (const auto& sd : val_data) {
        vp.insert(vp.end(), sd.patches.begin(), sd.patches.end());
        vl.insert(vl.end(), sd.labels.begin(), sd.labels.end());
    }
    ClassifierModel m = train_site_classifier(kind, tp, tl, vp, vl, hyper, -1);
    m.site = -1;  // shared across sites
    return m;
}

// ---------------------------------------------------------------------------

void save_models(const std::vector<ClassifierModel>& models, const std::string& path) {
    Container c;
    c.manifest["kind"] = "classifier-models";
    c.manifest["version"] = 1;
    nlohmann::json list = nlohmann::json::array();
    for (size_t i = 0; i < models.size(); ++i) {
        const auto& m = models[i];
        nlohmann::json j;
        j["kind"] = kind_name(m.kind);
        j["site"] = m.site;
        j["patch_px"] = m.patch_px;
        j["source"] = m.source;
        j["threshold"] = m.threshold;
        j["mean_dark"] = m.mean_dark;
        j["mean_bright"] = m.mean_bright;
        j["var_dark"] = m.var_dark;
        j["var_bright"] = m.var_bright;
        j["mf_threshold"] = m.mf_threshold;
        j["feat_mean"] = m.feat_mean;
        j["feat_std"] = m.feat_std;
        j["mf_feat_mean"] = m.mf_feat_mean;
        j["mf_feat_std"] = m.mf_feat_std;
        j["n_weight_layers"] = m.weights.size();
        list.push_back(j);
        const std::string prefix = "m" + std::to_string(i) + ".";
        if (!m.mf.weights.empty()) {
            c.add_blob(prefix + "mf.w", m.mf.weights);
            c.add_blob(prefix + "mf.dark", m.mf.dark_mean);
        }
        for (size_t l = 0; l < m.weights.size(); ++l) {
            c.add_blob(prefix + "w" + std::to_string(l), m.weights[l]);
            c.add_blob(prefix + "b" + std::to_string(l), m.biases[l]);
        }
    }
    c.manifest["models"] = std::move(list);
    save_container(c, path);
}

std::vector<ClassifierModel> load_models(const std::string& path) {
    const Container c = load_container(path);
    if (c.manifest.value("kind", "") != std::string("classifier-models"))
        throw std::runtime_error("not a classifier model file: " + path);
    std::vector<ClassifierModel> models;
    const auto& list = c.manifest.at("models");
    for (size_t i = 0; i < list.size(); ++i) {
        const auto& j = list[i];
        ClassifierModel m;
        m.kind = kind_from_name(j.at("kind"));
        m.site = j.at("site");
        m.patch_px = j.at("patch_px");
        m.source = j.at("source");
        m.threshold = j.at("threshold");
        m.mean_dark = j.at("mean_dark");
        m.mean_bright = j.at("mean_bright");
        m.var_dark = j.at("var_dark");
        m.var_bright = j.at("var_bright");
        m.mf_threshold = j.at("mf_threshold");
        m.feat_mean = j.at("feat_mean");
        m.feat_std = j.at("feat_std");
        m.mf_feat_mean = j.at("mf_feat_mean");
        m.mf_feat_std = j.at("mf_feat_std");
        const std::string prefix = "m" + std::to_string(i) + ".";
        if (m.kind == Kind::MatchedFilter || m.kind == Kind::MfNn) {
            m.mf.weights = c.blob_as_double(prefix + "mf.w");
            m.mf.dark_mean = c.blob_as_double(prefix + "mf.dark");
        }
        const size_t layers = j.at("n_weight_layers");
        for (size_t l = 0; l < layers; ++l) {
            m.weights.push_back(c.blob_as_double(prefix + "w" + std::to_string(l)));
            m.biases.push_back(c.blob_as_double(prefix + "b" + std::to_string(l)));
        }
        models.push_back(std::move(m));
    }
    return models;
}

}  // namespace atomread::classify
