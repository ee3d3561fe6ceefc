#include <cmath>
#include <numbers>

#include "atomread/core/container.hpp"
#include "atomread/core/rng.hpp"
#include "atomread/denoiser/denoiser.hpp"

namespace atomread::denoise {

void TrainConfig::validate() const {
    require(lr > 0.0 && beta1 > 0.0 && beta2 > 0.0, "train config: rates must be positive");
    require(beta1 < 1.0 && beta2 < 1.0, "train config: betas must be < 1");
    require(batch_size >= 1 && epochs >= 1, "train config: batch/epochs must be >= 1");
    require(lambda_l1 >= 0.0, "train config: lambda_l1 must be >= 0");
    require(label_fake < label_real, "train config: label_fake must be < label_real");
    require(d_update_period >= 1, "train config: d_update_period must be >= 1");
    require(early_stop_patience >= 0, "train config: patience must be >= 0");
}

void ConvLayer::init_params(uint64_t seed) {
    w.assign(spec.weight_count(), 0.0);
    b.assign(static_cast<size_t>(spec.out_ch), 0.0);
    dw.assign(w.size(), 0.0);
    db.assign(b.size(), 0.0);
    adam_w.init(w.size());
    adam_b.init(b.size());

    auto rng = make_engine(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double fan_in = static_cast<double>(spec.in_ch) * spec.kernel * spec.kernel;
    // He init for rectified layers, Xavier-ish for the linear output.
    const double scale = act == Act::None ? std::sqrt(1.0 / fan_in)
                                          : std::sqrt(2.0 / fan_in);
    for (auto& v : w)
        v = scale * gauss(rng);
}

void ConvLayer::zero_grad() {
    std::fill(dw.begin(), dw.end(), 0.0);
    std::fill(db.begin(), db.end(), 0.0);
}

void ConvLayer::adam_step(double lr, double beta1, double beta2) {
    adam_w.step(w, dw, lr, beta1, beta2);
    adam_b.step(b, db, lr, beta1, beta2);
}

const Tensor& ConvBlock::forward(const Tensor& x, BlockCache& cache, double leaky_slope) {
    cache.input = &x;
    Tensor pre;
    if (layer.transposed)
        nn::convt2d_forward(x, layer.w, layer.b, layer.spec, pre);
    else
        nn::conv2d_forward(x, layer.w, layer.b, layer.spec, pre);

    if (layer.norm)
        nn::instance_norm_forward(pre, cache.normed, cache.in_cache);
    else
        cache.normed = std::move(pre);

    switch (layer.act) {
        case ConvLayer::Act::Relu:
            nn::relu_forward(cache.normed, cache.out);
            break;
        case ConvLayer::Act::Leaky:
            nn::leaky_relu_forward(cache.normed, leaky_slope, cache.out);
            break;
        case ConvLayer::Act::None:
            cache.out = cache.normed;
            break;
    }
    return cache.out;
}

Tensor ConvBlock::backward(const Tensor& dout, const BlockCache& cache,
                           bool accumulate_params, double leaky_slope) {
    Tensor dnormed;
    switch (layer.act) {
        case ConvLayer::Act::Relu:
            nn::relu_backward(cache.normed, dout, dnormed);
            break;
        case ConvLayer::Act::Leaky:
            nn::leaky_relu_backward(cache.normed, leaky_slope, dout, dnormed);
            break;
        case ConvLayer::Act::None:
            dnormed = dout;
            break;
    }

    Tensor dpre;
    if (layer.norm)
        nn::instance_norm_backward(cache.normed, cache.in_cache, dnormed, dpre);
    else
        dpre = std::move(dnormed);

    const Tensor& x = *cache.input;
    if (accumulate_params) {
        if (layer.transposed)
            nn::convt2d_backward_params(x, dpre, layer.spec, layer.dw, layer.db);
        else
            nn::conv2d_backward_params(x, dpre, layer.spec, layer.dw, layer.db);
    }
    Tensor dx(x.n, x.c, x.h, x.w);
    if (layer.transposed)
        nn::convt2d_backward_input(dpre, layer.w, layer.spec, dx);
    else
        nn::conv2d_backward_input(dpre, layer.w, layer.spec, dx);
    return dx;
}

namespace {
ConvLayer make_conv(const std::string& name, int in_ch, int out_ch, int kernel,
                    int stride, int pad, bool transposed, bool norm,
                    ConvLayer::Act act) {
    ConvLayer l;
    l.name = name;
    l.spec = nn::ConvSpec{in_ch, out_ch, kernel, stride, pad};
    l.transposed = transposed;
    l.norm = norm;
    l.act = act;
    return l;
}
}  // namespace

Generator::Generator(const GeneratorConfig& config) : config_(config) {
    require(config.width_mult > 0.0, "generator: width_mult must be > 0");
    const int c1 = config.ch(64), c2 = config.ch(128), c3 = config.ch(256);
    using Act = ConvLayer::Act;
    const bool gn = config.use_norm;
    enc1_.layer = make_conv("enc1", 1, c1, 3, 1, 1, false, gn, Act::Relu);
    enc2_.layer = make_conv("enc2", c1, c2, 3, 2, 1, false, gn, Act::Relu);
    enc3_.layer = make_conv("enc3", c2, c3, 3, 2, 1, false, gn, Act::Relu);
    for (int r = 0; r < config.residual_blocks; ++r) {
        ConvBlock a, b;
        a.layer = make_conv("res" + std::to_string(r + 1) + "a", c3, c3, 3, 1, 1,
                            false, gn, Act::Relu);
        b.layer = make_conv("res" + std::to_string(r + 1) + "b", c3, c3, 3, 1, 1,
                            false, gn, Act::None);
        res_.push_back(std::move(a));
        res_.push_back(std::move(b));
    }
    dec3_.layer = make_conv("dec3", c3, c2, 4, 2, 1, true, gn, Act::Relu);
    dec2_.layer = make_conv("dec2", 2 * c2, c1, 4, 2, 1, true, gn, Act::Relu);
    dec1_.layer = make_conv("dec1", 2 * c1, 1, 3, 1, 1, false, false, Act::None);
    init_params(0xD0E5);
}

std::vector<ConvBlock*> Generator::blocks() {
    std::vector<ConvBlock*> out{&enc1_, &enc2_, &enc3_};
    for (auto& r : res_)
        out.push_back(&r);
    out.push_back(&dec3_);
    out.push_back(&dec2_);
    out.push_back(&dec1_);
    return out;
}

std::vector<const ConvBlock*> Generator::blocks() const {
    auto mutable_blocks = const_cast<Generator*>(this)->blocks();
    return std::vector<const ConvBlock*>(mutable_blocks.begin(), mutable_blocks.end());
}

void Generator::init_params(uint64_t seed) {
    auto bs = blocks();
    for (size_t i = 0; i < bs.size(); ++i)
        bs[i]->layer.init_params(hash_seed(seed, i));
}

void Generator::zero_grad() {
    for (auto* b : blocks())
        b->layer.zero_grad();
}

void Generator::adam_step(double lr, double beta1, double beta2) {
    for (auto* b : blocks())
        b->layer.adam_step(lr, beta1, beta2);
}

void Generator::quantize_f32() {
    for (auto* b : blocks()) {
        for (auto& v : b->layer.w)
            v = to_f32(v);
        for (auto& v : b->layer.b)
            v = to_f32(v);
    }
}

size_t Generator::param_count() const {
    size_t total = 0;
    for (const auto* b : blocks())
        total += b->layer.param_count();
    return total;
}

Tensor Generator::forward(const Tensor& x, GeneratorCache& cache) {
    require(x.c == 1, "generator: expects single-channel input");
    if (x.h < 8 || x.w < 8)
        throw std::invalid_argument("frame too small");
    require(x.h % 4 == 0 && x.w % 4 == 0,
            "generator: H and W must be divisible by 4 (pad first)");

    cache.input = x;
    const Tensor& e1 = enc1_.forward(cache.input, cache.enc1);
    const Tensor& e2 = enc2_.forward(e1, cache.enc2);
    const Tensor& e3 = enc3_.forward(e2, cache.enc3);

    cache.res.resize(res_.size());
    cache.res_sum.resize(res_.size() / 2);
    cache.res_out.resize(res_.size() / 2);
    const Tensor* cur = &e3;
    for (size_t r = 0; r < res_.size() / 2; ++r) {
        const Tensor& a = res_[2 * r].forward(*cur, cache.res[2 * r]);
        const Tensor& f = res_[2 * r + 1].forward(a, cache.res[2 * r + 1]);
        cache.res_sum[r] = f;
        nn::add_inplace(cache.res_sum[r], *cur);
        nn::relu_forward(cache.res_sum[r], cache.res_out[r]);
        cur = &cache.res_out[r];
    }

    const Tensor& d3 = dec3_.forward(*cur, cache.dec3);
    nn::concat_channels(d3, e2, cache.cat3);
    const Tensor& d2 = dec2_.forward(cache.cat3, cache.dec2);
    nn::concat_channels(d2, e1, cache.cat2);
    return dec1_.forward(cache.cat2, cache.dec1);
}

Tensor Generator::backward(const Tensor& dy, const GeneratorCache& cache) {
    Tensor dcat2 = dec1_.backward(dy, cache.dec1);
    Tensor dd2(cache.dec2.out.n, cache.dec2.out.c, cache.dec2.out.h, cache.dec2.out.w);
    Tensor de1_skip(cache.enc1.out.n, cache.enc1.out.c, cache.enc1.out.h,
                    cache.enc1.out.w);
    nn::split_channels_grad(dcat2, dd2, de1_skip);

    Tensor dcat3 = dec2_.backward(dd2, cache.dec2);
    Tensor dd3(cache.dec3.out.n, cache.dec3.out.c, cache.dec3.out.h, cache.dec3.out.w);
    Tensor de2_skip(cache.enc2.out.n, cache.enc2.out.c, cache.enc2.out.h,
                    cache.enc2.out.w);
    nn::split_channels_grad(dcat3, dd3, de2_skip);

    Tensor dcur = dec3_.backward(dd3, cache.dec3);
    for (size_t r = res_.size() / 2; r-- > 0;) {
        Tensor dsum;
        nn::relu_backward(cache.res_sum[r], dcur, dsum);
        Tensor da = res_[2 * r + 1].backward(dsum, cache.res[2 * r + 1]);
        Tensor din = res_[2 * r].backward(da, cache.res[2 * r]);
        nn::add_inplace(din, dsum);  // identity path
        dcur = std::move(din);
    }

    Tensor de2 = enc3_.backward(dcur, cache.enc3);
    nn::add_inplace(de2, de2_skip);
    Tensor de1 = enc2_.backward(de2, cache.enc2);
    nn::add_inplace(de1, de1_skip);
    return enc1_.backward(de1, cache.enc1);
}

Discriminator::Discriminator(const DiscriminatorConfig& config) : config_(config) {
    require(config.width_mult > 0.0, "discriminator: width_mult must be > 0");
    require(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0,
            "discriminator: dropout_rate must be in [0,1)");
    const int c1 = config.ch(64), c2 = config.ch(128), c3 = config.ch(256),
              c4 = config.ch(512);
    using Act = ConvLayer::Act;
    convs_.resize(4);
    convs_[0].layer = make_conv("conv1", 1, c1, 3, 2, 1, false, false, Act::Leaky);
    convs_[1].layer = make_conv("conv2", c1, c2, 3, 2, 1, false, true, Act::Leaky);
    convs_[2].layer = make_conv("conv3", c2, c3, 3, 2, 1, false, true, Act::Leaky);
    convs_[3].layer = make_conv("conv4", c3, c4, 3, 2, 1, false, true, Act::Leaky);
    head_.layer = make_conv("head", c4, 1, 1, 1, 0, false, false, Act::None);
    init_params(0xD15C);
}

std::vector<ConvBlock*> Discriminator::blocks() {
    std::vector<ConvBlock*> out;
    for (auto& c : convs_)
        out.push_back(&c);
    out.push_back(&head_);
    return out;
}

std::vector<const ConvBlock*> Discriminator::blocks() const {
    auto mutable_blocks = const_cast<Discriminator*>(this)->blocks();
    return std::vector<const ConvBlock*>(mutable_blocks.begin(), mutable_blocks.end());
}

void Discriminator::init_params(uint64_t seed) {
    auto bs = blocks();
    for (size_t i = 0; i < bs.size(); ++i)
        bs[i]->layer.init_params(hash_seed(seed, 100 + i));
}

void Discriminator::zero_grad() {
    for (auto* b : blocks())
        b->layer.zero_grad();
}

void Discriminator::adam_step(double lr, double beta1, double beta2) {
    for (auto* b : blocks())
        b->layer.adam_step(lr, beta1, beta2);
}

void Discriminator::quantize_f32() {
    for (auto* b : blocks()) {
        for (auto& v : b->layer.w)
            v = to_f32(v);
        for (auto& v : b->layer.b)
            v = to_f32(v);
    }
}

size_t Discriminator::param_count() const {
    size_t total = 0;
    for (const auto* b : blocks())
        total += b->layer.param_count();
    return total;
}

std::vector<double> Discriminator::forward(const Tensor& x, DiscriminatorCache& cache,
                                           bool training, uint64_t dropout_seed) {
    require(x.c == 1, "discriminator: expects single-channel input");
    if (x.h < 8 || x.w < 8)
        throw std::invalid_argument("frame too small");

    cache.convs.resize(convs_.size());
    cache.dropped.resize(convs_.size());
    cache.dropout_masks.resize(convs_.size());

    const Tensor* cur = &x;
    for (size_t i = 0; i < convs_.size(); ++i) {
        const Tensor& a =
            convs_[i].forward(*cur, cache.convs[i], config_.leaky_slope);
        const bool use_dropout = training && i >= 1 && config_.dropout_rate > 0.0;
        if (use_dropout) {
            nn::dropout_forward(a, config_.dropout_rate, hash_seed(dropout_seed, i),
                                cache.dropped[i], cache.dropout_masks[i]);
        } else {
            cache.dropped[i] = a;
            cache.dropout_masks[i].clear();
        }
        cur = &cache.dropped[i];
    }
    const Tensor& logit_map = head_.forward(*cur, cache.head);
    return nn::global_avg_pool(logit_map);
}

Tensor Discriminator::backward(const std::vector<double>& dlogits,
                               const DiscriminatorCache& cache, bool update_params) {
    Tensor dmap(cache.head.out.n, cache.head.out.c, cache.head.out.h, cache.head.out.w);
    nn::global_avg_pool_backward(dlogits, dmap);
    Tensor dcur = head_.backward(dmap, cache.head, update_params);
    for (size_t i = convs_.size(); i-- > 0;) {
        if (!cache.dropout_masks[i].empty()) {
            Tensor tmp;
            nn::dropout_backward(dcur, config_.dropout_rate, cache.dropout_masks[i],
                                 tmp);
            dcur = std::move(tmp);
        }
        dcur = convs_[i].backward(dcur, cache.convs[i], update_params,
                                  config_.leaky_slope);
    }
    return dcur;
}

double generator_loss(const std::vector<double>& d_logit_on_fake, const Tensor& fake,
                      const Tensor& target, double lambda_l1, double label_real) {
    require(fake.same_shape(target), "generator_loss: shape mismatch");
    const double adv = nn::bce_with_logits(d_logit_on_fake, label_real);
    return adv + lambda_l1 * nn::l1_loss(fake, target);
}

double discriminator_loss(const std::vector<double>& d_logit_real,
                          const std::vector<double>& d_logit_fake, double label_real,
                          double label_fake) {
    return 0.5 * (nn::bce_with_logits(d_logit_real, label_real) +
                  nn::bce_with_logits(d_logit_fake, label_fake));
}

double ssim_global(const Tensor& fake, const Tensor& target, Tensor* dfake,
                   double dynamic_range) {
    require(fake.same_shape(target), "ssim_global: shape mismatch");
    const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
    const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
    const int plane = fake.c * fake.h * fake.w;
    if (dfake)
        *dfake = Tensor(fake.n, fake.c, fake.h, fake.w);

    double total = 0.0;
    for (int n = 0; n < fake.n; ++n) {
        const double* a = fake.data.data() + static_cast<size_t>(n) * plane;
        const double* b = target.data.data() + static_cast<size_t>(n) * plane;
        double mu_a = 0, mu_b = 0;
        for (int i = 0; i < plane; ++i) {
            mu_a += a[i];
            mu_b += b[i];
        }
        mu_a /= plane;
        mu_b /= plane;
        double va = 0, vb = 0, cov = 0;
        for (int i = 0; i < plane; ++i) {
            va += (a[i] - mu_a) * (a[i] - mu_a);
            vb += (b[i] - mu_b) * (b[i] - mu_b);
            cov += (a[i] - mu_a) * (b[i] - mu_b);
        }
        va /= plane;
        vb /= plane;
        cov /= plane;

        const double a1 = 2 * mu_a * mu_b + c1, a2 = 2 * cov + c2;
        const double b1 = mu_a * mu_a + mu_b * mu_b + c1, b2 = va + vb + c2;
        const double s = (a1 * a2) / (b1 * b2);
        total += s;

        if (dfake) {
            double* g = dfake->data.data() + static_cast<size_t>(n) * plane;
            for (int i = 0; i < plane; ++i) {
                const double da1 = 2 * mu_b / plane;
                const double da2 = 2 * (b[i] - mu_b) / plane;
                const double db1 = 2 * mu_a / plane;
                const double db2 = 2 * (a[i] - mu_a) / plane;
                g[i] = (da1 * a2 + a1 * da2) / (b1 * b2) - s * (db1 / b1 + db2 / b2);
            }
        }
    }
    if (dfake)
        for (auto& v : dfake->data)
            v /= fake.n;
    return total / fake.n;
}

double cosine_lr(double base_lr, int epoch, int total_epochs) {
    return base_lr * (1.0 + std::cos(std::numbers::pi * epoch / total_epochs)) / 2.0;
}

}  // namespace atomread::denoise
