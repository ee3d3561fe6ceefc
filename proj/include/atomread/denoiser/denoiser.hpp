#ifndef ATOMREAD_DENOISER_DENOISER_HPP
#define ATOMREAD_DENOISER_DENOISER_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "atomread/core/tensor.hpp"
#include "atomread/nn/ops.hpp"
#include "atomread/simcam/simcam.hpp"

namespace atomread::denoise {

// Encoder-bottleneck-decoder generator: three stride-1/2/2 encoder convs,
// three residual blocks at quarter resolution, two stride-2 transposed convs
// with encoder skip concatenation, and a linear 3x3 output conv. At
// width_mult 1.0 the channel widths are 64/128/256.
// Normalization layers are off by default: per-plane instance statistics vary
// with frame size, which visibly miscalibrates the cascade on stitched
// lattices and defeats the fully-convolutional transfer this model exists for.
struct GeneratorConfig {
    double width_mult = 1.0;
    int residual_blocks = 3;
    bool use_norm = false;
    int ch(int base) const {
        return std::max(1, static_cast<int>(std::lround(base * width_mult)));
    }
};

struct DiscriminatorConfig {
    double width_mult = 1.0;
    double dropout_rate = 0.25;  // after Conv2..Conv4
    double leaky_slope = 0.2;
    int ch(int base) const {
        return std::max(1, static_cast<int>(std::lround(base * width_mult)));
    }
};

struct TrainConfig {
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    int batch_size = 16;
    int epochs = 30;
    double lambda_l1 = 200.0;
    double label_real = 0.9;
    double label_fake = 0.1;
    int d_update_period = 2;  // generator steps per discriminator step
    bool cosine_lr = true;
    int early_stop_patience = 5;  // 0 disables early stopping
    uint64_t seed = 1;
    // Optional structural terms, off by default.
    double lambda_ssim = 0.0;
    double lambda_mse = 0.0;
    void validate() const;
};

// One learnable convolution (plain or transposed) with its gradients and
// optimizer state.
struct ConvLayer {
    std::string name;
    nn::ConvSpec spec;
    bool transposed = false;
    bool norm = true;
    enum class Act { None, Relu, Leaky } act = Act::Relu;
    std::vector<double> w, b, dw, db;
    nn::AdamState adam_w, adam_b;

    void init_params(uint64_t seed);
    void zero_grad();
    void adam_step(double lr, double beta1, double beta2);
    size_t param_count() const { return w.size() + b.size(); }
};

struct BlockCache {
    const Tensor* input = nullptr;  // owned by the enclosing cache
    Tensor normed;                  // after instance norm (== conv output when norm off)
    Tensor out;                     // after activation
    nn::InstanceNormCache in_cache;
};

// conv [+ instance norm] [+ activation]; backward optionally accumulates
// parameter gradients and returns the input gradient.
class ConvBlock {
public:
    ConvLayer layer;
    const Tensor& forward(const Tensor& x, BlockCache& cache, double leaky_slope = 0.2);
    Tensor backward(const Tensor& dout, const BlockCache& cache,
                    bool accumulate_params = true, double leaky_slope = 0.2);
};

struct GeneratorCache {
    Tensor input;
    BlockCache enc1, enc2, enc3;
    std::vector<BlockCache> res;  // two entries per residual block
    std::vector<Tensor> res_sum;  // pre-activation identity + branch sum
    std::vector<Tensor> res_out;  // activated block output
    BlockCache dec3, dec2;
    Tensor cat3, cat2;
    BlockCache dec1;
};

class Generator {
public:
    explicit Generator(const GeneratorConfig& config = {});

    const GeneratorConfig& config() const { return config_; }
    Tensor forward(const Tensor& x, GeneratorCache& cache);
    // Accumulates parameter gradients; returns dL/dx.
    Tensor backward(const Tensor& dy, const GeneratorCache& cache);

    void init_params(uint64_t seed);
    void zero_grad();
    void adam_step(double lr, double beta1, double beta2);
    // Rounds every weight through f32 so that checkpoints are exact.
    void quantize_f32();

    std::vector<ConvBlock*> blocks();
    std::vector<const ConvBlock*> blocks() const;
    size_t param_count() const;

private:
    GeneratorConfig config_;
    ConvBlock enc1_, enc2_, enc3_;
    std::vector<ConvBlock> res_;  // 2 per block
    ConvBlock dec3_, dec2_, dec1_;
};

struct DiscriminatorCache {
    std::vector<BlockCache> convs;
    std::vector<Tensor> dropped;          // activations after dropout
    std::vector<std::vector<uint8_t>> dropout_masks;
    BlockCache head;
};

class Discriminator {
public:
    explicit Discriminator(const DiscriminatorConfig& config = {});

    const DiscriminatorConfig& config() const { return config_; }
    std::vector<double> forward(const Tensor& x, DiscriminatorCache& cache,
                                bool training, uint64_t dropout_seed);
    // dlogits -> dL/dx; accumulates parameter gradients when update_params.
    Tensor backward(const std::vector<double>& dlogits, const DiscriminatorCache& cache,
                    bool update_params);

    void init_params(uint64_t seed);
    void zero_grad();
    void adam_step(double lr, double beta1, double beta2);
    void quantize_f32();

    std::vector<ConvBlock*> blocks();
    std::vector<const ConvBlock*> blocks() const;
    size_t param_count() const;

private:
    DiscriminatorConfig config_;
    std::vector<ConvBlock> convs_;  // Conv1..Conv4
    ConvBlock head_;                // 1x1 conv, global average follows
};

// BCE of the discriminator logits on the fake against label_real, plus
// lambda_l1 * mean|fake - target|.
double generator_loss(const std::vector<double>& d_logit_on_fake, const Tensor& fake,
                      const Tensor& target, double lambda_l1, double label_real = 0.9);
// Mean of the label-smoothed BCEs on real and fake logits.
double discriminator_loss(const std::vector<double>& d_logit_real,
                          const std::vector<double>& d_logit_fake,
                          double label_real = 0.9, double label_fake = 0.1);

// Differentiable single-window SSIM used by the optional auxiliary loss.
double ssim_global(const Tensor& fake, const Tensor& target, Tensor* dfake,
                   double dynamic_range = 1.0);

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double gen_loss = 0.0;
    double adv_term = 0.0;
    double l1_term = 0.0;
    double disc_loss = 0.0;
    double val_l1 = 0.0;
    double val_psnr = 0.0;
    double val_ssim = 0.0;
    double wall_time_s = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    int best_epoch = -1;
    double best_val_l1 = 0.0;
    double initial_val_l1 = 0.0;  // before any update
    bool early_stopped = false;
};

struct Checkpoint {
    int format_version = 1;
    GeneratorConfig gen_config;
    DiscriminatorConfig disc_config;
    TrainConfig train_config;
    simcam::NormStats norm;
    int epoch = -1;
    double best_val_l1 = 0.0;
    Generator generator;
    Discriminator discriminator;
};

// Trains on the dataset's train split (short -> long pairs normalized with
// `norm`), early-stops on validation L1 and returns the best checkpoint.
std::pair<Checkpoint, TrainReport> train(const simcam::Dataset& dataset,
                                         const GeneratorConfig& gen_config,
                                         const DiscriminatorConfig& disc_config,
                                         const TrainConfig& train_config,
                                         const simcam::NormStats& norm);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct DenoiseReport {
    bool flagged_unnormalized = false;
    double input_mean = 0.0;
    double input_min = 0.0, input_max = 0.0;
};

// Runs the generator on frames of one shape (normalized scale). Any H, W >= 8
// is accepted: inputs are reflect-padded to a multiple of 4 and cropped back.
std::vector<Frame> denoise(const Checkpoint& ckpt, const std::vector<Frame>& frames,
                           int batch_size, DenoiseReport* report = nullptr);

double cosine_lr(double base_lr, int epoch, int total_epochs);

}  // namespace atomread::denoise

#endif
