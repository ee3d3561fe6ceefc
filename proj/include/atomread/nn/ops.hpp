#ifndef ATOMREAD_NN_OPS_HPP
#define ATOMREAD_NN_OPS_HPP

#include <cstdint>
#include <vector>

#include "atomread/core/tensor.hpp"

namespace atomread::nn {

struct ConvSpec {
    int in_ch = 1, out_ch = 1;
    int kernel = 3, stride = 1, pad = 1;
    size_t weight_count() const {
        return static_cast<size_t>(in_ch) * out_ch * kernel * kernel;
    }
};

inline int conv_out_dim(int in, const ConvSpec& s) {
    return (in + 2 * s.pad - s.kernel) / s.stride + 1;
}
inline int convt_out_dim(int in, const ConvSpec& s) {
    return (in - 1) * s.stride - 2 * s.pad + s.kernel;
}

// Convolution, weights [out_ch][in_ch][k][k]. The OpenMP kernels distribute
// whole output planes across threads; per-element accumulation order is
// identical to a single-threaded run, so results do not depend on the thread
// count.
void conv2d_forward(const Tensor& x, const std::vector<double>& w,
                    const std::vector<double>& b, const ConvSpec& spec, Tensor& y);
void conv2d_backward_input(const Tensor& dy, const std::vector<double>& w,
                           const ConvSpec& spec, Tensor& dx);
void conv2d_backward_params(const Tensor& x, const Tensor& dy, const ConvSpec& spec,
                            std::vector<double>& dw, std::vector<double>& db);

// Transposed convolution, weights [in_ch][out_ch][k][k].
void convt2d_forward(const Tensor& x, const std::vector<double>& w,
                     const std::vector<double>& b, const ConvSpec& spec, Tensor& y);
void convt2d_backward_input(const Tensor& dy, const std::vector<double>& w,
                            const ConvSpec& spec, Tensor& dx);
void convt2d_backward_params(const Tensor& x, const Tensor& dy, const ConvSpec& spec,
                             std::vector<double>& dw, std::vector<double>& db);

// Per-(sample, channel) normalization over the spatial plane, no affine
// parameters (the checkpoint format would otherwise pin extra blobs).
struct InstanceNormCache {
    std::vector<double> invstd;  // one per (n, c)
};
void instance_norm_forward(const Tensor& x, Tensor& y, InstanceNormCache& cache,
                           double eps = 1e-5);
void instance_norm_backward(const Tensor& y, const InstanceNormCache& cache,
                            const Tensor& dy, Tensor& dx);

void relu_forward(const Tensor& x, Tensor& y);
void relu_backward(const Tensor& x, const Tensor& dy, Tensor& dx);
void leaky_relu_forward(const Tensor& x, double slope, Tensor& y);
void leaky_relu_backward(const Tensor& x, double slope, const Tensor& dy, Tensor& dx);

// Channel concatenation [a ; b] and its adjoint.
void concat_channels(const Tensor& a, const Tensor& b, Tensor& y);
void split_channels_grad(const Tensor& dy, Tensor& da, Tensor& db);

void add_inplace(Tensor& y, const Tensor& x);

// Mean over the spatial plane of a single-channel map -> one logit per sample.
std::vector<double> global_avg_pool(const Tensor& x);
void global_avg_pool_backward(const std::vector<double>& dlogit, Tensor& dx);

// Inverted dropout; mask is Bernoulli(1-rate) drawn from the given seed.
void dropout_forward(const Tensor& x, double rate, uint64_t seed, Tensor& y,
                     std::vector<uint8_t>& mask);
void dropout_backward(const Tensor& dy, double rate, const std::vector<uint8_t>& mask,
                      Tensor& dx);

// Numerically stable binary cross-entropy against a scalar target, averaged
// over the batch of logits. d_logits receives sigmoid(z) - target scaled by
// 1/batch.
double bce_with_logits(const std::vector<double>& logits, double target,
                       std::vector<double>* d_logits = nullptr);

// Mean absolute difference; gradient w.r.t. `a` is sign(a-b)/count.
double l1_loss(const Tensor& a, const Tensor& b, Tensor* da = nullptr);

struct AdamState {
    std::vector<double> m, v;
    long long step_count = 0;
    void init(size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
        step_count = 0;
    }
    void step(std::vector<double>& params, const std::vector<double>& grads,
              double lr, double beta1, double beta2, double eps = 1e-8);
};

// Textbook quadruple-loop implementations kept as the reference the optimized
// kernels are tested against.
namespace ref {
void conv2d_forward(const Tensor& x, const std::vector<double>& w,
                    const std::vector<double>& b, const ConvSpec& spec, Tensor& y);
void conv2d_backward_input(const Tensor& dy, const std::vector<double>& w,
                           const ConvSpec& spec, Tensor& dx);
void conv2d_backward_params(const Tensor& x, const Tensor& dy, const ConvSpec& spec,
                            std::vector<double>& dw, std::vector<double>& db);
void convt2d_forward(const Tensor& x, const std::vector<double>& w,
                     const std::vector<double>& b, const ConvSpec& spec, Tensor& y);
}  // namespace ref

}  // namespace atomread::nn

#endif
