#include "atomread/nn/ops.hpp"

#include <algorithm>
#include <cmath>

#include "atomread/core/parallel.hpp"
#include "atomread/core/rng.hpp"

namespace atomread::nn {

// weight index helpers; conv stores [out][in][ky][kx], convt [in][out][ky][kx]
static inline size_t conv_widx(const ConvSpec& s, int co, int ci, int ky, int kx) {
    return ((static_cast<size_t>(co) * s.in_ch + ci) * s.kernel + ky) * s.kernel + kx;
}
static inline size_t convt_widx(const ConvSpec& s, int ci, int co, int ky, int kx) {
    return ((static_cast<size_t>(ci) * s.out_ch + co) * s.kernel + ky) * s.kernel + kx;
}

static inline int ceil_div(int a, int b) {  // b > 0
    return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}
static inline int floor_div(int a, int b) {  // b > 0
    return a >= 0 ? a / b : -((-a + b - 1) / b);
}

// valid output range: 0 <= o*stride - pad + k <= limit-1
static inline std::pair<int, int> valid_out_range(int k, int stride, int pad, int limit,
                                                  int out_dim) {
    const int lo = std::max(0, ceil_div(pad - k, stride));
    const int hi = std::min(out_dim - 1, floor_div(limit - 1 + pad - k, stride));
    return {lo, hi};
}

void conv2d_forward(const Tensor& x, const std::vector<double>& w,
                    const std::vector<double>& b, const ConvSpec& spec, Tensor& y) {
    require(x.c == spec.in_ch, "conv2d: channel mismatch");
    require(w.size() == spec.weight_count(), "conv2d: weight size mismatch");
    const int ho = conv_out_dim(x.h, spec), wo = conv_out_dim(x.w, spec);
    y = Tensor(x.n, spec.out_ch, ho, wo);

    parallel_for(static_cast<int64_t>(x.n) * spec.out_ch, [&](int64_t idx) {
        const int n = static_cast<int>(idx / spec.out_ch);
        const int co = static_cast<int>(idx % spec.out_ch);
        double* yp = y.plane(n, co);
        const double bias = b.empty() ? 0.0 : b[co];
        for (int i = 0; i < ho * wo; ++i)
            yp[i] = bias;
        for (int ci = 0; ci < spec.in_ch; ++ci) {
            const double* xp = x.plane(n, ci);
            for (int ky = 0; ky < spec.kernel; ++ky) {
                const auto [oy_lo, oy_hi] = valid_out_range(ky, spec.stride, spec.pad, x.h, ho);
                for (int kx = 0; kx < spec.kernel; ++kx) {
                    const double wv = w[conv_widx(spec, co, ci, ky, kx)];
                    const auto [ox_lo, ox_hi] =
                        valid_out_range(kx, spec.stride, spec.pad, x.w, wo);
                    for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                        const int iy = oy * spec.stride - spec.pad + ky;
                        const double* __restrict__ xrow =
                            xp + static_cast<size_t>(iy) * x.w;
                        double* __restrict__ yrow = yp + static_cast<size_t>(oy) * wo;
                        if (spec.stride == 1) {
                            const int shift = kx - spec.pad;
                            for (int ox = ox_lo; ox <= ox_hi; ++ox)
                                yrow[ox] += wv * xrow[ox + shift];
                        } else {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox)
                                yrow[ox] += wv * xrow[ox * spec.stride - spec.pad + kx];
                        }
                    }
                }
            }
        }
    });
}

void conv2d_backward_input(const Tensor& dy, const std::vector<double>& w,
                           const ConvSpec& spec, Tensor& dx) {
    const int ho = dy.h, wo = dy.w;
    parallel_for(static_cast<int64_t>(dx.n) * spec.in_ch, [&](int64_t idx) {
        const int n = static_cast<int>(idx / spec.in_ch);
        const int ci = static_cast<int>(idx % spec.in_ch);
        double* dxp = dx.plane(n, ci);
        std::fill(dxp, dxp + static_cast<size_t>(dx.h) * dx.w, 0.0);
        for (int co = 0; co < spec.out_ch; ++co) {
            const double* dyp = dy.plane(n, co);
            for (int ky = 0; ky < spec.kernel; ++ky) {
                const auto [oy_lo, oy_hi] =
                    valid_out_range(ky, spec.stride, spec.pad, dx.h, ho);
                for (int kx = 0; kx < spec.kernel; ++kx) {
                    const double wv = w[conv_widx(spec, co, ci, ky, kx)];
                    const auto [ox_lo, ox_hi] =
                        valid_out_range(kx, spec.stride, spec.pad, dx.w, wo);
                    for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                        const int iy = oy * spec.stride - spec.pad + ky;
                        const double* __restrict__ dyrow = dyp + static_cast<size_t>(oy) * wo;
                        double* __restrict__ dxrow = dxp + static_cast<size_t>(iy) * dx.w;
                        if (spec.stride == 1) {
                            const int shift = kx - spec.pad;
                            for (int ox = ox_lo; ox <= ox_hi; ++ox)
                                dxrow[ox + shift] += wv * dyrow[ox];
                        } else {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox)
                                dxrow[ox * spec.stride - spec.pad + kx] += wv * dyrow[ox];
                        }
                    }
                }
            }
        }
    });
}

void conv2d_backward_params(const Tensor& x, const Tensor& dy, const ConvSpec& spec,
                            std::vector<double>& dw, std::vector<double>& db) {
    const int ho = dy.h, wo = dy.w;
    parallel_for(spec.out_ch, [&](int64_t co64) {
        const int co = static_cast<int>(co64);
        double bacc = 0.0;
        for (int n = 0; n < x.n; ++n) {
            const double* dyp = dy.plane(n, co);
            for (int i = 0; i < ho * wo; ++i)
                bacc += dyp[i];
        }
        db[co] += bacc;
        for (int ci = 0; ci < spec.in_ch; ++ci)
            for (int ky = 0; ky < spec.kernel; ++ky) {
                const auto [oy_lo, oy_hi] =
                    valid_out_range(ky, spec.stride, spec.pad, x.h, ho);
                for (int kx = 0; kx < spec.kernel; ++kx) {
                    const auto [ox_lo, ox_hi] =
                        valid_out_range(kx, spec.stride, spec.pad, x.w, wo);
                    double acc = 0.0;
                    for (int n = 0; n < x.n; ++n) {
                        const double* xp = x.plane(n, ci);
                        const double* dyp = dy.plane(n, co);
                        for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                            const int iy = oy * spec.stride - spec.pad + ky;
                            const double* __restrict__ xrow = xp + static_cast<size_t>(iy) * x.w;
                            const double* __restrict__ dyrow = dyp + static_cast<size_t>(oy) * wo;
                            if (spec.stride == 1) {
                                const int shift = kx - spec.pad;
                                for (int ox = ox_lo; ox <= ox_hi; ++ox)
                                    acc += dyrow[ox] * xrow[ox + shift];
                            } else {
                                for (int ox = ox_lo; ox <= ox_hi; ++ox)
                                    acc += dyrow[ox] * xrow[ox * spec.stride - spec.pad + kx];
                            }
                        }
                    }
                    dw[conv_widx(spec, co, ci, ky, kx)] += acc;
                }
            }
    });
}

void convt2d_forward(const Tensor& x, const std::vector<double>& w,
                     const std::vector<double>& b, const ConvSpec& spec, Tensor& y) {
    require(x.c == spec.in_ch, "convt2d: channel mismatch");
    require(w.size() == spec.weight_count(), "convt2d: weight size mismatch");
    const int ho = convt_out_dim(x.h, spec), wo = convt_out_dim(x.w, spec);
    y = Tensor(x.n, spec.out_ch, ho, wo);

    parallel_for(static_cast<int64_t>(x.n) * spec.out_ch, [&](int64_t idx) {
        const int n = static_cast<int>(idx / spec.out_ch);
        const int co = static_cast<int>(idx % spec.out_ch);
        double* yp = y.plane(n, co);
        const double bias = b.empty() ? 0.0 : b[co];
        for (int i = 0; i < ho * wo; ++i)
            yp[i] = bias;
        for (int ci = 0; ci < spec.in_ch; ++ci) {
            const double* xp = x.plane(n, ci);
            for (int ky = 0; ky < spec.kernel; ++ky) {
                const auto [iy_lo, iy_hi] = valid_out_range(ky, spec.stride, spec.pad, ho, x.h);
                for (int kx = 0; kx < spec.kernel; ++kx) {
                    const double wv = w[convt_widx(spec, ci, co, ky, kx)];
                    const auto [ix_lo, ix_hi] =
                        valid_out_range(kx, spec.stride, spec.pad, wo, x.w);
                    for (int iy = iy_lo; iy <= iy_hi; ++iy) {
                        const int oy = iy * spec.stride - spec.pad + ky;
                        const double* __restrict__ xrow = xp + static_cast<size_t>(iy) * x.w;
                        double* yrow = yp + static_cast<size_t>(oy) * wo;
                        for (int ix = ix_lo; ix <= ix_hi; ++ix)
                            yrow[ix * spec.stride - spec.pad + kx] += wv * xrow[ix];
                    }
                }
            }
        }
    });
}

void convt2d_backward_input(const Tensor& dy, const std::vector<double>& w,
                            const ConvSpec& spec, Tensor& dx) {
    parallel_for(static_cast<int64_t>(dx.n) * spec.in_ch, [&](int64_t idx) {
        const int n = static_cast<int>(idx / spec.in_ch);
        const int ci = static_cast<int>(idx % spec.in_ch);
        double* dxp = dx.plane(n, ci);
        std::fill(dxp, dxp + static_cast<size_t>(dx.h) * dx.w, 0.0);
        for (int co = 0; co < spec.out_ch; ++co) {
            const double* dyp = dy.plane(n, co);
            for (int ky = 0; ky < spec.kernel; ++ky) {
                const auto [iy_lo, iy_hi] =
                    valid_out_range(ky, spec.stride, spec.pad, dy.h, dx.h);
                for (int kx = 0; kx < spec.kernel; ++kx) {
                    const double wv = w[convt_widx(spec, ci, co, ky, kx)];
                    const auto [ix_lo, ix_hi] =
                        valid_out_range(kx, spec.stride, spec.pad, dy.w, dx.w);
                    for (int iy = iy_lo; iy <= iy_hi; ++iy) {
                        const int oy = iy * spec.stride - spec.pad + ky;
                        const double* dyrow = dyp + static_cast<size_t>(oy) * dy.w;
                        double* __restrict__ dxrow = dxp + static_cast<size_t>(iy) * dx.w;
                        for (int ix = ix_lo; ix <= ix_hi; ++ix)
                            dxrow[ix] += wv * dyrow[ix * spec.stride - spec.pad + kx];
                    }
                }
            }
        }
    });
}

void convt2d_backward_params(const Tensor& x, const Tensor& dy, const ConvSpec& spec,
                             std::vector<double>& dw, std::vector<double>& db) {
    parallel_for(static_cast<int64_t>(spec.in_ch) * spec.out_ch, [&](int64_t idx) {
        const int ci = static_cast<int>(idx / spec.out_ch);
        const int co = static_cast<int>(idx % spec.out_ch);
        for (int ky = 0; ky < spec.kernel; ++ky) {
            const auto [iy_lo, iy_hi] =
                valid_out_range(ky, spec.stride, spec.pad, dy.h, x.h);
            for (int kx = 0; kx < spec.kernel; ++kx) {
                const auto [ix_lo, ix_hi] =
                    valid_out_range(kx, spec.stride, spec.pad, dy.w, x.w);
                double acc = 0.0;
                for (int n = 0; n < x.n; ++n) {
                    const double* xp = x.plane(n, ci);
                    const double* dyp = dy.plane(n, co);
                    for (int iy = iy_lo; iy <= iy_hi; ++iy) {
                        const int oy = iy * spec.stride - spec.pad + ky;
                        const double* __restrict__ xrow = xp + static_cast<size_t>(iy) * x.w;
                        const double* dyrow = dyp + static_cast<size_t>(oy) * dy.w;
                        for (int ix = ix_lo; ix <= ix_hi; ++ix)
                            acc += xrow[ix] * dyrow[ix * spec.stride - spec.pad + kx];
                    }
                }
                dw[convt_widx(spec, ci, co, ky, kx)] += acc;
            }
        }
    });
    parallel_for(spec.out_ch, [&](int64_t co64) {
        const int co = static_cast<int>(co64);
        double bacc = 0.0;
        for (int n = 0; n < dy.n; ++n) {
            const double* dyp = dy.plane(n, co);
            for (int i = 0; i < dy.h * dy.w; ++i)
                bacc += dyp[i];
        }
        db[co] += bacc;
    });
}

void instance_norm_forward(const Tensor& x, Tensor& y, InstanceNormCache& cache,
                           double eps) {
    y = Tensor(x.n, x.c, x.h, x.w);
    cache.invstd.assign(static_cast<size_t>(x.n) * x.c, 0.0);
    const int hw = x.h * x.w;
    parallel_for(static_cast<int64_t>(x.n) * x.c, [&](int64_t idx) {
        const int n = static_cast<int>(idx / x.c);
        const int c = static_cast<int>(idx % x.c);
        const double* xp = x.plane(n, c);
        double* yp = y.plane(n, c);
        double mean = 0.0;
        for (int i = 0; i < hw; ++i)
            mean += xp[i];
        mean /= hw;
        double var = 0.0;
        for (int i = 0; i < hw; ++i) {
            const double d = xp[i] - mean;
            var += d * d;
        }
        var /= hw;
        const double invstd = 1.0 / std::sqrt(var + eps);
        cache.invstd[static_cast<size_t>(idx)] = invstd;
        for (int i = 0; i < hw; ++i)
            yp[i] = (xp[i] - mean) * invstd;
    });
}

void instance_norm_backward(const Tensor& y, const InstanceNormCache& cache,
                            const Tensor& dy, Tensor& dx) {
    dx = Tensor(y.n, y.c, y.h, y.w);
    const int hw = y.h * y.w;
    parallel_for(static_cast<int64_t>(y.n) * y.c, [&](int64_t idx) {
        const int n = static_cast<int>(idx / y.c);
        const int c = static_cast<int>(idx % y.c);
        const double* yp = y.plane(n, c);
        const double* dyp = dy.plane(n, c);
        double* dxp = dx.plane(n, c);
        double mean_dy = 0.0, mean_dyy = 0.0;
        for (int i = 0; i < hw; ++i) {
            mean_dy += dyp[i];
            mean_dyy += dyp[i] * yp[i];
        }
        mean_dy /= hw;
        mean_dyy /= hw;
        const double invstd = cache.invstd[static_cast<size_t>(idx)];
        for (int i = 0; i < hw; ++i)
            dxp[i] = invstd * (dyp[i] - mean_dy - yp[i] * mean_dyy);
    });
}

void relu_forward(const Tensor& x, Tensor& y) {
    y = Tensor(x.n, x.c, x.h, x.w);
    for (size_t i = 0; i < x.data.size(); ++i)
        y.data[i] = x.data[i] > 0.0 ? x.data[i] : 0.0;
}

void relu_backward(const Tensor& x, const Tensor& dy, Tensor& dx) {
    dx = Tensor(x.n, x.c, x.h, x.w);
    for (size_t i = 0; i < x.data.size(); ++i)
        dx.data[i] = x.data[i] > 0.0 ? dy.data[i] : 0.0;
}

void leaky_relu_forward(const Tensor& x, double slope, Tensor& y) {
    y = Tensor(x.n, x.c, x.h, x.w);
    for (size_t i = 0; i < x.data.size(); ++i)
        y.data[i] = x.data[i] > 0.0 ? x.data[i] : slope * x.data[i];
}

void leaky_relu_backward(const Tensor& x, double slope, const Tensor& dy, Tensor& dx) {
    dx = Tensor(x.n, x.c, x.h, x.w);
    for (size_t i = 0; i < x.data.size(); ++i)
        dx.data[i] = x.data[i] > 0.0 ? dy.data[i] : slope * dy.data[i];
}

void concat_channels(const Tensor& a, const Tensor& b, Tensor& y) {
    require(a.n == b.n && a.h == b.h && a.w == b.w, "concat: spatial mismatch");
    y = Tensor(a.n, a.c + b.c, a.h, a.w);
    const size_t plane = static_cast<size_t>(a.h) * a.w;
    for (int n = 0; n < a.n; ++n) {
        for (int c = 0; c < a.c; ++c)
            std::copy(a.plane(n, c), a.plane(n, c) + plane, y.plane(n, c));
        for (int c = 0; c < b.c; ++c)
            std::copy(b.plane(n, c), b.plane(n, c) + plane, y.plane(n, a.c + c));
    }
}

void split_channels_grad(const Tensor& dy, Tensor& da, Tensor& db) {
    require(dy.c == da.c + db.c, "split: channel mismatch");
    const size_t plane = static_cast<size_t>(dy.h) * dy.w;
    for (int n = 0; n < dy.n; ++n) {
        for (int c = 0; c < da.c; ++c)
            std::copy(dy.plane(n, c), dy.plane(n, c) + plane, da.plane(n, c));
        for (int c = 0; c < db.c; ++c)
            std::copy(dy.plane(n, da.c + c), dy.plane(n, da.c + c) + plane,
                      db.plane(n, c));
    }
}

void add_inplace(Tensor& y, const Tensor& x) {
    require(y.same_shape(x), "add: shape mismatch");
    for (size_t i = 0; i < y.data.size(); ++i)
        y.data[i] += x.data[i];
}

std::vector<double> global_avg_pool(const Tensor& x) {
    require(x.c == 1, "global_avg_pool expects a single-channel map");
    std::vector<double> out(static_cast<size_t>(x.n));
    const int hw = x.h * x.w;
    for (int n = 0; n < x.n; ++n) {
        const double* p = x.plane(n, 0);
        double acc = 0.0;
        for (int i = 0; i < hw; ++i)
            acc += p[i];
        out[static_cast<size_t>(n)] = acc / hw;
    }
    return out;
}

void global_avg_pool_backward(const std::vector<double>& dlogit, Tensor& dx) {
    const int hw = dx.h * dx.w;
    for (int n = 0; n < dx.n; ++n) {
        double* p = dx.plane(n, 0);
        const double g = dlogit[static_cast<size_t>(n)] / hw;
        for (int i = 0; i < hw; ++i)
            p[i] = g;
    }
}

void dropout_forward(const Tensor& x, double rate, uint64_t seed, Tensor& y,
                     std::vector<uint8_t>& mask) {
    y = Tensor(x.n, x.c, x.h, x.w);
    mask.assign(x.data.size(), 1);
    if (rate <= 0.0) {
        y.data = x.data;
        return;
    }
    auto rng = make_engine(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double keep = 1.0 - rate;
    for (size_t i = 0; i < x.data.size(); ++i) {
        if (uni(rng) < rate) {
            mask[i] = 0;
            y.data[i] = 0.0;
        } else {
            y.data[i] = x.data[i] / keep;
        }
    }
}

void dropout_backward(const Tensor& dy, double rate, const std::vector<uint8_t>& mask,
                      Tensor& dx) {
    dx = Tensor(dy.n, dy.c, dy.h, dy.w);
    if (rate <= 0.0) {
        dx.data = dy.data;
        return;
    }
    const double keep = 1.0 - rate;
    for (size_t i = 0; i < dy.data.size(); ++i)
        dx.data[i] = mask[i] ? dy.data[i] / keep : 0.0;
}

double bce_with_logits(const std::vector<double>& logits, double target,
                       std::vector<double>* d_logits) {
    require(!logits.empty(), "bce: empty logit batch");
    const double n = static_cast<double>(logits.size());
    if (d_logits)
        d_logits->assign(logits.size(), 0.0);
    double loss = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        const double z = logits[i];
        loss += std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
        if (d_logits) {
            const double sig = 1.0 / (1.0 + std::exp(-z));
            (*d_logits)[i] = (sig - target) / n;
        }
    }
    return loss / n;
}

double l1_loss(const Tensor& a, const Tensor& b, Tensor* da) {
    require(a.same_shape(b), "l1_loss: shape mismatch");
    const double n = static_cast<double>(a.data.size());
    if (da)
        *da = Tensor(a.n, a.c, a.h, a.w);
    double loss = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        loss += std::abs(d);
        if (da)
            da->data[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
    }
    return loss / n;
}

void AdamState::step(std::vector<double>& params, const std::vector<double>& grads,
                     double lr, double beta1, double beta2, double eps) {
    if (m.size() != params.size())
        init(params.size());
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    for (size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

namespace ref {

void conv2d_forward(const Tensor& x, const std::vector<double>& w,
                    const std::vector<double>& b, const ConvSpec& spec, Tensor& y) {
    const int ho = conv_out_dim(x.h, spec), wo = conv_out_dim(x.w, spec);
    y = Tensor(x.n, spec.out_ch, ho, wo);
    for (int n = 0; n < x.n; ++n)
        for (int co = 0; co < spec.out_ch; ++co)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    double acc = b.empty() ? 0.0 : b[co];
                    for (int ci = 0; ci < spec.in_ch; ++ci)
                        for (int ky = 0; ky < spec.kernel; ++ky)
                            for (int kx = 0; kx < spec.kernel; ++kx) {
                                const int iy = oy * spec.stride - spec.pad + ky;
                                const int ix = ox * spec.stride - spec.pad + kx;
                                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w)
                                    continue;
                                acc += x.at(n, ci, iy, ix) *
                                       w[conv_widx(spec, co, ci, ky, kx)];
                            }
                    y.at(n, co, oy, ox) = acc;
                }
}

void conv2d_backward_input(const Tensor& dy, const std::vector<double>& w,
                           const ConvSpec& spec, Tensor& dx) {
    for (int n = 0; n < dx.n; ++n)
        for (int ci = 0; ci < spec.in_ch; ++ci)
            for (int iy = 0; iy < dx.h; ++iy)
                for (int ix = 0; ix < dx.w; ++ix) {
                    double acc = 0.0;
                    for (int co = 0; co < spec.out_ch; ++co)
                        for (int ky = 0; ky < spec.kernel; ++ky)
                            for (int kx = 0; kx < spec.kernel; ++kx) {
                                const int ny = iy + spec.pad - ky;
                                const int nx = ix + spec.pad - kx;
                                if (ny % spec.stride || nx % spec.stride)
                                    continue;
                                const int oy = ny / spec.stride, ox = nx / spec.stride;
                                if (oy < 0 || oy >= dy.h || ox < 0 || ox >= dy.w)
                                    continue;
                                acc += dy.at(n, co, oy, ox) *
                                       w[conv_widx(spec, co, ci, ky, kx)];
                            }
                    dx.at(n, ci, iy, ix) = acc;
                }
}

void conv2d_backward_params(const Tensor& x, const Tensor& dy, const ConvSpec& spec,
                            std::vector<double>& dw, std::vector<double>& db) {
    for (int co = 0; co < spec.out_ch; ++co) {
        for (int n = 0; n < x.n; ++n)
            for (int oy = 0; oy < dy.h; ++oy)
                for (int ox = 0; ox < dy.w; ++ox)
                    db[co] += dy.at(n, co, oy, ox);
        for (int ci = 0; ci < spec.in_ch; ++ci)
            for (int ky = 0; ky < spec.kernel; ++ky)
                for (int kx = 0; kx < spec.kernel; ++kx)
                    for (int n = 0; n < x.n; ++n)
                        for (int oy = 0; oy < dy.h; ++oy)
                            for (int ox = 0; ox < dy.w; ++ox) {
                                const int iy = oy * spec.stride - spec.pad + ky;
                                const int ix = ox * spec.stride - spec.pad + kx;
                                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w)
                                    continue;
                                dw[conv_widx(spec, co, ci, ky, kx)] +=
                                    dy.at(n, co, oy, ox) * x.at(n, ci, iy, ix);
                            }
    }
}

void convt2d_forward(const Tensor& x, const std::vector<double>& w,
                     const std::vector<double>& b, const ConvSpec& spec, Tensor& y) {
    const int ho = convt_out_dim(x.h, spec), wo = convt_out_dim(x.w, spec);
    y = Tensor(x.n, spec.out_ch, ho, wo);
    for (int n = 0; n < x.n; ++n)
        for (int co = 0; co < spec.out_ch; ++co)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox) {
                    double acc = b.empty() ? 0.0 : b[co];
                    for (int ci = 0; ci < spec.in_ch; ++ci)
                        for (int ky = 0; ky < spec.kernel; ++ky)
                            for (int kx = 0; kx < spec.kernel; ++kx) {
                                const int ny = oy + spec.pad - ky;
                                const int nx = ox + spec.pad - kx;
                                if (ny % spec.stride || nx % spec.stride)
                                    continue;
                                const int iy = ny / spec.stride, ix = nx / spec.stride;
                                if (iy < 0 || iy >= x.h || ix < 0 || ix >= x.w)
                                    continue;
                                acc += x.at(n, ci, iy, ix) *
                                       w[convt_widx(spec, ci, co, ky, kx)];
                            }
                    y.at(n, co, oy, ox) = acc;
                }
}

}  // namespace ref

}  // namespace atomread::nn
