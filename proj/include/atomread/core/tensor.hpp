#ifndef ATOMREAD_CORE_TENSOR_HPP
#define ATOMREAD_CORE_TENSOR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace atomread {

// Dense NCHW tensor. All NN math runs in double; file formats are f32.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          data(static_cast<size_t>(n_) * c_ * h_ * w_, 0.0) {}

    size_t size() const { return data.size(); }
    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    double* plane(int in, int ic) {
        return data.data() + (static_cast<size_t>(in) * c + ic) * h * w;
    }
    const double* plane(int in, int ic) const {
        return data.data() + (static_cast<size_t>(in) * c + ic) * h * w;
    }

    double& at(int in, int ic, int iy, int ix) {
        return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    double at(int in, int ic, int iy, int ix) const {
        return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }

    std::string shape_str() const {
        return "[" + std::to_string(n) + "," + std::to_string(c) + "," +
               std::to_string(h) + "," + std::to_string(w) + "]";
    }
};

// Single-channel frame, row-major. The simulator and metrics work on these.
struct Frame {
    int h = 0, w = 0;
    std::vector<double> px;

    Frame() = default;
    Frame(int h_, int w_, double v = 0.0)
        : h(h_), w(w_), px(static_cast<size_t>(h_) * w_, v) {}

    double& at(int y, int x) { return px[static_cast<size_t>(y) * w + x]; }
    double at(int y, int x) const { return px[static_cast<size_t>(y) * w + x]; }
    size_t size() const { return px.size(); }
    bool same_shape(const Frame& o) const { return h == o.h && w == o.w; }
};

inline void require(bool cond, const std::string& msg) {
    if (!cond)
        throw std::invalid_argument(msg);
}

}  // namespace atomread

#endif
