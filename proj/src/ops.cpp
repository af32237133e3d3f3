#include "ctsr/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <Eigen/Core>

#include "ctsr/error.hpp"

namespace ctsr {

namespace {

using RowMat = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

struct ConvGeometry {
    std::size_t channels, h, w, k, pad, out_h, out_w;

    std::size_t rows() const { return channels * k * k; }
    std::size_t cols() const { return out_h * out_w; }
};

ConvGeometry geometry(const char* context, const Tensor4& input, const KernelTensor& kernel,
                      std::size_t pad) {
    if (input.c() != kernel.in()) {
        throw DimensionError(context, "input channels", input.c(), "kernel in_channels",
                             kernel.in());
    }
    const std::size_t k = kernel.k();
    if (input.h() + 2 * pad < k || input.w() + 2 * pad < k) {
        throw Error(ErrorCode::dimension_mismatch,
                    std::string(context) + ": non-positive output size for input " +
                        input.shape().to_string() + ", kernel " + std::to_string(k) + ", pad " +
                        std::to_string(pad));
    }
    return {input.c(), input.h(), input.w(), k, pad, input.h() + 2 * pad - k + 1,
            input.w() + 2 * pad - k + 1};
}

// Valid output-column range [lo, hi) for kernel offset kx, i.e. the columns
// whose input index ox + kx - pad falls inside [0, w).
inline void valid_range(std::size_t kx, const ConvGeometry& g, std::size_t& lo, std::size_t& hi) {
    lo = g.pad > kx ? g.pad - kx : 0;
    const std::size_t end = g.w + g.pad - kx;  // exclusive bound on ox
    hi = std::min(end, g.out_w);
    if (hi < lo) hi = lo;
}

void im2col(const float* src, const ConvGeometry& g, float* col) {
    const std::size_t P = g.cols();
    for (std::size_t c = 0; c < g.channels; ++c) {
        const float* plane = src + c * g.h * g.w;
        for (std::size_t ky = 0; ky < g.k; ++ky) {
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                float* dst = col + ((c * g.k + ky) * g.k + kx) * P;
                std::size_t lo, hi;
                valid_range(kx, g, lo, hi);
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    float* row = dst + oy * g.out_w;
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) -
                                              static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
                        std::fill(row, row + g.out_w, 0.0f);
                        continue;
                    }
                    std::fill(row, row + lo, 0.0f);
                    if (hi > lo) {
                        std::memcpy(row + lo, plane + iy * g.w + (lo + kx - g.pad),
                                    (hi - lo) * sizeof(float));
                    }
                    std::fill(row + hi, row + g.out_w, 0.0f);
                }
            }
        }
    }
}

void col2im_add(const float* col, const ConvGeometry& g, float* dst) {
    const std::size_t P = g.cols();
    for (std::size_t c = 0; c < g.channels; ++c) {
        float* plane = dst + c * g.h * g.w;
        for (std::size_t ky = 0; ky < g.k; ++ky) {
            for (std::size_t kx = 0; kx < g.k; ++kx) {
                const float* src = col + ((c * g.k + ky) * g.k + kx) * P;
                std::size_t lo, hi;
                valid_range(kx, g, lo, hi);
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) -
                                              static_cast<std::ptrdiff_t>(g.pad);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                    const float* row = src + oy * g.out_w;
                    float* out = plane + iy * g.w;
                    for (std::size_t ox = lo; ox < hi; ++ox) out[ox + kx - g.pad] += row[ox];
                }
            }
        }
    }
}

void require_same(const char* context, const Shape4& a, const Shape4& b) {
    if (a.n != b.n) throw DimensionError(context, "n", a.n, "n", b.n);
    if (a.c != b.c) throw DimensionError(context, "channels", a.c, "channels", b.c);
    if (a.h != b.h) throw DimensionError(context, "height", a.h, "height", b.h);
    if (a.w != b.w) throw DimensionError(context, "width", a.w, "width", b.w);
}

}  // namespace

Tensor4 conv2d_forward(const Tensor4& input, const KernelTensor& kernel,
                       std::span<const float> bias, std::size_t pad) {
    const ConvGeometry g = geometry("conv2d_forward", input, kernel, pad);
    if (bias.size() != kernel.out()) {
        throw DimensionError("conv2d_forward", "bias length", bias.size(), "kernel out_filters",
                             kernel.out());
    }
    Tensor4 out(Shape4{input.n(), kernel.out(), g.out_h, g.out_w});
    std::vector<float> col(g.rows() * g.cols());
    ConstMapMat weights(kernel.data().data(), static_cast<Eigen::Index>(kernel.out()),
                        static_cast<Eigen::Index>(g.rows()));
    ConstMapMat cols(col.data(), static_cast<Eigen::Index>(g.rows()),
                     static_cast<Eigen::Index>(g.cols()));
    Eigen::Map<const Eigen::VectorXf> b(bias.data(), static_cast<Eigen::Index>(bias.size()));
    for (std::size_t s = 0; s < input.n(); ++s) {
        im2col(input.sample(s).data(), g, col.data());
        MapMat o(out.sample(s).data(), static_cast<Eigen::Index>(kernel.out()),
                 static_cast<Eigen::Index>(g.cols()));
        o.noalias() = weights * cols;
        o.colwise() += b;
    }
    return out;
}

ConvGrads conv2d_backward(const Tensor4& input, const KernelTensor& kernel,
                          const Tensor4& grad_output, std::size_t pad, bool want_input_grad) {
    const ConvGeometry g = geometry("conv2d_backward", input, kernel, pad);
    require_same("conv2d_backward", grad_output.shape(),
                 Shape4{input.n(), kernel.out(), g.out_h, g.out_w});

    ConvGrads grads{std::nullopt, KernelTensor(kernel.shape()), std::vector<float>(kernel.out())};
    if (want_input_grad) grads.input.emplace(input.shape());

    const auto rows = static_cast<Eigen::Index>(g.rows());
    const auto cols_n = static_cast<Eigen::Index>(g.cols());
    const auto outs = static_cast<Eigen::Index>(kernel.out());

    std::vector<float> col(g.rows() * g.cols());
    std::vector<float> grad_col(want_input_grad ? g.rows() * g.cols() : 0);
    ConstMapMat weights(kernel.data().data(), outs, rows);
    ConstMapMat cols(col.data(), rows, cols_n);
    MapMat grad_w(grads.kernel.data().data(), outs, rows);

    for (std::size_t s = 0; s < input.n(); ++s) {
        ConstMapMat go(grad_output.sample(s).data(), outs, cols_n);
        im2col(input.sample(s).data(), g, col.data());
        grad_w.noalias() += go * cols.transpose();
        for (std::size_t o = 0; o < kernel.out(); ++o) {
            double acc = 0.0;
            const float* row = go.row(static_cast<Eigen::Index>(o)).data();
            for (std::size_t p = 0; p < g.cols(); ++p) acc += row[p];
            grads.bias[o] += static_cast<float>(acc);
        }
        if (want_input_grad) {
            MapMat gc(grad_col.data(), rows, cols_n);
            gc.noalias() = weights.transpose() * go;
            col2im_add(grad_col.data(), g, grads.input->sample(s).data());
        }
    }
    return grads;
}

Tensor4 relu_forward(const Tensor4& input) {
    Tensor4 out = input;
    relu_inplace(out);
    return out;
}

void relu_inplace(Tensor4& t) noexcept {
    for (float& v : t.data()) v = v > 0.0f ? v : 0.0f;
}

Tensor4 relu_backward(const Tensor4& input, const Tensor4& grad_output) {
    require_same("relu_backward", input.shape(), grad_output.shape());
    Tensor4 grad = grad_output;
    auto in = input.data();
    auto g = grad.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!(in[i] > 0.0f)) g[i] = 0.0f;
    }
    return grad;
}

LossResult mse_loss(const Tensor4& pred, const Tensor4& target) {
    require_same("mse_loss", pred.shape(), target.shape());
    LossResult r{0.0, Tensor4(pred.shape())};
    auto p = pred.data();
    auto t = target.data();
    auto g = r.grad.data();
    const double count = static_cast<double>(p.size());
    const double scale = 2.0 / count;
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
        acc += d * d;
        g[i] = static_cast<float>(scale * d);
    }
    r.loss = acc / count;
    return r;
}

void sgd_step(KernelTensor& weights, std::span<float> bias, const KernelTensor& grad_weights,
              std::span<const float> grad_bias, float lr) {
    if (!(lr >= 0.0f) || !std::isfinite(lr)) {
        throw Error(ErrorCode::invalid_argument, "sgd_step: learning rate must be finite and >= 0");
    }
    if (!(weights.shape() == grad_weights.shape())) {
        throw Error(ErrorCode::dimension_mismatch,
                    "sgd_step: weight shape " + weights.shape().to_string() +
                        " does not match gradient shape " + grad_weights.shape().to_string());
    }
    if (bias.size() != grad_bias.size()) {
        throw DimensionError("sgd_step", "bias length", bias.size(), "bias gradient length",
                             grad_bias.size());
    }
    auto w = weights.data();
    auto gw = grad_weights.data();
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * gw[i];
    for (std::size_t i = 0; i < bias.size(); ++i) bias[i] -= lr * grad_bias[i];
}

KernelTensor gaussian_init(KernelShape shape, float sigma, Rng& rng) {
    if (!(sigma > 0.0f)) {
        throw Error(ErrorCode::invalid_argument, "gaussian_init: sigma must be > 0");
    }
    KernelTensor k(shape);
    for (float& v : k.data()) v = static_cast<float>(sigma * rng.normal());
    return k;
}

}  // namespace ctsr
