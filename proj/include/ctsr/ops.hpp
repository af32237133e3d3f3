#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ctsr/rng.hpp"
#include "ctsr/tensor.hpp"

namespace ctsr {

// Stride-one cross-correlation with symmetric zero padding.
// Output spatial size is h + 2*pad - k + 1.
Tensor4 conv2d_forward(const Tensor4& input, const KernelTensor& kernel,
                       std::span<const float> bias, std::size_t pad);

struct ConvGrads {
    std::optional<Tensor4> input;  // absent when not requested
    KernelTensor kernel;
    std::vector<float> bias;
};

ConvGrads conv2d_backward(const Tensor4& input, const KernelTensor& kernel,
                          const Tensor4& grad_output, std::size_t pad,
                          bool want_input_grad = true);

Tensor4 relu_forward(const Tensor4& input);
void relu_inplace(Tensor4& t) noexcept;
Tensor4 relu_backward(const Tensor4& input, const Tensor4& grad_output);

struct LossResult {
    double loss = 0.0;
    Tensor4 grad;
};

// Per-element mean of squared differences, and its exact gradient
// 2 (pred - target) / size.
LossResult mse_loss(const Tensor4& pred, const Tensor4& target);

// p <- p - lr * g for the kernel and the bias vector.
void sgd_step(KernelTensor& weights, std::span<float> bias, const KernelTensor& grad_weights,
              std::span<const float> grad_bias, float lr);

KernelTensor gaussian_init(KernelShape shape, float sigma, Rng& rng);

}  // namespace ctsr
