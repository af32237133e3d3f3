#pragma once

#include <cstddef>
#include <filesystem>

#include "ctsr/tensor.hpp"

namespace ctsr {

// 8-bit binary PGM (P5) as a 1x1xHxW tensor in [0, 1].
Tensor4 load_image(const std::filesystem::path& path);
// Values are clamped to [0, 1] and rounded to the nearest 8-bit level.
void save_image(const Tensor4& image, const std::filesystem::path& path);

// Separable cubic convolution (a = -0.5) with pixel-centre alignment and
// edge-clamped borders. When shrinking, the kernel is stretched by the
// inverse scale so it acts as a low-pass filter. Every output site's
// weights are normalised to sum to one.
Tensor4 bicubic_resize(const Tensor4& image, std::size_t out_h, std::size_t out_w);

// Keys cubic kernel with a = -0.5.
double cubic_kernel(double x) noexcept;

// Crops H and W down to multiples of scale (top-left anchored).
Tensor4 crop_to_multiple(const Tensor4& image, std::size_t scale);

// Crops `border` pixels from every side.
Tensor4 crop_border(const Tensor4& image, std::size_t border);

// Bicubic down by `scale`, then back up to the (cropped) input size,
// clamped to [0, 1]. The input is cropped to multiples of scale first.
Tensor4 degrade(const Tensor4& hr, std::size_t scale);

}  // namespace ctsr
