#pragma once

#include "ctsr/tensor.hpp"

namespace ctsr {

struct PsnrResult {
    double db = 0.0;
    bool infinite = false;  // the images are identical
};

// 10 log10(1 / MSE) with unit peak.
PsnrResult psnr(const Tensor4& a, const Tensor4& b);

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

// Mean SSIM over all fully covered 11x11 Gaussian (sigma 1.5) windows,
// averaged across planes. Planes smaller than 11 pixels use the largest odd
// window that fits.
double ssim(const Tensor4& a, const Tensor4& b);

}  // namespace ctsr
