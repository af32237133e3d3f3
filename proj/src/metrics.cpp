#include "ctsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ctsr/error.hpp"

namespace ctsr {

namespace {

void require_same_shape(const char* context, const Tensor4& a, const Tensor4& b) {
    const auto& x = a.shape();
    const auto& y = b.shape();
    if (x.n != y.n) throw DimensionError(context, "n", x.n, "n", y.n);
    if (x.c != y.c) throw DimensionError(context, "channels", x.c, "channels", y.c);
    if (x.h != y.h) throw DimensionError(context, "height", x.h, "height", y.h);
    if (x.w != y.w) throw DimensionError(context, "width", x.w, "width", y.w);
}

std::vector<double> gaussian_taps(int size, double sigma) {
    std::vector<double> taps(static_cast<std::size_t>(size));
    const int r = size / 2;
    double sum = 0.0;
    for (int i = 0; i < size; ++i) {
        const double d = i - r;
        taps[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += taps[static_cast<std::size_t>(i)];
    }
    for (double& t : taps) t /= sum;
    return taps;
}

// 'valid' separable filtering of an h x w plane.
std::vector<double> filter_valid(const std::vector<double>& src, std::size_t h, std::size_t w,
                                 const std::vector<double>& taps) {
    const std::size_t k = taps.size();
    const std::size_t oh = h - k + 1;
    const std::size_t ow = w - k + 1;
    std::vector<double> tmp(h * ow);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) acc += taps[t] * src[y * w + x + t];
            tmp[y * ow + x] = acc;
        }
    std::vector<double> out(oh * ow);
    for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (std::size_t t = 0; t < k; ++t) acc += taps[t] * tmp[(y + t) * ow + x];
            out[y * ow + x] = acc;
        }
    return out;
}

double ssim_plane(std::span<const float> a, std::span<const float> b, std::size_t h,
                  std::size_t w) {
    int window = kSsimWindow;
    const auto fit = static_cast<int>(std::min(h, w));
    if (fit < window) window = fit % 2 == 1 ? fit : fit - 1;
    const auto taps = gaussian_taps(window, kSsimSigma);

    const std::size_t n = h * w;
    std::vector<double> va(n), vb(n), aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        va[i] = a[i];
        vb[i] = b[i];
        aa[i] = va[i] * va[i];
        bb[i] = vb[i] * vb[i];
        ab[i] = va[i] * vb[i];
    }
    const auto mu_a = filter_valid(va, h, w, taps);
    const auto mu_b = filter_valid(vb, h, w, taps);
    const auto s_aa = filter_valid(aa, h, w, taps);
    const auto s_bb = filter_valid(bb, h, w, taps);
    const auto s_ab = filter_valid(ab, h, w, taps);

    double total = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double ma = mu_a[i], mb = mu_b[i];
        const double var_a = s_aa[i] - ma * ma;
        const double var_b = s_bb[i] - mb * mb;
        // the product is formed once so swapping a and b rounds identically
        const double mab = ma * mb;
        const double cov = s_ab[i] - mab;
        total += ((2.0 * mab + kSsimC1) * (2.0 * cov + kSsimC2)) /
                 ((ma * ma + mb * mb + kSsimC1) * (var_a + var_b + kSsimC2));
    }
    return total / static_cast<double>(mu_a.size());
}

}  // namespace

PsnrResult psnr(const Tensor4& a, const Tensor4& b) {
    require_same_shape("psnr", a, b);
    auto x = a.data();
    auto y = b.data();
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
        acc += d * d;
    }
    const double mse = acc / static_cast<double>(x.size());
    if (mse == 0.0) return {std::numeric_limits<double>::infinity(), true};
    return {10.0 * std::log10(1.0 / mse), false};
}

double ssim(const Tensor4& a, const Tensor4& b) {
    require_same_shape("ssim", a, b);
    double total = 0.0;
    std::size_t planes = 0;
    for (std::size_t n = 0; n < a.n(); ++n) {
        for (std::size_t c = 0; c < a.c(); ++c) {
            total += ssim_plane(a.plane(n, c), b.plane(n, c), a.h(), a.w());
            ++planes;
        }
    }
    return total / static_cast<double>(planes);
}

}  // namespace ctsr
