#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "ctsr/network.hpp"
#include "ctsr/patches.hpp"
#include "ctsr/rng.hpp"
#include "ctsr/tensor.hpp"

namespace testutil {

inline ctsr::Tensor4 random_tensor(ctsr::Shape4 shape, ctsr::Rng& rng, double lo = -1.0,
                                   double hi = 1.0) {
    ctsr::Tensor4 t(shape);
    for (float& v : t.data()) v = static_cast<float>(lo + (hi - lo) * rng.uniform());
    return t;
}

inline ctsr::KernelTensor random_kernel(ctsr::KernelShape shape, ctsr::Rng& rng,
                                        double scale = 1.0) {
    ctsr::KernelTensor k(shape);
    for (float& v : k.data()) v = static_cast<float>(scale * (2.0 * rng.uniform() - 1.0));
    return k;
}

inline std::vector<float> random_vector(std::size_t n, ctsr::Rng& rng, double scale = 1.0) {
    std::vector<float> v(n);
    for (float& x : v) x = static_cast<float>(scale * (2.0 * rng.uniform() - 1.0));
    return v;
}

// Naive reference: direct six-deep loop in double precision.
inline ctsr::Tensor4 naive_conv(const ctsr::Tensor4& in, const ctsr::KernelTensor& k,
                                const std::vector<float>& bias, std::size_t pad) {
    const std::size_t oh = in.h() + 2 * pad - k.k() + 1;
    const std::size_t ow = in.w() + 2 * pad - k.k() + 1;
    ctsr::Tensor4 out(ctsr::Shape4{in.n(), k.out(), oh, ow});
    for (std::size_t n = 0; n < in.n(); ++n)
        for (std::size_t o = 0; o < k.out(); ++o)
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t x = 0; x < ow; ++x) {
                    double acc = bias[o];
                    for (std::size_t c = 0; c < k.in(); ++c)
                        for (std::size_t ky = 0; ky < k.k(); ++ky)
                            for (std::size_t kx = 0; kx < k.k(); ++kx) {
                                const long iy = long(y + ky) - long(pad);
                                const long ix = long(x + kx) - long(pad);
                                if (iy < 0 || ix < 0 || iy >= long(in.h()) || ix >= long(in.w()))
                                    continue;
                                acc += double(in.at(n, c, iy, ix)) * k.at(o, c, ky, kx);
                            }
                    out.at(n, o, y, x) = static_cast<float>(acc);
                }
    return out;
}

inline double max_abs_diff(std::span<const float> a, std::span<const float> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - b[i]));
    return m;
}

// ||a - b|| / max(||a||, ||b||, tiny)
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double den = std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
    return std::sqrt(num) / den;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("ctsr_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t u32_at(const std::vector<std::uint8_t>& b, std::size_t off) {
    return std::uint32_t(b[off]) | std::uint32_t(b[off + 1]) << 8 |
           std::uint32_t(b[off + 2]) << 16 | std::uint32_t(b[off + 3]) << 24;
}

inline std::filesystem::path corpus_dir() { return std::filesystem::path(CTSR_CORPUS_DIR); }

// Synthetic smooth-ish image with texture, values inside [0, 1].
inline ctsr::Tensor4 synthetic_image(std::size_t h, std::size_t w, std::uint64_t seed) {
    ctsr::Rng rng(seed);
    const double fx = 0.05 + 0.3 * rng.uniform(), fy = 0.05 + 0.3 * rng.uniform();
    const double px = 6.28 * rng.uniform(), py = 6.28 * rng.uniform();
    ctsr::Tensor4 t(ctsr::Shape4{1, 1, h, w});
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            double v = 0.5 + 0.25 * std::sin(fx * x + px) * std::cos(fy * y + py) +
                       0.1 * (rng.uniform() - 0.5);
            t.at(0, 0, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    return t;
}

}  // namespace testutil
