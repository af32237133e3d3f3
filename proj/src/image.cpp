#include "ctsr/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "binary_io.hpp"
#include "ctsr/error.hpp"

namespace ctsr {

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string header_token(const std::vector<std::uint8_t>& bytes, std::size_t& pos,
                         const std::string& path) {
    for (;;) {
        while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
        if (pos < bytes.size() && bytes[pos] == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            continue;
        }
        break;
    }
    std::string tok;
    while (pos < bytes.size() && !std::isspace(bytes[pos]) && bytes[pos] != '#') {
        tok.push_back(static_cast<char>(bytes[pos++]));
    }
    if (tok.empty()) throw Error(ErrorCode::truncated, "'" + path + "': truncated header");
    return tok;
}

std::size_t header_number(const std::vector<std::uint8_t>& bytes, std::size_t& pos,
                          const std::string& path) {
    const std::string tok = header_token(bytes, pos, path);
    if (!std::all_of(tok.begin(), tok.end(), [](char c) { return std::isdigit(c); })) {
        throw Error(ErrorCode::unsupported_format, "'" + path + "': bad header field '" + tok + "'");
    }
    return std::stoul(tok);
}

struct AxisWeights {
    std::vector<std::size_t> offsets;  // per output: start in src/weights
    std::vector<std::size_t> counts;
    std::vector<std::size_t> src;
    std::vector<double> weights;
};

AxisWeights axis_weights(std::size_t in, std::size_t out) {
    AxisWeights aw;
    const double scale = static_cast<double>(out) / static_cast<double>(in);
    const double stretch = scale < 1.0 ? scale : 1.0;
    const double support = 2.0 / stretch;
    for (std::size_t i = 0; i < out; ++i) {
        const double centre = (static_cast<double>(i) + 0.5) / scale - 0.5;
        const auto left = static_cast<std::ptrdiff_t>(std::floor(centre - support));
        const auto right = static_cast<std::ptrdiff_t>(std::ceil(centre + support));
        aw.offsets.push_back(aw.src.size());
        double sum = 0.0;
        std::size_t count = 0;
        for (std::ptrdiff_t j = left; j <= right; ++j) {
            const double wgt = stretch * cubic_kernel(stretch * (centre - static_cast<double>(j)));
            if (wgt == 0.0) continue;
            const auto clamped = static_cast<std::size_t>(
                std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(in) - 1));
            aw.src.push_back(clamped);
            aw.weights.push_back(wgt);
            sum += wgt;
            ++count;
        }
        for (std::size_t t = aw.weights.size() - count; t < aw.weights.size(); ++t) {
            aw.weights[t] /= sum;
        }
        aw.counts.push_back(count);
    }
    return aw;
}

}  // namespace

double cubic_kernel(double x) noexcept {
    constexpr double a = -0.5;
    const double ax = std::fabs(x);
    if (ax <= 1.0) return ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0;
    if (ax < 2.0) return ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a;
    return 0.0;
}

Tensor4 load_image(const std::filesystem::path& path) {
    const std::string name = path.string();
    const auto bytes = detail::read_file_bytes(name);
    if (bytes.size() < 2) throw Error(ErrorCode::truncated, "'" + name + "': truncated header");
    if (bytes[0] != 'P') {
        throw Error(ErrorCode::unsupported_format, "'" + name + "': not a PGM file");
    }
    if (bytes[1] == '3' || bytes[1] == '6') {
        throw Error(ErrorCode::unsupported_format, "'" + name + "': grayscale required");
    }
    if (bytes[1] != '5') {
        throw Error(ErrorCode::unsupported_format,
                    "'" + name + "': only binary PGM (P5) is supported");
    }
    std::size_t pos = 2;
    const std::size_t w = header_number(bytes, pos, name);
    const std::size_t h = header_number(bytes, pos, name);
    const std::size_t maxval = header_number(bytes, pos, name);
    if (w == 0 || h == 0) throw Error(ErrorCode::unsupported_format, "'" + name + "': empty image");
    if (maxval == 0 || maxval > 255) {
        throw Error(ErrorCode::unsupported_format, "'" + name + "': only 8-bit samples supported");
    }
    ++pos;  // single whitespace byte before the raster
    if (bytes.size() < pos || bytes.size() - pos < w * h) {
        throw Error(ErrorCode::truncated, "'" + name + "': truncated raster");
    }
    Tensor4 img(Shape4{1, 1, h, w});
    auto d = img.data();
    const auto denom = static_cast<float>(maxval);
    for (std::size_t i = 0; i < w * h; ++i) d[i] = static_cast<float>(bytes[pos + i]) / denom;
    return img;
}

void save_image(const Tensor4& image, const std::filesystem::path& path) {
    if (image.n() != 1 || image.c() != 1) {
        throw Error(ErrorCode::invalid_argument,
                    "save_image: expected a 1x1xHxW tensor, got " + image.shape().to_string());
    }
    const std::string header =
        "P5\n" + std::to_string(image.w()) + " " + std::to_string(image.h()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    for (float v : image.data()) {
        const float c = std::clamp(v, 0.0f, 1.0f);
        out.push_back(static_cast<std::uint8_t>(std::lround(c * 255.0f)));
    }
    detail::write_file_bytes(path.string(), out);
}

Tensor4 bicubic_resize(const Tensor4& image, std::size_t out_h, std::size_t out_w) {
    if (out_h == 0 || out_w == 0) {
        throw Error(ErrorCode::invalid_argument, "bicubic_resize: output size must be >= 1");
    }
    const AxisWeights horiz = axis_weights(image.w(), out_w);
    const AxisWeights vert = axis_weights(image.h(), out_h);
    Tensor4 out(Shape4{image.n(), image.c(), out_h, out_w});
    std::vector<double> tmp(image.h() * out_w);
    for (std::size_t n = 0; n < image.n(); ++n) {
        for (std::size_t c = 0; c < image.c(); ++c) {
            auto src = image.plane(n, c);
            for (std::size_t y = 0; y < image.h(); ++y) {
                const float* row = src.data() + y * image.w();
                for (std::size_t x = 0; x < out_w; ++x) {
                    double acc = 0.0;
                    const std::size_t o = horiz.offsets[x];
                    for (std::size_t t = 0; t < horiz.counts[x]; ++t) {
                        acc += horiz.weights[o + t] * row[horiz.src[o + t]];
                    }
                    tmp[y * out_w + x] = acc;
                }
            }
            auto dst = out.plane(n, c);
            for (std::size_t y = 0; y < out_h; ++y) {
                const std::size_t o = vert.offsets[y];
                for (std::size_t x = 0; x < out_w; ++x) {
                    double acc = 0.0;
                    for (std::size_t t = 0; t < vert.counts[y]; ++t) {
                        acc += vert.weights[o + t] * tmp[vert.src[o + t] * out_w + x];
                    }
                    dst[y * out_w + x] = static_cast<float>(acc);
                }
            }
        }
    }
    return out;
}

Tensor4 crop_to_multiple(const Tensor4& image, std::size_t scale) {
    if (scale == 0) throw Error(ErrorCode::invalid_argument, "crop_to_multiple: scale is 0");
    const std::size_t h = image.h() - image.h() % scale;
    const std::size_t w = image.w() - image.w() % scale;
    if (h == 0 || w == 0) {
        throw Error(ErrorCode::invalid_argument,
                    "crop_to_multiple: image " + image.shape().to_string() +
                        " smaller than scale " + std::to_string(scale));
    }
    if (h == image.h() && w == image.w()) return image;
    Tensor4 out(Shape4{image.n(), image.c(), h, w});
    for (std::size_t n = 0; n < image.n(); ++n)
        for (std::size_t c = 0; c < image.c(); ++c)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x) out.at(n, c, y, x) = image.at(n, c, y, x);
    return out;
}

Tensor4 crop_border(const Tensor4& image, std::size_t border) {
    if (image.h() <= 2 * border || image.w() <= 2 * border) {
        throw Error(ErrorCode::dimension_mismatch,
                    "crop_border: image " + image.shape().to_string() + " too small for border " +
                        std::to_string(border));
    }
    const std::size_t h = image.h() - 2 * border;
    const std::size_t w = image.w() - 2 * border;
    Tensor4 out(Shape4{image.n(), image.c(), h, w});
    for (std::size_t n = 0; n < image.n(); ++n)
        for (std::size_t c = 0; c < image.c(); ++c)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t x = 0; x < w; ++x)
                    out.at(n, c, y, x) = image.at(n, c, y + border, x + border);
    return out;
}

Tensor4 degrade(const Tensor4& hr, std::size_t scale) {
    const Tensor4 cropped = crop_to_multiple(hr, scale);
    const Tensor4 low = bicubic_resize(cropped, cropped.h() / scale, cropped.w() / scale);
    Tensor4 up = bicubic_resize(low, cropped.h(), cropped.w());
    for (float& v : up.data()) v = std::clamp(v, 0.0f, 1.0f);
    return up;
}

}  // namespace ctsr
