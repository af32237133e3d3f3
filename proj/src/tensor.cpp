#include "ctsr/tensor.hpp"

#include <algorithm>

#include "ctsr/error.hpp"

namespace ctsr {

namespace {

void require_positive(const char* what, std::size_t v) {
    if (v == 0) {
        throw Error(ErrorCode::invalid_argument, std::string(what) + " must be >= 1");
    }
}

}  // namespace

std::string Shape4::to_string() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
}

Tensor4::Tensor4(Shape4 shape, float fill) : shape_(shape) {
    require_positive("tensor n", shape.n);
    require_positive("tensor c", shape.c);
    require_positive("tensor h", shape.h);
    require_positive("tensor w", shape.w);
    data_.assign(shape.size(), fill);
}

Tensor4::Tensor4(Shape4 shape, std::vector<float> values) : Tensor4(shape) {
    if (values.size() != shape.size()) {
        throw DimensionError("Tensor4", "value count", values.size(), "shape size", shape.size());
    }
    data_ = std::move(values);
}

std::span<float> Tensor4::sample(std::size_t n) noexcept {
    const std::size_t len = shape_.c * shape_.plane();
    return std::span<float>(data_).subspan(n * len, len);
}

std::span<const float> Tensor4::sample(std::size_t n) const noexcept {
    const std::size_t len = shape_.c * shape_.plane();
    return std::span<const float>(data_).subspan(n * len, len);
}

std::span<float> Tensor4::plane(std::size_t n, std::size_t c) noexcept {
    return std::span<float>(data_).subspan((n * shape_.c + c) * shape_.plane(), shape_.plane());
}

std::span<const float> Tensor4::plane(std::size_t n, std::size_t c) const noexcept {
    return std::span<const float>(data_).subspan((n * shape_.c + c) * shape_.plane(),
                                                 shape_.plane());
}

void Tensor4::fill(float v) noexcept { std::fill(data_.begin(), data_.end(), v); }

std::string KernelShape::to_string() const {
    return std::to_string(out) + "x" + std::to_string(in) + "x" + std::to_string(k) + "x" +
           std::to_string(k);
}

KernelTensor::KernelTensor(KernelShape shape, float fill) : shape_(shape) {
    require_positive("kernel out", shape.out);
    require_positive("kernel in", shape.in);
    require_positive("kernel size", shape.k);
    data_.assign(shape.size(), fill);
}

KernelTensor::KernelTensor(KernelShape shape, std::vector<float> values) : KernelTensor(shape) {
    if (values.size() != shape.size()) {
        throw DimensionError("KernelTensor", "value count", values.size(), "shape size",
                             shape.size());
    }
    data_ = std::move(values);
}

std::span<float> KernelTensor::filter(std::size_t o) noexcept {
    return std::span<float>(data_).subspan(o * shape_.filter_size(), shape_.filter_size());
}

std::span<const float> KernelTensor::filter(std::size_t o) const noexcept {
    return std::span<const float>(data_).subspan(o * shape_.filter_size(), shape_.filter_size());
}

}  // namespace ctsr
