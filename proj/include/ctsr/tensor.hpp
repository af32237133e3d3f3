#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ctsr {

// (batch, channels, height, width); row-major with width fastest.
struct Shape4 {
    std::size_t n = 1;
    std::size_t c = 1;
    std::size_t h = 1;
    std::size_t w = 1;

    std::size_t size() const noexcept { return n * c * h * w; }
    std::size_t plane() const noexcept { return h * w; }
    std::string to_string() const;

    friend bool operator==(const Shape4&, const Shape4&) = default;
};

class Tensor4 {
public:
    Tensor4() : Tensor4(Shape4{}) {}
    explicit Tensor4(Shape4 shape, float fill = 0.0f);
    Tensor4(Shape4 shape, std::vector<float> values);

    const Shape4& shape() const noexcept { return shape_; }
    std::size_t n() const noexcept { return shape_.n; }
    std::size_t c() const noexcept { return shape_.c; }
    std::size_t h() const noexcept { return shape_.h; }
    std::size_t w() const noexcept { return shape_.w; }
    std::size_t size() const noexcept { return data_.size(); }

    float& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept {
        return data_[((n * shape_.c + c) * shape_.h + y) * shape_.w + x];
    }
    float at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return data_[((n * shape_.c + c) * shape_.h + y) * shape_.w + x];
    }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    // All channels of one batch entry.
    std::span<float> sample(std::size_t n) noexcept;
    std::span<const float> sample(std::size_t n) const noexcept;

    std::span<float> plane(std::size_t n, std::size_t c) noexcept;
    std::span<const float> plane(std::size_t n, std::size_t c) const noexcept;

    void fill(float v) noexcept;

    friend bool operator==(const Tensor4&, const Tensor4&) = default;

private:
    Shape4 shape_;
    std::vector<float> data_;
};

// (out_filters, in_channels, k, k); square kernels only.
struct KernelShape {
    std::size_t out = 1;
    std::size_t in = 1;
    std::size_t k = 1;

    std::size_t size() const noexcept { return out * in * k * k; }
    std::size_t filter_size() const noexcept { return in * k * k; }
    std::string to_string() const;

    friend bool operator==(const KernelShape&, const KernelShape&) = default;
};

class KernelTensor {
public:
    KernelTensor() : KernelTensor(KernelShape{}) {}
    explicit KernelTensor(KernelShape shape, float fill = 0.0f);
    KernelTensor(KernelShape shape, std::vector<float> values);

    const KernelShape& shape() const noexcept { return shape_; }
    std::size_t out() const noexcept { return shape_.out; }
    std::size_t in() const noexcept { return shape_.in; }
    std::size_t k() const noexcept { return shape_.k; }
    std::size_t size() const noexcept { return data_.size(); }

    float& at(std::size_t o, std::size_t i, std::size_t y, std::size_t x) noexcept {
        return data_[((o * shape_.in + i) * shape_.k + y) * shape_.k + x];
    }
    float at(std::size_t o, std::size_t i, std::size_t y, std::size_t x) const noexcept {
        return data_[((o * shape_.in + i) * shape_.k + y) * shape_.k + x];
    }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    // The (in, k, k) slab of output filter o.
    std::span<float> filter(std::size_t o) noexcept;
    std::span<const float> filter(std::size_t o) const noexcept;

    friend bool operator==(const KernelTensor&, const KernelTensor&) = default;

private:
    KernelShape shape_;
    std::vector<float> data_;
};

}  // namespace ctsr
