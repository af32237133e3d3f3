#pragma once

// Little-endian encoding helpers shared by the model and patch-cache formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "ctsr/error.hpp"

namespace ctsr::detail {

class ByteWriter {
public:
    void bytes(const char* s, std::size_t n) {
        out_.insert(out_.end(), reinterpret_cast<const std::uint8_t*>(s),
                    reinterpret_cast<const std::uint8_t*>(s) + n);
    }

    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }

    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

    void f32s(std::span<const float> vs) {
        if constexpr (std::endian::native == std::endian::little) {
            const auto* p = reinterpret_cast<const std::uint8_t*>(vs.data());
            out_.insert(out_.end(), p, p + vs.size_bytes());
        } else {
            for (float v : vs) f32(v);
        }
    }

    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    std::vector<std::uint8_t> out_;
};

class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> in, std::string context)
        : in_(in), context_(std::move(context)) {}

    void expect_magic(const char (&magic)[5]) {
        need(4);
        if (std::memcmp(in_.data() + pos_, magic, 4) != 0) {
            throw Error(ErrorCode::bad_magic, context_ + ": bad magic");
        }
        pos_ += 4;
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }

    float f32() { return std::bit_cast<float>(u32()); }

    void f32s(std::span<float> out) {
        need(out.size_bytes());
        if constexpr (std::endian::native == std::endian::little) {
            std::memcpy(out.data(), in_.data() + pos_, out.size_bytes());
            pos_ += out.size_bytes();
        } else {
            for (float& v : out) v = f32();
        }
    }

    bool at_end() const noexcept { return pos_ == in_.size(); }
    std::size_t remaining() const noexcept { return in_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (in_.size() - pos_ < n) {
            throw Error(ErrorCode::truncated, context_ + ": truncated payload");
        }
    }

    std::span<const std::uint8_t> in_;
    std::string context_;
    std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

}  // namespace ctsr::detail
