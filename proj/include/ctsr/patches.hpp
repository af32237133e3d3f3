#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ctsr/tensor.hpp"

namespace ctsr {

struct PatchParams {
    std::size_t lr_size = 33;
    std::size_t stride = 33;
    std::size_t hr_size = 17;

    std::size_t offset() const noexcept { return (lr_size - hr_size) / 2; }
    void validate() const;

    friend bool operator==(const PatchParams&, const PatchParams&) = default;
};

enum class ImageRole { train, test };

struct ManifestEntry {
    std::filesystem::path path;
    ImageRole role = ImageRole::train;
};

struct DatasetManifest {
    std::vector<ManifestEntry> images;
    std::size_t scale = 2;
    PatchParams patch;

    std::vector<std::filesystem::path> paths(ImageRole role) const;
    void validate() const;
};

// Reads a JSON manifest. Relative image paths resolve against the manifest's
// directory; unknown keys are rejected.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

struct PatchSource {
    std::string image;
    std::size_t y = 0;
    std::size_t x = 0;
};

// Paired single-channel LR inputs and HR targets, stored contiguously.
class PatchSet {
public:
    explicit PatchSet(PatchParams params = {}) : params_(params) {}

    const PatchParams& params() const noexcept { return params_; }
    std::size_t size() const noexcept { return sources_.size(); }
    bool empty() const noexcept { return sources_.empty(); }

    std::span<const float> lr(std::size_t i) const;
    std::span<const float> hr(std::size_t i) const;
    const PatchSource& source(std::size_t i) const { return sources_.at(i); }

    void add(std::span<const float> lr, std::span<const float> hr, PatchSource source);
    void append(const PatchSet& other);

    // Gathers the listed patches into N x 1 x size x size tensors.
    Tensor4 lr_batch(std::span<const std::size_t> indices) const;
    Tensor4 hr_batch(std::span<const std::size_t> indices) const;

    PatchSet subset(std::span<const std::size_t> indices) const;

    std::span<const float> lr_data() const noexcept { return lr_; }
    std::span<const float> hr_data() const noexcept { return hr_; }

    friend bool operator==(const PatchSet& a, const PatchSet& b) {
        return a.params_ == b.params_ && a.lr_ == b.lr_ && a.hr_ == b.hr_;
    }

private:
    PatchParams params_;
    std::vector<float> lr_;
    std::vector<float> hr_;
    std::vector<PatchSource> sources_;
};

// Cuts aligned (LR, HR) pairs from one image: LR windows on a stride grid
// over degrade(hr), each paired with the centred hr_size window of the
// ground truth. Returns an empty set when the image is smaller than one
// LR window after cropping to a multiple of the scale.
PatchSet extract_patches(const Tensor4& hr_image, std::size_t scale, const PatchParams& params,
                         const std::string& name = {});

struct PatchBuildReport {
    PatchSet patches;
    std::vector<std::string> warnings;
};

// Patches from every training image in manifest order.
PatchBuildReport build_patch_set(const DatasetManifest& manifest);

std::vector<std::uint8_t> serialize_patches(const PatchSet& set);
PatchSet deserialize_patches(std::span<const std::uint8_t> bytes);
void save_patches(const PatchSet& set, const std::filesystem::path& path);
PatchSet load_patches(const std::filesystem::path& path);

}  // namespace ctsr
