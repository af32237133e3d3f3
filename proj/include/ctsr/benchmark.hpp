#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "ctsr/network.hpp"
#include "ctsr/patches.hpp"
#include "ctsr/tensor.hpp"

namespace ctsr {

// Whole-image forward pass. The unpadded 9/5/5 layers shrink the result by
// 8 pixels per side relative to the input.
Tensor4 infer_image(const NetworkModel& net, const Tensor4& lr_upsampled);

struct ImageScore {
    std::string image;
    double psnr_db = 0.0;
    bool psnr_infinite = false;
    double ssim = 0.0;
    double seconds = 0.0;
    std::string error;  // non-empty when the image failed

    bool ok() const noexcept { return error.empty(); }
};

struct EvalReport {
    std::string net_id;
    std::size_t scale = 2;
    std::vector<ImageScore> images;
    double mean_psnr_db = 0.0;
    double mean_ssim = 0.0;
    double mean_seconds = 0.0;
    std::size_t failures = 0;
    std::vector<std::string> warnings;

    void finalize();
    void write_csv(const std::filesystem::path& path) const;
    void write_json(const std::filesystem::path& path) const;
};

struct BenchmarkOptions {
    std::size_t border = 8;   // ground-truth crop per side
    std::size_t threads = 1;  // concurrent images
    std::string net_id;
};

// Per test image: crop to the scale, degrade, infer (or keep the bicubic
// upsample when net is null), crop both to the same border, then score.
EvalReport benchmark(const NetworkModel* net, const std::vector<std::filesystem::path>& images,
                     std::size_t scale, const BenchmarkOptions& options = {});

EvalReport benchmark(const NetworkModel* net, const DatasetManifest& manifest,
                     const BenchmarkOptions& options = {});

// Worker count from CT_THREADS, defaulting to 1.
std::size_t threads_from_env();

}  // namespace ctsr
