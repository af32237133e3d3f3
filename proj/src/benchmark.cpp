#include "ctsr/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <thread>

#include <json.hpp>

#include "ctsr/error.hpp"
#include "ctsr/image.hpp"
#include "ctsr/metrics.hpp"

namespace ctsr {

Tensor4 infer_image(const NetworkModel& net, const Tensor4& lr_upsampled) {
    return forward(net, lr_upsampled);
}

std::size_t threads_from_env() {
    const char* v = std::getenv("CT_THREADS");
    if (v == nullptr || *v == '\0') return 1;
    char* end = nullptr;
    const unsigned long n = std::strtoul(v, &end, 10);
    if (end == v || *end != '\0' || n == 0) return 1;
    return static_cast<std::size_t>(n);
}

void EvalReport::finalize() {
    double p = 0.0, s = 0.0, t = 0.0;
    std::size_t ok = 0;
    failures = 0;
    for (const auto& img : images) {
        if (!img.ok()) {
            ++failures;
            continue;
        }
        // identical images have no finite PSNR; they are left out of the mean
        if (!img.psnr_infinite) p += img.psnr_db;
        s += img.ssim;
        t += img.seconds;
        ++ok;
    }
    const auto finite = static_cast<std::size_t>(std::count_if(
        images.begin(), images.end(), [](const ImageScore& i) { return i.ok() && !i.psnr_infinite; }));
    mean_psnr_db = finite ? p / static_cast<double>(finite) : 0.0;
    mean_ssim = ok ? s / static_cast<double>(ok) : 0.0;
    mean_seconds = ok ? t / static_cast<double>(ok) : 0.0;
}

void EvalReport::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io, "cannot write report '" + path.string() + "'");
    out << "image,psnr_db,ssim,seconds\n";
    out << std::setprecision(10);
    for (const auto& img : images) {
        out << img.image << ',';
        if (!img.ok()) {
            out << "error,error,error\n";
            continue;
        }
        if (img.psnr_infinite) {
            out << "inf";
        } else {
            out << img.psnr_db;
        }
        out << ',' << img.ssim << ',' << img.seconds << '\n';
    }
}

void EvalReport::write_json(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["net"] = net_id;
    j["scale"] = scale;
    j["count"] = images.size();
    j["failures"] = failures;
    j["mean_psnr_db"] = mean_psnr_db;
    j["mean_ssim"] = mean_ssim;
    j["mean_seconds"] = mean_seconds;
    j["warnings"] = warnings;
    auto& arr = j["images"] = nlohmann::json::array();
    for (const auto& img : images) {
        nlohmann::json e{{"image", img.image}};
        if (img.ok()) {
            e["psnr_db"] = img.psnr_infinite ? nlohmann::json("inf") : nlohmann::json(img.psnr_db);
            e["psnr_infinite"] = img.psnr_infinite;
            e["ssim"] = img.ssim;
            e["seconds"] = img.seconds;
        } else {
            e["error"] = img.error;
        }
        arr.push_back(std::move(e));
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io, "cannot write report '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

namespace {

ImageScore score_image(const NetworkModel* net, const std::filesystem::path& path,
                       std::size_t scale, std::size_t border) {
    ImageScore score;
    score.image = path.string();
    try {
        const Tensor4 truth = crop_to_multiple(load_image(path), scale);
        const Tensor4 lr = degrade(truth, scale);
        Tensor4 prediction;
        if (net != nullptr) {
            const auto t0 = std::chrono::steady_clock::now();
            Tensor4 out = infer_image(*net, lr);
            score.seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            for (float& v : out.data()) v = std::clamp(v, 0.0f, 1.0f);
            // output is centred on the input; trim any remaining margin
            const std::size_t margin = (lr.h() - out.h()) / 2;
            if (margin > border) {
                throw Error(ErrorCode::dimension_mismatch,
                            "network shrinks the image by more than the evaluation border");
            }
            prediction = crop_border(out, border - margin);
        } else {
            prediction = crop_border(lr, border);
        }
        const Tensor4 target = crop_border(truth, border);
        const PsnrResult p = psnr(prediction, target);
        score.psnr_db = p.db;
        score.psnr_infinite = p.infinite;
        score.ssim = ssim(prediction, target);
    } catch (const std::exception& e) {
        score.error = e.what();
    }
    return score;
}

}  // namespace

EvalReport benchmark(const NetworkModel* net, const std::vector<std::filesystem::path>& images,
                     std::size_t scale, const BenchmarkOptions& options) {
    EvalReport report;
    report.net_id = options.net_id.empty() ? (net ? "model" : "bicubic") : options.net_id;
    report.scale = scale;
    report.images.resize(images.size());
    if (images.empty()) {
        report.warnings.push_back("empty test set");
        report.finalize();
        return report;
    }
    const std::size_t workers = std::clamp<std::size_t>(options.threads, 1, images.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i = next++; i < images.size(); i = next++) {
            report.images[i] = score_image(net, images[i], scale, options.border);
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    report.finalize();
    return report;
}

EvalReport benchmark(const NetworkModel* net, const DatasetManifest& manifest,
                     const BenchmarkOptions& options) {
    return benchmark(net, manifest.paths(ImageRole::test), manifest.scale, options);
}

}  // namespace ctsr
