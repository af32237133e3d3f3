#include "ctsr/patches.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "binary_io.hpp"
#include "ctsr/error.hpp"
#include "ctsr/image.hpp"

namespace ctsr {

namespace {

constexpr std::uint32_t kPatchFormatVersion = 1;

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.contains(key)) {
            throw Error(ErrorCode::invalid_argument, where + ": unknown key '" + key + "'");
        }
    }
}

}  // namespace

void PatchParams::validate() const {
    if (lr_size == 0 || hr_size == 0 || stride == 0) {
        throw Error(ErrorCode::invalid_argument, "patch parameters must be positive");
    }
    if (hr_size > lr_size || (lr_size - hr_size) % 2 != 0) {
        throw Error(ErrorCode::invalid_argument,
                    "patch parameters: hr_size " + std::to_string(hr_size) +
                        " must be centred inside lr_size " + std::to_string(lr_size));
    }
}

std::vector<std::filesystem::path> DatasetManifest::paths(ImageRole role) const {
    std::vector<std::filesystem::path> out;
    for (const auto& e : images) {
        if (e.role == role) out.push_back(e.path);
    }
    return out;
}

void DatasetManifest::validate() const {
    if (scale < 2 || scale > 4) {
        throw Error(ErrorCode::invalid_argument,
                    "manifest: scale must be 2, 3 or 4, got " + std::to_string(scale));
    }
    patch.validate();
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot open manifest '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::unsupported_format,
                    "manifest '" + path.string() + "': " + e.what());
    }
    const std::string where = "manifest '" + path.string() + "'";
    reject_unknown_keys(j, {"scale", "patch", "images"}, where);
    DatasetManifest m;
    try {
        m.scale = j.value("scale", std::size_t{2});
        if (j.contains("patch")) {
            const auto& p = j.at("patch");
            reject_unknown_keys(p, {"lr_size", "stride", "hr_size"}, where + " patch");
            m.patch.lr_size = p.value("lr_size", m.patch.lr_size);
            m.patch.stride = p.value("stride", m.patch.stride);
            m.patch.hr_size = p.value("hr_size", m.patch.hr_size);
        }
        const auto base = path.parent_path();
        for (const auto& e : j.value("images", nlohmann::json::array())) {
            reject_unknown_keys(e, {"path", "role"}, where + " image entry");
            ManifestEntry entry;
            std::filesystem::path p = e.at("path").get<std::string>();
            entry.path = p.is_absolute() ? p : base / p;
            const std::string role = e.value("role", std::string("train"));
            if (role == "train") {
                entry.role = ImageRole::train;
            } else if (role == "test") {
                entry.role = ImageRole::test;
            } else {
                throw Error(ErrorCode::invalid_argument, where + ": unknown role '" + role + "'");
            }
            m.images.push_back(std::move(entry));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::invalid_argument, where + ": " + e.what());
    }
    m.validate();
    return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    nlohmann::json j;
    j["scale"] = m.scale;
    j["patch"] = {{"lr_size", m.patch.lr_size},
                  {"stride", m.patch.stride},
                  {"hr_size", m.patch.hr_size}};
    auto& imgs = j["images"] = nlohmann::json::array();
    for (const auto& e : m.images) {
        imgs.push_back({{"path", e.path.string()},
                        {"role", e.role == ImageRole::train ? "train" : "test"}});
    }
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::io, "cannot write manifest '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

std::span<const float> PatchSet::lr(std::size_t i) const {
    const std::size_t len = params_.lr_size * params_.lr_size;
    return std::span<const float>(lr_).subspan(i * len, len);
}

std::span<const float> PatchSet::hr(std::size_t i) const {
    const std::size_t len = params_.hr_size * params_.hr_size;
    return std::span<const float>(hr_).subspan(i * len, len);
}

void PatchSet::add(std::span<const float> lr, std::span<const float> hr, PatchSource source) {
    if (lr.size() != params_.lr_size * params_.lr_size) {
        throw DimensionError("PatchSet::add", "lr patch length", lr.size(), "lr_size^2",
                             params_.lr_size * params_.lr_size);
    }
    if (hr.size() != params_.hr_size * params_.hr_size) {
        throw DimensionError("PatchSet::add", "hr patch length", hr.size(), "hr_size^2",
                             params_.hr_size * params_.hr_size);
    }
    lr_.insert(lr_.end(), lr.begin(), lr.end());
    hr_.insert(hr_.end(), hr.begin(), hr.end());
    sources_.push_back(std::move(source));
}

void PatchSet::append(const PatchSet& other) {
    if (!(other.params_ == params_)) {
        throw Error(ErrorCode::dimension_mismatch, "PatchSet::append: patch parameters differ");
    }
    lr_.insert(lr_.end(), other.lr_.begin(), other.lr_.end());
    hr_.insert(hr_.end(), other.hr_.begin(), other.hr_.end());
    sources_.insert(sources_.end(), other.sources_.begin(), other.sources_.end());
}

Tensor4 PatchSet::lr_batch(std::span<const std::size_t> indices) const {
    Tensor4 t(Shape4{indices.size(), 1, params_.lr_size, params_.lr_size});
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const auto src = lr(indices[b]);
        std::copy(src.begin(), src.end(), t.sample(b).begin());
    }
    return t;
}

Tensor4 PatchSet::hr_batch(std::span<const std::size_t> indices) const {
    Tensor4 t(Shape4{indices.size(), 1, params_.hr_size, params_.hr_size});
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const auto src = hr(indices[b]);
        std::copy(src.begin(), src.end(), t.sample(b).begin());
    }
    return t;
}

PatchSet PatchSet::subset(std::span<const std::size_t> indices) const {
    PatchSet out(params_);
    for (std::size_t i : indices) out.add(lr(i), hr(i), sources_.at(i));
    return out;
}

PatchSet extract_patches(const Tensor4& hr_image, std::size_t scale, const PatchParams& params,
                         const std::string& name) {
    params.validate();
    PatchSet set(params);
    if (hr_image.h() < scale || hr_image.w() < scale) return set;
    const Tensor4 truth = crop_to_multiple(hr_image, scale);
    if (truth.h() < params.lr_size || truth.w() < params.lr_size) return set;
    const Tensor4 lr_image = degrade(truth, scale);
    const std::size_t L = params.lr_size;
    const std::size_t H = params.hr_size;
    const std::size_t off = params.offset();
    std::vector<float> lr(L * L);
    std::vector<float> hr(H * H);
    for (std::size_t y = 0; y + L <= truth.h(); y += params.stride) {
        for (std::size_t x = 0; x + L <= truth.w(); x += params.stride) {
            for (std::size_t r = 0; r < L; ++r)
                for (std::size_t c = 0; c < L; ++c) lr[r * L + c] = lr_image.at(0, 0, y + r, x + c);
            for (std::size_t r = 0; r < H; ++r)
                for (std::size_t c = 0; c < H; ++c)
                    hr[r * H + c] = truth.at(0, 0, y + off + r, x + off + c);
            set.add(lr, hr, PatchSource{name, y, x});
        }
    }
    return set;
}

PatchBuildReport build_patch_set(const DatasetManifest& manifest) {
    PatchBuildReport report{PatchSet(manifest.patch), {}};
    for (const auto& path : manifest.paths(ImageRole::train)) {
        const Tensor4 img = load_image(path);
        PatchSet part = extract_patches(img, manifest.scale, manifest.patch, path.string());
        if (part.empty()) {
            report.warnings.push_back("skipped '" + path.string() + "': smaller than " +
                                      std::to_string(manifest.patch.lr_size) + "x" +
                                      std::to_string(manifest.patch.lr_size) +
                                      " after cropping");
            continue;
        }
        report.patches.append(part);
    }
    return report;
}

std::vector<std::uint8_t> serialize_patches(const PatchSet& set) {
    detail::ByteWriter w;
    w.bytes("CTPD", 4);
    w.u32(kPatchFormatVersion);
    w.u32(static_cast<std::uint32_t>(set.size()));
    for (std::size_t s : {std::size_t{1}, set.params().lr_size, set.params().lr_size})
        w.u32(static_cast<std::uint32_t>(s));
    for (std::size_t s : {std::size_t{1}, set.params().hr_size, set.params().hr_size})
        w.u32(static_cast<std::uint32_t>(s));
    w.f32s(set.lr_data());
    w.f32s(set.hr_data());
    return w.take();
}

PatchSet deserialize_patches(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes, "patch cache");
    r.expect_magic("CTPD");
    const std::uint32_t version = r.u32();
    if (version != kPatchFormatVersion) {
        throw Error(ErrorCode::version_mismatch,
                    "patch cache: format version " + std::to_string(version) + " unsupported");
    }
    const std::uint32_t n = r.u32();
    std::uint32_t lr_dims[3], hr_dims[3];
    for (auto& d : lr_dims) d = r.u32();
    for (auto& d : hr_dims) d = r.u32();
    if (lr_dims[0] != 1 || hr_dims[0] != 1 || lr_dims[1] != lr_dims[2] ||
        hr_dims[1] != hr_dims[2]) {
        throw Error(ErrorCode::unsupported_format, "patch cache: expected square 1-channel patches");
    }
    PatchParams params;
    params.lr_size = lr_dims[1];
    params.hr_size = hr_dims[1];
    params.stride = params.lr_size;
    params.validate();
    const std::uint64_t lr_len = static_cast<std::uint64_t>(params.lr_size) * params.lr_size;
    const std::uint64_t hr_len = static_cast<std::uint64_t>(params.hr_size) * params.hr_size;
    if (static_cast<std::uint64_t>(n) * (lr_len + hr_len) * 4 != r.remaining()) {
        throw Error(ErrorCode::truncated, "patch cache: payload length does not match header");
    }
    std::vector<float> lr(n * lr_len), hr(n * hr_len);
    r.f32s(lr);
    r.f32s(hr);
    PatchSet set(params);
    for (std::uint32_t i = 0; i < n; ++i) {
        set.add(std::span<const float>(lr).subspan(i * lr_len, lr_len),
                std::span<const float>(hr).subspan(i * hr_len, hr_len), PatchSource{"cache", 0, 0});
    }
    return set;
}

void save_patches(const PatchSet& set, const std::filesystem::path& path) {
    detail::write_file_bytes(path.string(), serialize_patches(set));
}

PatchSet load_patches(const std::filesystem::path& path) {
    return deserialize_patches(detail::read_file_bytes(path.string()));
}

}  // namespace ctsr
