#include "ctsr/network.hpp"

#include <fstream>
#include <string>

#include <json.hpp>

#include "binary_io.hpp"
#include "ctsr/error.hpp"
#include "ctsr/ops.hpp"

namespace ctsr {

namespace {

[[noreturn]] void violation(const std::string& what) {
    throw Error(ErrorCode::invariant_violation, "network: " + what);
}

std::string layer_name(std::size_t i) { return "layer " + std::to_string(i); }

Layer make_layer(LayerSpec spec, Rng& rng) {
    return Layer{spec, gaussian_init(spec.kernel_shape(), kInitSigma, rng),
                 std::vector<float>(spec.out_filters, 0.0f)};
}

}  // namespace

NetworkModel::NetworkModel(std::vector<Layer> layers, std::uint32_t scale,
                           std::vector<StageRecord> history)
    : layers_(std::move(layers)), scale_(scale), history_(std::move(history)) {
    validate();
}

void NetworkModel::validate() const {
    const std::size_t L = layers_.size();
    if (L < 3) violation("depth " + std::to_string(L) + " is below 3");
    for (std::size_t i = 0; i < L; ++i) {
        const LayerSpec& s = layers_[i].spec;
        const std::string name = layer_name(i);
        if (s.kernel_size != 3 && s.kernel_size != 5 && s.kernel_size != 9) {
            violation(name + " kernel size " + std::to_string(s.kernel_size) + " not in {3,5,9}");
        }
        if (s.out_filters == 0 || s.in_channels == 0) violation(name + " has zero channels");
        if (s.pad > 1 || (s.pad == 1 && s.kernel_size != 3)) {
            violation(name + " pad " + std::to_string(s.pad) + " invalid for kernel " +
                      std::to_string(s.kernel_size));
        }
        if (s.activation != Activation::none && s.activation != Activation::rectifier) {
            violation(name + " has an unknown activation");
        }
        if (!(layers_[i].weights.shape() == s.kernel_shape())) {
            violation(name + " weights " + layers_[i].weights.shape().to_string() +
                      " disagree with spec " + s.kernel_shape().to_string());
        }
        if (layers_[i].bias.size() != s.out_filters) violation(name + " bias length mismatch");
        if (i + 1 < L && s.out_filters != layers_[i + 1].spec.in_channels) {
            violation(name + " out_filters " + std::to_string(s.out_filters) +
                      " != next in_channels " + std::to_string(layers_[i + 1].spec.in_channels));
        }
        const std::size_t expected_k = i == 0 ? 9 : (i == 1 || i + 1 == L) ? 5 : 3;
        if (s.kernel_size != expected_k) {
            violation(name + " kernel " + std::to_string(s.kernel_size) +
                      " breaks the 9-5-3-...-3-5 pattern");
        }
    }
    if (layers_.front().spec.in_channels != 1) violation("first layer must take 1 channel");
    if (layers_.back().spec.out_filters != 1) violation("last layer must emit 1 channel");
    if (layers_.back().spec.activation != Activation::none) violation("last layer must be linear");
}

void NetworkModel::append_stage(StageRecord record) {
    if (!history_.empty() && record.depth_after != history_.back().depth_after + 2) {
        throw Error(ErrorCode::invariant_violation,
                    "stage history: depth " + std::to_string(record.depth_after) +
                        " does not follow " + std::to_string(history_.back().depth_after) +
                        " by 2");
    }
    history_.push_back(record);
}

void NetworkModel::set_history(std::vector<StageRecord> history) {
    history_.clear();
    for (const auto& r : history) append_stage(r);
}

std::vector<std::size_t> NetworkModel::filter_counts() const {
    std::vector<std::size_t> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_) out.push_back(l.spec.out_filters);
    return out;
}

std::vector<LayerSpec> NetworkModel::specs() const {
    std::vector<LayerSpec> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_) out.push_back(l.spec);
    return out;
}

NetworkModel build_network(std::size_t depth, std::size_t first_filters,
                           std::size_t mid_filters, Rng& rng) {
    if (depth < 3 || depth % 2 == 0) {
        throw Error(ErrorCode::invalid_argument,
                    "build_network: depth must be odd and >= 3, got " + std::to_string(depth));
    }
    std::vector<Layer> layers;
    layers.reserve(depth);
    layers.push_back(make_layer({9, 1, first_filters, 0, Activation::rectifier}, rng));
    layers.push_back(make_layer({5, first_filters, mid_filters, 0, Activation::rectifier}, rng));
    for (std::size_t i = 3; i < depth; ++i) {
        layers.push_back(make_layer({3, mid_filters, mid_filters, 1, Activation::rectifier}, rng));
    }
    layers.push_back(make_layer({5, mid_filters, 1, 0, Activation::none}, rng));
    return NetworkModel(std::move(layers));
}

NetworkModel build_base_network(Rng& rng) { return build_network(3, 64, 32, rng); }

ForwardTrace forward_trace(const NetworkModel& net, const Tensor4& input) {
    if (input.c() != 1) {
        throw DimensionError("forward", "input channels", input.c(), "network input channels", 1);
    }
    ForwardTrace trace;
    trace.inputs.reserve(net.depth());
    Tensor4 x = input;
    for (std::size_t i = 0; i < net.depth(); ++i) {
        const Layer& l = net.layer(i);
        const std::size_t k = l.spec.kernel_size;
        if (x.h() + 2 * l.spec.pad < k || x.w() + 2 * l.spec.pad < k) {
            throw Error(ErrorCode::dimension_mismatch,
                        "forward: input too small at " + layer_name(i) + " (" +
                            std::to_string(k) + "x" + std::to_string(k) + " kernel, pad " +
                            std::to_string(l.spec.pad) + "): feature map " +
                            std::to_string(x.h()) + "x" + std::to_string(x.w()));
        }
        Tensor4 y = conv2d_forward(x, l.weights, l.bias, l.spec.pad);
        if (l.spec.activation == Activation::rectifier) relu_inplace(y);
        trace.inputs.push_back(std::move(x));
        x = std::move(y);
    }
    trace.output = std::move(x);
    return trace;
}

Tensor4 forward(const NetworkModel& net, const Tensor4& input) {
    if (input.c() != 1) {
        throw DimensionError("forward", "input channels", input.c(), "network input channels", 1);
    }
    Tensor4 x = input;
    for (std::size_t i = 0; i < net.depth(); ++i) {
        const Layer& l = net.layer(i);
        const std::size_t k = l.spec.kernel_size;
        if (x.h() + 2 * l.spec.pad < k || x.w() + 2 * l.spec.pad < k) {
            throw Error(ErrorCode::dimension_mismatch,
                        "forward: input too small at " + layer_name(i) + " (" +
                            std::to_string(k) + "x" + std::to_string(k) + " kernel, pad " +
                            std::to_string(l.spec.pad) + "): feature map " +
                            std::to_string(x.h()) + "x" + std::to_string(x.w()));
        }
        x = conv2d_forward(x, l.weights, l.bias, l.spec.pad);
        if (l.spec.activation == Activation::rectifier) relu_inplace(x);
    }
    return x;
}

std::vector<LayerGrads> backward(const NetworkModel& net, const ForwardTrace& trace,
                                 const Tensor4& grad_output) {
    const std::size_t L = net.depth();
    if (trace.inputs.size() != L) {
        throw DimensionError("backward", "trace length", trace.inputs.size(), "depth", L);
    }
    std::vector<LayerGrads> grads(L);
    Tensor4 g = grad_output;
    for (std::size_t idx = L; idx-- > 0;) {
        const Layer& l = net.layer(idx);
        if (l.spec.activation == Activation::rectifier) {
            // the post-activation output is positive exactly where the
            // pre-activation was, so it serves as the mask
            const Tensor4& post = idx + 1 < L ? trace.inputs[idx + 1] : trace.output;
            g = relu_backward(post, g);
        }
        ConvGrads cg = conv2d_backward(trace.inputs[idx], l.weights, g, l.spec.pad, idx > 0);
        grads[idx] = LayerGrads{std::move(cg.kernel), std::move(cg.bias)};
        if (idx > 0) g = std::move(*cg.input);
    }
    return grads;
}

std::size_t param_count(std::span<const LayerSpec> specs) {
    std::size_t total = 0;
    for (const auto& s : specs) total += s.kernel_size * s.kernel_size * s.in_channels * s.out_filters;
    return total;
}

std::size_t param_count(const NetworkModel& net) {
    const auto specs = net.specs();
    return param_count(std::span<const LayerSpec>(specs));
}

std::size_t output_extent(const NetworkModel& net, std::size_t extent) {
    for (const auto& l : net.layers()) {
        const std::size_t padded = extent + 2 * l.spec.pad;
        if (padded < l.spec.kernel_size) return 0;
        extent = padded - l.spec.kernel_size + 1;
    }
    return extent;
}

std::uint64_t multiply_count(const NetworkModel& net, std::size_t h, std::size_t w) {
    std::uint64_t total = 0;
    for (const auto& l : net.layers()) {
        const auto& s = l.spec;
        if (h + 2 * s.pad < s.kernel_size || w + 2 * s.pad < s.kernel_size) {
            throw Error(ErrorCode::dimension_mismatch, "multiply_count: input too small");
        }
        h = h + 2 * s.pad - s.kernel_size + 1;
        w = w + 2 * s.pad - s.kernel_size + 1;
        total += static_cast<std::uint64_t>(s.in_channels) * s.kernel_size * s.kernel_size *
                 s.out_filters * h * w;
    }
    return total;
}

NetworkModel insert_layers(const NetworkModel& net, Rng& rng, std::size_t how_many) {
    std::vector<Layer> layers(net.layers().begin(), net.layers().end() - 1);
    const std::size_t width = net.layers().back().spec.in_channels;
    for (std::size_t i = 0; i < how_many; ++i) {
        layers.push_back(make_layer({3, width, width, 1, Activation::rectifier}, rng));
    }
    layers.push_back(net.layers().back());
    return NetworkModel(std::move(layers), net.scale(), net.history());
}

std::vector<std::uint8_t> serialize_model(const NetworkModel& net) {
    detail::ByteWriter w;
    w.bytes("CTSR", 4);
    w.u32(kModelFormatVersion);
    w.u32(net.scale());
    w.u32(static_cast<std::uint32_t>(net.depth()));
    for (const auto& l : net.layers()) {
        w.u32(static_cast<std::uint32_t>(l.spec.kernel_size));
        w.u32(static_cast<std::uint32_t>(l.spec.in_channels));
        w.u32(static_cast<std::uint32_t>(l.spec.out_filters));
        w.u32(static_cast<std::uint32_t>(l.spec.pad));
        w.u32(static_cast<std::uint32_t>(l.spec.activation));
        w.f32s(l.weights.data());
        w.f32s(l.bias);
    }
    return w.take();
}

NetworkModel deserialize_model(std::span<const std::uint8_t> bytes) {
    detail::ByteReader r(bytes, "model");
    r.expect_magic("CTSR");
    const std::uint32_t version = r.u32();
    if (version != kModelFormatVersion) {
        throw Error(ErrorCode::version_mismatch,
                    "model: format version " + std::to_string(version) + " unsupported (expected " +
                        std::to_string(kModelFormatVersion) + ")");
    }
    const std::uint32_t scale = r.u32();
    const std::uint32_t count = r.u32();
    // each layer needs at least its 20-byte header
    if (static_cast<std::uint64_t>(count) * 20 > r.remaining()) {
        throw Error(ErrorCode::truncated, "model: truncated payload");
    }
    std::vector<Layer> layers;
    layers.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        LayerSpec s;
        s.kernel_size = r.u32();
        s.in_channels = r.u32();
        s.out_filters = r.u32();
        s.pad = r.u32();
        const std::uint32_t act = r.u32();
        if (act > 1) {
            throw Error(ErrorCode::invariant_violation,
                        "model: layer " + std::to_string(i) + " activation code " +
                            std::to_string(act));
        }
        s.activation = static_cast<Activation>(act);
        if (s.kernel_size == 0 || s.in_channels == 0 || s.out_filters == 0) {
            throw Error(ErrorCode::invariant_violation,
                        "model: layer " + std::to_string(i) + " has a zero dimension");
        }
        const std::uint64_t payload =
            (static_cast<std::uint64_t>(s.kernel_shape().size()) + s.out_filters) * 4;
        if (payload > r.remaining()) throw Error(ErrorCode::truncated, "model: truncated payload");
        Layer l{s, KernelTensor(s.kernel_shape()), std::vector<float>(s.out_filters)};
        r.f32s(l.weights.data());
        r.f32s(l.bias);
        layers.push_back(std::move(l));
    }
    if (!r.at_end()) {
        throw Error(ErrorCode::invariant_violation, "model: trailing bytes after last layer");
    }
    return NetworkModel(std::move(layers), scale);
}

std::filesystem::path sidecar_path(const std::filesystem::path& model_path) {
    auto p = model_path;
    p.replace_extension(".json");
    if (p == model_path) p += ".json";
    return p;
}

void save_model(const NetworkModel& net, const std::filesystem::path& path) {
    const auto bytes = serialize_model(net);
    detail::write_file_bytes(path.string(), bytes);

    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["scale"] = net.scale();
    j["depth"] = net.depth();
    j["param_count"] = param_count(net);
    auto& layers = j["layers"] = nlohmann::json::array();
    for (const auto& l : net.layers()) {
        layers.push_back({{"kernel_size", l.spec.kernel_size},
                          {"in_channels", l.spec.in_channels},
                          {"out_filters", l.spec.out_filters},
                          {"pad", l.spec.pad},
                          {"activation", l.spec.activation == Activation::rectifier ? "rectifier"
                                                                                    : "none"}});
    }
    auto& hist = j["stage_history"] = nlohmann::json::array();
    for (const auto& s : net.history()) {
        hist.push_back({{"depth_after", s.depth_after},
                        {"epochs_run", s.epochs_run},
                        {"final_loss", s.final_loss}});
    }
    std::ofstream out(sidecar_path(path));
    if (!out) throw Error(ErrorCode::io, "cannot write sidecar for '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

NetworkModel load_model(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw Error(ErrorCode::io, "model file '" + path.string() + "' does not exist");
    }
    NetworkModel net = deserialize_model(detail::read_file_bytes(path.string()));
    const auto side = sidecar_path(path);
    if (std::filesystem::exists(side)) {
        std::ifstream in(side);
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::unsupported_format,
                        "model sidecar '" + side.string() + "': " + e.what());
        }
        std::vector<StageRecord> history;
        for (const auto& s : j.value("stage_history", nlohmann::json::array())) {
            history.push_back({s.at("depth_after").get<std::size_t>(),
                               s.at("epochs_run").get<std::size_t>(),
                               s.at("final_loss").get<double>()});
        }
        net.set_history(std::move(history));
    }
    return net;
}

}  // namespace ctsr
