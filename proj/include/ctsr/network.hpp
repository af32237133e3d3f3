#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ctsr/rng.hpp"
#include "ctsr/tensor.hpp"

namespace ctsr {

enum class Activation : std::uint32_t { none = 0, rectifier = 1 };

struct LayerSpec {
    std::size_t kernel_size = 3;
    std::size_t in_channels = 1;
    std::size_t out_filters = 1;
    std::size_t pad = 0;
    Activation activation = Activation::rectifier;

    KernelShape kernel_shape() const { return {out_filters, in_channels, kernel_size}; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct Layer {
    LayerSpec spec;
    KernelTensor weights;
    std::vector<float> bias;

    friend bool operator==(const Layer&, const Layer&) = default;
};

// One cascade stage: depth reached, epochs trained at that depth, last epoch loss.
struct StageRecord {
    std::size_t depth_after = 0;
    std::size_t epochs_run = 0;
    double final_loss = 0.0;

    friend bool operator==(const StageRecord&, const StageRecord&) = default;
};

inline constexpr float kInitSigma = 0.001f;
inline constexpr std::uint32_t kModelFormatVersion = 1;

// A member of the 9-5-3-...-3-5 family. The constructor checks every
// structural invariant (chain, kernel pattern, padding, single-channel ends)
// and throws Error{invariant_violation} on failure.
class NetworkModel {
public:
    explicit NetworkModel(std::vector<Layer> layers, std::uint32_t scale = 2,
                          std::vector<StageRecord> history = {});

    const std::vector<Layer>& layers() const noexcept { return layers_; }
    const Layer& layer(std::size_t i) const { return layers_.at(i); }
    std::size_t depth() const noexcept { return layers_.size(); }

    // Weight and bias access for training; shapes must not be changed.
    KernelTensor& weights(std::size_t i) { return layers_.at(i).weights; }
    std::vector<float>& bias(std::size_t i) { return layers_.at(i).bias; }

    std::uint32_t scale() const noexcept { return scale_; }
    void set_scale(std::uint32_t s) noexcept { scale_ = s; }

    const std::vector<StageRecord>& history() const noexcept { return history_; }
    void append_stage(StageRecord record);
    void set_history(std::vector<StageRecord> history);

    std::vector<std::size_t> filter_counts() const;
    std::vector<LayerSpec> specs() const;

    void validate() const;

    friend bool operator==(const NetworkModel&, const NetworkModel&) = default;

private:
    std::vector<Layer> layers_;
    std::uint32_t scale_;
    std::vector<StageRecord> history_;
};

// depth >= 3, odd. Kernels 9, 5, 3 x (depth - 3), 5; filters first_filters,
// then mid_filters everywhere except the single-filter output layer.
NetworkModel build_network(std::size_t depth, std::size_t first_filters,
                           std::size_t mid_filters, Rng& rng);

// 3 layers, 64 9x9 / 32 5x5 / 1 5x5 filters, unpadded.
NetworkModel build_base_network(Rng& rng);

Tensor4 forward(const NetworkModel& net, const Tensor4& input);

// Layer inputs retained for backpropagation: inputs[i] feeds layer i.
struct ForwardTrace {
    std::vector<Tensor4> inputs;
    Tensor4 output;
};

ForwardTrace forward_trace(const NetworkModel& net, const Tensor4& input);

struct LayerGrads {
    KernelTensor weights;
    std::vector<float> bias;
};

std::vector<LayerGrads> backward(const NetworkModel& net, const ForwardTrace& trace,
                                 const Tensor4& grad_output);

// Weights only, biases excluded.
std::size_t param_count(const NetworkModel& net);
std::size_t param_count(std::span<const LayerSpec> specs);

// Multiplications for one forward pass over an h x w single-image input.
std::uint64_t multiply_count(const NetworkModel& net, std::size_t h, std::size_t w);

// Output spatial size for an input of size h x w, or 0 if a layer would
// produce a non-positive size.
std::size_t output_extent(const NetworkModel& net, std::size_t extent);

// New 3x3, pad-1, rectifier layers placed just before the final 5x5 layer.
// Their width equals the final layer's current input width so every
// pre-existing layer is carried over unchanged.
NetworkModel insert_layers(const NetworkModel& net, Rng& rng, std::size_t how_many = 2);

std::vector<std::uint8_t> serialize_model(const NetworkModel& net);
NetworkModel deserialize_model(std::span<const std::uint8_t> bytes);

// Writes the binary model and a ".json" sidecar with the same stem.
void save_model(const NetworkModel& net, const std::filesystem::path& path);
// Reads the binary model; stage history is taken from the sidecar when present.
NetworkModel load_model(const std::filesystem::path& path);

std::filesystem::path sidecar_path(const std::filesystem::path& model_path);

}  // namespace ctsr
