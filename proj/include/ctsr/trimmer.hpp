#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ctsr/network.hpp"
#include "ctsr/patches.hpp"
#include "ctsr/trainer.hpp"

namespace ctsr {

enum class TrimMode { one_shot_independent, one_shot_greedy, cascade };

struct TrimPlan {
    std::vector<double> rates;  // per layer, fraction of filters removed
    TrimMode mode = TrimMode::cascade;
    std::size_t layers_per_stage = 2;
    std::uint64_t seed = 0;

    // Same rate on every layer except the final one, which stays at 0.
    static TrimPlan uniform(std::size_t depth, double rate, TrimMode mode, std::uint64_t seed = 0);

    void validate(const NetworkModel& net) const;
};

struct TrimStageLog {
    std::size_t stage = 0;
    std::vector<std::size_t> layers;                 // trimmed layer indices (0-based)
    std::vector<std::vector<std::size_t>> removed;   // removed filters per trimmed layer
    std::size_t param_count = 0;
    std::vector<double> finetune_losses;
};

// Sum of squared weights of one filter.
double filter_importance(std::span<const float> weights);

enum class ImportanceMode { independent, greedy };

// Scores for every filter of `layer` in `net` (the untrimmed network).
// independent: over the full kernels. greedy: ignoring the input-channel
// slices in removed_inputs, i.e. the kernels as they look after the previous
// layer was trimmed.
std::vector<double> importance_scores(const NetworkModel& net, std::size_t layer,
                                      ImportanceMode mode,
                                      std::span<const std::size_t> removed_inputs = {});

// Removes output filters (kernel slabs and biases) from `layer` and the
// matching input slices from layer + 1. The final layer cannot be trimmed
// and at least one filter must remain.
NetworkModel trim_filters(const NetworkModel& net, std::size_t layer,
                          std::span<const std::size_t> filters);

// Indices of the `count` lowest scores; ties go to the lower index.
std::vector<std::size_t> lowest_scoring(std::span<const double> scores, std::size_t count);

// Hook fired after each stage's fine-tuning; used for checkpoints.
using TrimStageHook = std::function<void(const NetworkModel&, const TrimStageLog&)>;

struct TrimResult {
    NetworkModel net;
    std::vector<TrimStageLog> stages;
};

// Scores and trims layers 0 .. L-2 in order (floor(rate * n_i) filters
// each), then fine-tunes the whole network as one stage.
TrimResult one_shot_trim(const NetworkModel& net, const TrimPlan& plan, const PatchSet& patches,
                         const TrainConfig& cfg, const TrimStageHook& hook = {},
                         const TrainHooks& train_hooks = {});

// Trims plan.layers_per_stage adjacent layers per stage from the deepest
// trimmable pair toward the input, removing a random half of each targeted
// layer's filters, and fine-tunes the whole network after every stage.
TrimResult cascade_trim(const NetworkModel& net, const PatchSet& patches, const TrainConfig& cfg,
                        const TrimPlan& plan, const TrimStageHook& hook = {},
                        const TrainHooks& train_hooks = {});

// Layer groups cascade_trim visits, deepest first.
std::vector<std::vector<std::size_t>> cascade_trim_schedule(std::size_t depth,
                                                            std::size_t layers_per_stage);

// Builds the half-width 3-layer base (32-16-1) and cascade-trains it with
// half-width insertions up to cfg.target_depth.
CascadeResult trim_train(const PatchSet& patches, const TrainConfig& cfg, const TrimPlan& plan,
                         const TrainHooks& hooks = {});

}  // namespace ctsr
