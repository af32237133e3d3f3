#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "ctsr/network.hpp"
#include "ctsr/patches.hpp"

namespace ctsr {

enum class TrainMode { cascade, one_shot };

struct TrainConfig {
    double learning_rate = 0.0001;
    double plateau_threshold = 0.03;  // relative per-epoch loss drop
    std::size_t insert_count = 2;
    std::size_t target_depth = 19;
    std::size_t batch_size = 64;
    std::size_t max_epochs_per_stage = 100;
    std::uint64_t seed = 0;
    TrainMode mode = TrainMode::cascade;
    // When false, every stage runs exactly max_epochs_per_stage epochs; used
    // to give controls an exact epoch budget.
    bool stop_on_plateau = true;

    void validate() const;
};

enum class StageEnd { plateau, max_epochs };

struct StageLog {
    std::size_t depth = 0;
    std::vector<double> epoch_losses;
    std::vector<double> epoch_seconds;
    std::size_t epochs = 0;
    StageEnd terminated_by = StageEnd::max_epochs;
};

struct StepInfo {
    std::size_t epoch = 0;  // global epoch index
    std::size_t step = 0;   // within the epoch
    double learning_rate = 0.0;
    double batch_loss = 0.0;
};

// Optional observers. on_stage_end receives the network as it stands at the
// end of the stage (before any insertion) and is the checkpointing hook.
struct TrainHooks {
    std::function<void(const StepInfo&)> on_step;
    std::function<void(std::size_t stage_index, const NetworkModel&, const StageLog&)> on_stage_end;
    std::function<void(std::size_t stage_index, std::size_t depth, std::size_t epoch, double loss,
                       double seconds)>
        on_epoch;
};

// One pass over the patches in an order shuffled by (seed, epoch_index);
// mini-batch SGD at the configured learning rate. Returns the mean training
// loss over all patches seen in the epoch. learning_rate 0 is accepted and
// leaves the weights untouched.
double run_epoch(NetworkModel& net, const PatchSet& patches, const TrainConfig& cfg,
                 std::uint64_t epoch_index, const TrainHooks& hooks = {});

// Mean per-element squared error over the whole patch set, no updates.
double evaluate_loss(const NetworkModel& net, const PatchSet& patches,
                     std::size_t batch_size = 64);

// (prev - curr) / prev < threshold; a loss increase also counts.
bool plateau_reached(double prev_loss, double curr_loss, double threshold);

// Trains at the current depth until plateau_reached or the epoch bound.
// epoch_counter is the running global epoch index and is advanced.
StageLog train_stage(NetworkModel& net, const PatchSet& patches, const TrainConfig& cfg,
                     std::uint64_t& epoch_counter, const TrainHooks& hooks = {},
                     std::size_t stage_index = 0);

struct CascadeResult {
    NetworkModel net;
    std::vector<StageLog> stages;
};

// Starts from build_base_network and grows by cfg.insert_count layers per
// stage until cfg.target_depth.
CascadeResult cascade_train(const PatchSet& patches, const TrainConfig& cfg,
                            const TrainHooks& hooks = {});

// Same staged loop from an arbitrary starting network.
CascadeResult cascade_train_from(NetworkModel start, const PatchSet& patches,
                                 const TrainConfig& cfg, const TrainHooks& hooks = {});

struct OneShotResult {
    NetworkModel net;
    StageLog log;
};

// Builds the full-depth network at once and trains it as a single stage.
OneShotResult one_shot_train(const PatchSet& patches, const TrainConfig& cfg, std::size_t depth,
                             const TrainHooks& hooks = {});

// Seed streams derived from TrainConfig::seed.
namespace seed_stream {
inline constexpr std::uint64_t init = 1;
inline constexpr std::uint64_t insert_base = 0x1000;
inline constexpr std::uint64_t shuffle_base = 0x100000;
}  // namespace seed_stream

}  // namespace ctsr
