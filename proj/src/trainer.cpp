#include "ctsr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "ctsr/error.hpp"
#include "ctsr/ops.hpp"

namespace ctsr {

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw Error(ErrorCode::invalid_argument, "train config: learning_rate must be > 0");
    }
    if (!(plateau_threshold > 0.0 && plateau_threshold < 1.0)) {
        throw Error(ErrorCode::invalid_argument,
                    "train config: plateau_threshold must lie in (0, 1)");
    }
    if (target_depth < 3 || target_depth % 2 == 0) {
        throw Error(ErrorCode::invalid_argument,
                    "train config: target_depth must be odd and >= 3, got " +
                        std::to_string(target_depth));
    }
    if (batch_size == 0) throw Error(ErrorCode::invalid_argument, "train config: batch_size is 0");
    if (insert_count == 0 || insert_count % 2 != 0) {
        throw Error(ErrorCode::invalid_argument,
                    "train config: insert_count must be a positive even number");
    }
}

namespace {

void check_patch_geometry(const NetworkModel& net, const PatchSet& patches) {
    const std::size_t out = output_extent(net, patches.params().lr_size);
    if (out != patches.params().hr_size) {
        throw Error(ErrorCode::dimension_mismatch,
                    "training: a " + std::to_string(patches.params().lr_size) +
                        "-pixel LR patch maps to " + std::to_string(out) +
                        " pixels through the network, HR patches are " +
                        std::to_string(patches.params().hr_size));
    }
}

}  // namespace

double run_epoch(NetworkModel& net, const PatchSet& patches, const TrainConfig& cfg,
                 std::uint64_t epoch_index, const TrainHooks& hooks) {
    if (patches.empty()) throw Error(ErrorCode::invalid_argument, "run_epoch: empty patch set");
    if (!(cfg.learning_rate >= 0.0)) {
        throw Error(ErrorCode::invalid_argument, "run_epoch: negative learning rate");
    }
    if (cfg.batch_size == 0) throw Error(ErrorCode::invalid_argument, "run_epoch: batch_size is 0");
    check_patch_geometry(net, patches);

    Rng rng(mix_seed(cfg.seed, seed_stream::shuffle_base + epoch_index));
    const std::vector<std::size_t> order = rng.permutation(patches.size());
    const auto lr = static_cast<float>(cfg.learning_rate);

    double weighted = 0.0;
    std::size_t step = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size, ++step) {
        const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
        const std::span<const std::size_t> idx(order.data() + begin, end - begin);
        const ForwardTrace trace = forward_trace(net, patches.lr_batch(idx));
        const LossResult loss = mse_loss(trace.output, patches.hr_batch(idx));
        weighted += loss.loss * static_cast<double>(idx.size());
        if (lr > 0.0f) {
            const auto grads = backward(net, trace, loss.grad);
            for (std::size_t i = 0; i < net.depth(); ++i) {
                sgd_step(net.weights(i), net.bias(i), grads[i].weights, grads[i].bias, lr);
            }
        }
        if (hooks.on_step) {
            hooks.on_step(StepInfo{static_cast<std::size_t>(epoch_index), step, lr, loss.loss});
        }
    }
    return weighted / static_cast<double>(patches.size());
}

double evaluate_loss(const NetworkModel& net, const PatchSet& patches, std::size_t batch_size) {
    if (patches.empty()) throw Error(ErrorCode::invalid_argument, "evaluate_loss: empty patch set");
    check_patch_geometry(net, patches);
    batch_size = std::max<std::size_t>(batch_size, 1);
    std::vector<std::size_t> all(patches.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    double weighted = 0.0;
    for (std::size_t begin = 0; begin < all.size(); begin += batch_size) {
        const std::size_t end = std::min(all.size(), begin + batch_size);
        const std::span<const std::size_t> idx(all.data() + begin, end - begin);
        const Tensor4 pred = forward(net, patches.lr_batch(idx));
        weighted += mse_loss(pred, patches.hr_batch(idx)).loss * static_cast<double>(idx.size());
    }
    return weighted / static_cast<double>(patches.size());
}

bool plateau_reached(double prev_loss, double curr_loss, double threshold) {
    if (!(prev_loss > 0.0)) {
        throw Error(ErrorCode::invalid_argument, "plateau_reached: previous loss must be > 0");
    }
    return (prev_loss - curr_loss) / prev_loss < threshold;
}

StageLog train_stage(NetworkModel& net, const PatchSet& patches, const TrainConfig& cfg,
                     std::uint64_t& epoch_counter, const TrainHooks& hooks,
                     std::size_t stage_index) {
    StageLog log;
    log.depth = net.depth();
    log.terminated_by = StageEnd::max_epochs;
    for (std::size_t e = 0; e < cfg.max_epochs_per_stage; ++e) {
        const auto t0 = std::chrono::steady_clock::now();
        const double loss = run_epoch(net, patches, cfg, epoch_counter++, hooks);
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.epoch_losses.push_back(loss);
        log.epoch_seconds.push_back(secs);
        log.epochs = log.epoch_losses.size();
        if (hooks.on_epoch) hooks.on_epoch(stage_index, log.depth, e, loss, secs);
        if (cfg.stop_on_plateau && log.epochs >= 2) {
            const double prev = log.epoch_losses[log.epochs - 2];
            if (prev <= 0.0 || plateau_reached(prev, loss, cfg.plateau_threshold)) {
                log.terminated_by = StageEnd::plateau;
                break;
            }
        }
    }
    return log;
}

namespace {

void record_stage(NetworkModel& net, const StageLog& log) {
    if (log.epochs == 0) return;
    net.append_stage(StageRecord{log.depth, log.epochs, log.epoch_losses.back()});
}

}  // namespace

CascadeResult cascade_train_from(NetworkModel start, const PatchSet& patches,
                                 const TrainConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    if (start.depth() > cfg.target_depth) {
        throw Error(ErrorCode::invalid_argument,
                    "cascade_train: start depth " + std::to_string(start.depth()) +
                        " exceeds target depth " + std::to_string(cfg.target_depth));
    }
    if ((cfg.target_depth - start.depth()) % cfg.insert_count != 0) {
        throw Error(ErrorCode::invalid_argument,
                    "cascade_train: target depth is not reachable in steps of insert_count");
    }
    CascadeResult result{std::move(start), {}};
    NetworkModel& net = result.net;
    std::uint64_t epoch_counter = 0;
    for (std::size_t stage = 0;; ++stage) {
        StageLog log = train_stage(net, patches, cfg, epoch_counter, hooks, stage);
        record_stage(net, log);
        if (hooks.on_stage_end) hooks.on_stage_end(stage, net, log);
        result.stages.push_back(std::move(log));
        if (net.depth() >= cfg.target_depth) break;
        Rng rng(mix_seed(cfg.seed, seed_stream::insert_base + stage));
        net = insert_layers(net, rng, cfg.insert_count);
    }
    return result;
}

CascadeResult cascade_train(const PatchSet& patches, const TrainConfig& cfg,
                            const TrainHooks& hooks) {
    if (cfg.mode != TrainMode::cascade) {
        throw Error(ErrorCode::invalid_argument, "cascade_train: config mode is not cascade");
    }
    Rng rng(mix_seed(cfg.seed, seed_stream::init));
    return cascade_train_from(build_base_network(rng), patches, cfg, hooks);
}

OneShotResult one_shot_train(const PatchSet& patches, const TrainConfig& cfg, std::size_t depth,
                             const TrainHooks& hooks) {
    if (cfg.mode != TrainMode::one_shot) {
        throw Error(ErrorCode::invalid_argument, "one_shot_train: config mode is not one_shot");
    }
    cfg.validate();
    Rng rng(mix_seed(cfg.seed, seed_stream::init));
    OneShotResult result{build_network(depth, 64, 32, rng), {}};
    std::uint64_t epoch_counter = 0;
    result.log = train_stage(result.net, patches, cfg, epoch_counter, hooks, 0);
    record_stage(result.net, result.log);
    if (hooks.on_stage_end) hooks.on_stage_end(0, result.net, result.log);
    return result;
}

}  // namespace ctsr
