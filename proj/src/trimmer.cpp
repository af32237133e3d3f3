#include "ctsr/trimmer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "ctsr/error.hpp"

namespace ctsr {

TrimPlan TrimPlan::uniform(std::size_t depth, double rate, TrimMode mode, std::uint64_t seed) {
    TrimPlan plan;
    plan.rates.assign(depth, rate);
    if (depth > 0) plan.rates.back() = 0.0;
    plan.mode = mode;
    plan.seed = seed;
    return plan;
}

void TrimPlan::validate(const NetworkModel& net) const {
    if (rates.size() != net.depth()) {
        throw DimensionError("trim plan", "rate count", rates.size(), "network depth", net.depth());
    }
    for (double r : rates) {
        if (!(r >= 0.0 && r < 1.0)) {
            throw Error(ErrorCode::invalid_argument, "trim plan: rates must lie in [0, 1)");
        }
    }
    if (rates.back() != 0.0) {
        throw Error(ErrorCode::invalid_argument, "trim plan: the final layer's rate must be 0");
    }
    if (layers_per_stage == 0) {
        throw Error(ErrorCode::invalid_argument, "trim plan: layers_per_stage is 0");
    }
}

double filter_importance(std::span<const float> weights) {
    double acc = 0.0;
    for (float w : weights) acc += static_cast<double>(w) * w;
    return acc;
}

std::vector<double> importance_scores(const NetworkModel& net, std::size_t layer,
                                      ImportanceMode mode,
                                      std::span<const std::size_t> removed_inputs) {
    if (layer >= net.depth()) {
        throw Error(ErrorCode::invalid_argument,
                    "importance_scores: layer " + std::to_string(layer) + " out of range (depth " +
                        std::to_string(net.depth()) + ")");
    }
    const KernelTensor& k = net.layer(layer).weights;
    std::vector<bool> skip(k.in(), false);
    if (mode == ImportanceMode::greedy) {
        for (std::size_t c : removed_inputs) {
            if (c >= k.in()) {
                throw Error(ErrorCode::invalid_argument,
                            "importance_scores: removed input channel " + std::to_string(c) +
                                " out of range");
            }
            skip[c] = true;
        }
    }
    const std::size_t slice = k.k() * k.k();
    std::vector<double> scores(k.out());
    for (std::size_t o = 0; o < k.out(); ++o) {
        const auto f = k.filter(o);
        double acc = 0.0;
        for (std::size_t c = 0; c < k.in(); ++c) {
            if (skip[c]) continue;
            acc += filter_importance(f.subspan(c * slice, slice));
        }
        scores[o] = acc;
    }
    return scores;
}

NetworkModel trim_filters(const NetworkModel& net, std::size_t layer,
                          std::span<const std::size_t> filters) {
    if (layer + 1 >= net.depth()) {
        throw Error(ErrorCode::invalid_argument,
                    "trim_filters: layer " + std::to_string(layer) +
                        " cannot be trimmed (final layer or out of range)");
    }
    if (filters.empty()) return net;
    const Layer& target = net.layer(layer);
    const std::size_t n = target.spec.out_filters;
    std::set<std::size_t> drop;
    for (std::size_t f : filters) {
        if (f >= n) {
            throw Error(ErrorCode::invalid_argument,
                        "trim_filters: filter " + std::to_string(f) + " out of range (layer " +
                            std::to_string(layer) + " has " + std::to_string(n) + ")");
        }
        drop.insert(f);
    }
    if (drop.size() >= n) {
        throw Error(ErrorCode::invalid_argument,
                    "trim_filters: cannot remove all " + std::to_string(n) + " filters of layer " +
                        std::to_string(layer));
    }
    std::vector<std::size_t> keep;
    for (std::size_t f = 0; f < n; ++f) {
        if (!drop.contains(f)) keep.push_back(f);
    }

    std::vector<Layer> layers = net.layers();

    Layer& cur = layers[layer];
    LayerSpec cs = cur.spec;
    cs.out_filters = keep.size();
    KernelTensor cw(cs.kernel_shape());
    std::vector<float> cb(keep.size());
    for (std::size_t j = 0; j < keep.size(); ++j) {
        const auto src = target.weights.filter(keep[j]);
        std::copy(src.begin(), src.end(), cw.filter(j).begin());
        cb[j] = target.bias[keep[j]];
    }
    cur = Layer{cs, std::move(cw), std::move(cb)};

    const Layer& next_src = net.layer(layer + 1);
    Layer& next = layers[layer + 1];
    LayerSpec ns = next_src.spec;
    ns.in_channels = keep.size();
    KernelTensor nw(ns.kernel_shape());
    const std::size_t slice = ns.kernel_size * ns.kernel_size;
    for (std::size_t o = 0; o < ns.out_filters; ++o) {
        const auto src = next_src.weights.filter(o);
        auto dst = nw.filter(o);
        for (std::size_t j = 0; j < keep.size(); ++j) {
            std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(keep[j] * slice), slice,
                        dst.begin() + static_cast<std::ptrdiff_t>(j * slice));
        }
    }
    next = Layer{ns, std::move(nw), next_src.bias};
    return NetworkModel(std::move(layers), net.scale(), net.history());
}

std::vector<std::size_t> lowest_scoring(std::span<const double> scores, std::size_t count) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    idx.resize(std::min(count, idx.size()));
    std::sort(idx.begin(), idx.end());
    return idx;
}

namespace {

std::size_t trim_count(double rate, std::size_t n) {
    return static_cast<std::size_t>(std::floor(rate * static_cast<double>(n)));
}

std::vector<double> finetune(NetworkModel& net, const PatchSet& patches, const TrainConfig& cfg,
                             std::uint64_t& epoch_counter, const TrainHooks& hooks,
                             std::size_t stage) {
    if (cfg.max_epochs_per_stage == 0) return {};
    return train_stage(net, patches, cfg, epoch_counter, hooks, stage).epoch_losses;
}

}  // namespace

TrimResult one_shot_trim(const NetworkModel& net, const TrimPlan& plan, const PatchSet& patches,
                         const TrainConfig& cfg, const TrimStageHook& hook,
                         const TrainHooks& train_hooks) {
    if (plan.mode == TrimMode::cascade) {
        throw Error(ErrorCode::invalid_argument, "one_shot_trim: plan mode is cascade");
    }
    plan.validate(net);
    const ImportanceMode mode = plan.mode == TrimMode::one_shot_greedy ? ImportanceMode::greedy
                                                                       : ImportanceMode::independent;
    TrimResult result{net, {}};
    TrimStageLog log;
    std::vector<std::size_t> removed_prev;
    for (std::size_t i = 0; i + 1 < net.depth(); ++i) {
        const std::size_t n = net.layer(i).spec.out_filters;
        const std::size_t count = trim_count(plan.rates[i], n);
        const auto scores = importance_scores(net, i, mode, removed_prev);
        std::vector<std::size_t> chosen = lowest_scoring(scores, count);
        if (!chosen.empty()) {
            result.net = trim_filters(result.net, i, chosen);
            log.layers.push_back(i);
            log.removed.push_back(chosen);
        }
        removed_prev = std::move(chosen);
    }
    std::uint64_t epoch_counter = 0;
    if (!log.layers.empty()) {
        log.finetune_losses = finetune(result.net, patches, cfg, epoch_counter, train_hooks, 0);
    }
    log.param_count = param_count(result.net);
    if (hook) hook(result.net, log);
    result.stages.push_back(std::move(log));
    return result;
}

std::vector<std::vector<std::size_t>> cascade_trim_schedule(std::size_t depth,
                                                            std::size_t layers_per_stage) {
    std::vector<std::vector<std::size_t>> groups;
    if (depth < 2 || layers_per_stage == 0) return groups;
    // trimmable layers are 0 .. depth-2; group them from the deep end
    std::size_t end = depth - 1;
    while (end > 0) {
        const std::size_t begin = end > layers_per_stage ? end - layers_per_stage : 0;
        std::vector<std::size_t> g;
        for (std::size_t i = begin; i < end; ++i) g.push_back(i);
        groups.push_back(std::move(g));
        end = begin;
    }
    return groups;
}

TrimResult cascade_trim(const NetworkModel& net, const PatchSet& patches, const TrainConfig& cfg,
                        const TrimPlan& plan, const TrimStageHook& hook,
                        const TrainHooks& train_hooks) {
    if (plan.mode != TrimMode::cascade) {
        throw Error(ErrorCode::invalid_argument, "cascade_trim: plan mode is not cascade");
    }
    if (plan.layers_per_stage == 0) {
        throw Error(ErrorCode::invalid_argument, "cascade_trim: layers_per_stage is 0");
    }
    TrimResult result{net, {}};
    std::uint64_t epoch_counter = 0;
    const auto schedule = cascade_trim_schedule(net.depth(), plan.layers_per_stage);
    for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
        TrimStageLog log;
        log.stage = stage + 1;
        Rng rng(mix_seed(plan.seed, stage));
        for (std::size_t layer : schedule[stage]) {
            const std::size_t n = result.net.layer(layer).spec.out_filters;
            std::vector<std::size_t> chosen = rng.choose(n, n / 2);
            result.net = trim_filters(result.net, layer, chosen);
            log.layers.push_back(layer);
            log.removed.push_back(std::move(chosen));
        }
        log.finetune_losses = finetune(result.net, patches, cfg, epoch_counter, train_hooks, stage);
        log.param_count = param_count(result.net);
        if (hook) hook(result.net, log);
        result.stages.push_back(std::move(log));
    }
    return result;
}

CascadeResult trim_train(const PatchSet& patches, const TrainConfig& cfg, const TrimPlan& plan,
                         const TrainHooks& hooks) {
    // slim widths follow the plan's first two rates, or the half rate
    const double r0 = plan.rates.size() >= 2 ? plan.rates[0] : 0.5;
    const double r1 = plan.rates.size() >= 2 ? plan.rates[1] : 0.5;
    const std::size_t first = 64 - trim_count(r0, 64);
    const std::size_t mid = 32 - trim_count(r1, 32);
    Rng rng(mix_seed(cfg.seed, seed_stream::init));
    NetworkModel base = build_network(3, first, mid, rng);
    return cascade_train_from(std::move(base), patches, cfg, hooks);
}

}  // namespace ctsr
