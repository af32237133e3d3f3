// Acceptance run: one PASS / FAIL / SKIP line per criterion.
//
//   acceptance [--only 1,2,...]
//
// CT_SET5_DIR names a directory holding the five Set5 ground-truth images as
// 8-bit PGM; without it criterion 4 is skipped.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ctsr/benchmark.hpp"
#include "ctsr/image.hpp"
#include "ctsr/network.hpp"
#include "ctsr/patches.hpp"
#include "ctsr/trainer.hpp"
#include "ctsr/trimmer.hpp"
#include "gradcheck.hpp"
#include "support.hpp"
#include "trimcheck.hpp"

using namespace ctsr;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets, fixed here.
constexpr double kGradTolerance = 1e-4;        // criterion 2, relative
constexpr std::size_t kGradConfigs = 100;
constexpr double kSurgeryTolerance = 1e-6;     // criterion 3, absolute
constexpr std::size_t kSurgeryTrials = 50;
constexpr double kSet5Psnr = 33.66;            // criterion 4
constexpr double kSet5PsnrTolerance = 0.1;
constexpr double kSet5Ssim = 0.9299;
constexpr double kSet5SsimTolerance = 0.005;
constexpr std::size_t kTimingRepeats = 5;      // criterion 8, best of
constexpr std::size_t kTimingSide = 128;

// Desk-scale recipe shared by criteria 5-7. The default learning rate
// (0.0001) does not move the sigma 0.001 initialisation off the mean
// predictor within an hour on one core.
constexpr double kDeskLearningRate = 0.05;
constexpr std::size_t kDeskBatch = 4;
constexpr std::size_t kDeskStageCap = 12;     // epochs per cascade stage
constexpr std::size_t kDeskFinetuneCap = 8;   // epochs per trimming stage
const std::vector<std::uint64_t> kSeeds{1, 2, 3};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 3) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(prec);
    os << v;
    return os.str();
}

double mean(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
}

std::string list(const std::vector<double>& v, int prec = 3) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " / " : "") + fmt(v[i], prec);
    return s;
}

enum class Verdict { pass, fail, skip };

struct Outcome {
    Verdict verdict = Verdict::fail;
    std::string detail;
};

Outcome pass_if(bool ok, std::string detail) {
    return {ok ? Verdict::pass : Verdict::fail, std::move(detail)};
}

// Desk-scale corpus, loaded once.
struct Corpus {
    DatasetManifest manifest;
    PatchSet patches;
    std::vector<fs::path> held_out;
    double bicubic_db = 0.0;
};

const Corpus& corpus() {
    static const Corpus c = [] {
        Corpus k;
        k.manifest = load_manifest(testutil::corpus_dir() / "manifest.json");
        k.patches = build_patch_set(k.manifest).patches;
        k.held_out = k.manifest.paths(ImageRole::test);
        k.bicubic_db = benchmark(nullptr, k.held_out, k.manifest.scale).mean_psnr_db;
        return k;
    }();
    return c;
}

double held_out_psnr(const NetworkModel& net) {
    const Corpus& c = corpus();
    const EvalReport r = benchmark(&net, c.held_out, c.manifest.scale);
    return r.failures == 0 ? r.mean_psnr_db : -1.0;
}

TrainConfig desk_config(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.learning_rate = kDeskLearningRate;
    cfg.batch_size = kDeskBatch;
    cfg.max_epochs_per_stage = kDeskStageCap;
    cfg.seed = seed;
    return cfg;
}

// One cascade run to depth 7 per seed, shared by criteria 5, 6 and 7.
struct SeedRun {
    std::map<std::size_t, NetworkModel> stage_end;  // by depth
    std::map<std::size_t, double> psnr;             // by depth
    std::size_t epochs_through_5 = 0;
    double one_shot_5 = 0.0;
};

std::map<std::uint64_t, SeedRun>& seed_runs() {
    static std::map<std::uint64_t, SeedRun> runs;
    return runs;
}

const SeedRun& cascade_run(std::uint64_t seed) {
    auto& runs = seed_runs();
    if (auto it = runs.find(seed); it != runs.end()) return it->second;
    SeedRun run;
    TrainConfig cfg = desk_config(seed);
    cfg.target_depth = 7;
    TrainHooks hooks;
    hooks.on_stage_end = [&](std::size_t, const NetworkModel& net, const StageLog& log) {
        run.stage_end.emplace(net.depth(), net);
        if (net.depth() <= 5) run.epochs_through_5 += log.epochs;
        std::cout << "    seed " << seed << " depth " << net.depth() << ": " << log.epochs
                  << " epoch(s), final loss " << fmt(log.epoch_losses.back(), 6) << '\n';
    };
    cascade_train(corpus().patches, cfg, hooks);
    for (const auto& [depth, net] : run.stage_end) run.psnr[depth] = held_out_psnr(net);

    TrainConfig one = cfg;
    one.mode = TrainMode::one_shot;
    one.stop_on_plateau = false;
    one.max_epochs_per_stage = run.epochs_through_5;
    run.one_shot_5 = held_out_psnr(one_shot_train(corpus().patches, one, 5).net);
    std::cout << "    seed " << seed << " held-out dB: cascade d3/d5/d7 " << fmt(run.psnr[3])
              << " / " << fmt(run.psnr[5]) << " / " << fmt(run.psnr[7]) << ", one-shot d5 "
              << fmt(run.one_shot_5) << " (" << run.epochs_through_5 << " epochs)\n";
    return runs.emplace(seed, std::move(run)).first->second;
}

Outcome criterion_param_counts() {
    const std::vector<std::size_t> table{57184,  75616,  94048,  112480, 130912,
                                         149344, 167776, 186208, 204640};
    Rng rng(1);
    std::vector<std::string> bad;
    for (std::size_t i = 0; i < table.size(); ++i) {
        const std::size_t depth = 3 + 2 * i;
        const std::size_t got = param_count(build_network(depth, 64, 32, rng));
        if (got != table[i]) bad.push_back("d" + std::to_string(depth) + "=" + std::to_string(got));
    }
    // literal schedule on the 13-layer net; no fine-tuning needed for counts
    const NetworkModel net13 = build_network(13, 64, 32, rng);
    TrainConfig cfg;
    cfg.max_epochs_per_stage = 0;
    const TrimResult trimmed = cascade_trim(net13, PatchSet{}, cfg,
                                            TrimPlan::uniform(13, 0.5, TrimMode::cascade, 7));
    const std::vector<std::size_t> stages{137424, 123600, 109776, 95952};
    std::string got;
    for (std::size_t s = 0; s < trimmed.stages.size(); ++s) {
        got += (s ? " / " : "") + std::to_string(trimmed.stages[s].param_count);
        if (s < stages.size() && trimmed.stages[s].param_count != stages[s])
            bad.push_back("S" + std::to_string(s + 1));
    }
    std::string detail = "depths 3-19 and trim stages S1..S6 " + got +
                         " (S5/S6 not compared)";
    if (!bad.empty()) {
        detail += "; mismatches:";
        for (const auto& b : bad) detail += " " + b;
    }
    return pass_if(bad.empty() && trimmed.stages.size() >= 4, detail);
}

Outcome criterion_gradients() {
    Rng rng(2024);
    double worst_conv = 0.0, worst_mse = 0.0;
    std::size_t failing = 0;
    for (std::size_t i = 0; i < kGradConfigs; ++i) {
        const double c = testutil::check_conv_gradients(testutil::random_conv_case(rng)).worst();
        const double m = testutil::check_mse_gradient(rng);
        worst_conv = std::max(worst_conv, c);
        worst_mse = std::max(worst_mse, m);
        failing += (c > kGradTolerance || m > kGradTolerance);
    }
    return pass_if(failing == 0, std::to_string(kGradConfigs) + " configs, worst relative error conv " +
                                     fmt(worst_conv * 1e6, 2) + "e-6, mse " + fmt(worst_mse * 1e6, 2) +
                                     "e-6 (limit 1e-4)");
}

Outcome criterion_surgery() {
    Rng rng(77);
    double worst = 0.0;
    for (std::size_t t = 0; t < kSurgeryTrials; ++t) {
        const std::size_t depth = 3 + 2 * rng.below(4);
        const NetworkModel net = testutil::random_net(depth, 1000 + t);
        // one to all trimmable layers, each losing a random non-empty subset
        std::map<std::size_t, std::vector<std::size_t>> cut;
        const auto layers = rng.choose(depth - 1, 1 + rng.below(depth - 1));
        NetworkModel trimmed = net;
        for (std::size_t layer : layers) {
            const std::size_t n = net.layer(layer).spec.out_filters;
            cut[layer] = rng.choose(n, 1 + rng.below(n - 1));
        }
        // filter indices of one layer are unaffected by trimming another
        for (const auto& [layer, filters] : cut) trimmed = trim_filters(trimmed, layer, filters);
        const Tensor4 x = testutil::random_tensor({2, 1, 30, 27}, rng, 0.0, 1.0);
        const Tensor4 a = forward(trimmed, x);
        const Tensor4 b = testutil::masked_forward(net, cut, x);
        worst = std::max(worst, testutil::max_abs_diff(a.data(), b.data()));
    }
    return pass_if(worst <= kSurgeryTolerance, std::to_string(kSurgeryTrials) +
                                                   " nets, worst |trimmed - masked| " +
                                                   fmt(worst * 1e9, 1) + "e-9 (limit 1e-6)");
}

Outcome criterion_set5() {
    const char* dir = std::getenv("CT_SET5_DIR");
    if (dir == nullptr || *dir == '\0') return {Verdict::skip, "CT_SET5_DIR not set"};
    std::vector<fs::path> images;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.path().extension() == ".pgm") images.push_back(e.path());
    std::sort(images.begin(), images.end());
    if (images.size() != 5)
        return {Verdict::fail, std::to_string(images.size()) + " PGM files in " + dir + ", expected 5"};
    const EvalReport r = benchmark(nullptr, images, 2);
    const bool ok = r.failures == 0 && std::abs(r.mean_psnr_db - kSet5Psnr) <= kSet5PsnrTolerance &&
                    std::abs(r.mean_ssim - kSet5Ssim) <= kSet5SsimTolerance;
    return pass_if(ok, "bicubic x2 mean PSNR " + fmt(r.mean_psnr_db) + " dB (target 33.66 +-0.1), SSIM " +
                           fmt(r.mean_ssim, 4) + " (target 0.9299 +-0.005)");
}

Outcome criterion_cascade_benefit() {
    std::vector<double> cas, one;
    for (std::uint64_t s : kSeeds) {
        const SeedRun& r = cascade_run(s);
        cas.push_back(r.psnr.at(5));
        one.push_back(r.one_shot_5);
    }
    return pass_if(mean(cas) >= mean(one),
                   "depth-5 held-out mean PSNR cascade " + fmt(mean(cas)) + " dB [" + list(cas) +
                       "] vs one-shot " + fmt(mean(one)) + " dB [" + list(one) + "]");
}

Outcome criterion_depth_trend() {
    std::vector<double> d3, d5, d7;
    for (std::uint64_t s : kSeeds) {
        const SeedRun& r = cascade_run(s);
        d3.push_back(r.psnr.at(3));
        d5.push_back(r.psnr.at(5));
        d7.push_back(r.psnr.at(7));
    }
    const double m3 = mean(d3), m5 = mean(d5), m7 = mean(d7);
    return pass_if(m3 <= m5 && m5 <= m7, "held-out mean PSNR d3/d5/d7 " + fmt(m3) + " / " + fmt(m5) +
                                             " / " + fmt(m7) + " dB (bicubic " +
                                             fmt(corpus().bicubic_db) + ")");
}

Outcome criterion_trim_order() {
    std::vector<double> cas, one, slim;
    bool same_arch = true;
    for (std::uint64_t s : kSeeds) {
        const NetworkModel& deep = cascade_run(s).stage_end.at(7);
        TrainConfig ft = desk_config(s);
        ft.max_epochs_per_stage = kDeskFinetuneCap;

        const TrimResult c = cascade_trim(deep, corpus().patches, ft,
                                          TrimPlan::uniform(7, 0.5, TrimMode::cascade, s));
        std::size_t budget = 0;
        for (const auto& st : c.stages) budget += st.finetune_losses.size();

        TrainConfig fixed = ft;
        fixed.stop_on_plateau = false;
        fixed.max_epochs_per_stage = budget;
        const TrimResult o =
            one_shot_trim(deep, TrimPlan::uniform(7, 0.5, TrimMode::one_shot_independent, s),
                          corpus().patches, fixed);

        TrainConfig grow = desk_config(s);
        grow.target_depth = 7;
        const CascadeResult t =
            trim_train(corpus().patches, grow, TrimPlan::uniform(7, 0.5, TrimMode::cascade, s));

        same_arch = same_arch && c.net.specs() == o.net.specs() && c.net.specs() == t.net.specs();
        cas.push_back(held_out_psnr(c.net));
        one.push_back(held_out_psnr(o.net));
        slim.push_back(held_out_psnr(t.net));
        std::size_t slim_epochs = 0;
        for (const auto& st : t.stages) slim_epochs += st.epochs;
        std::cout << "    seed " << s << ": cascade-trim " << fmt(cas.back()) << " (" << budget
                  << " fine-tune epochs), one-shot " << fmt(one.back()) << ", trim-train "
                  << fmt(slim.back()) << " (" << slim_epochs << " epochs), " << param_count(c.net)
                  << " parameters\n";
    }
    const bool ordered = mean(one) <= mean(slim) && mean(slim) <= mean(cas);
    return pass_if(same_arch && ordered,
                   std::string(same_arch ? "" : "architectures differ; ") + "held-out mean PSNR one-shot " +
                       fmt(mean(one)) + " <= trim-train " + fmt(mean(slim)) + " <= cascade-trim " +
                       fmt(mean(cas)) + " dB");
}

double best_inference_seconds(const NetworkModel& net, const Tensor4& img) {
    double best = 1e300;
    for (std::size_t r = 0; r < kTimingRepeats; ++r) {
        const auto t0 = Clock::now();
        const Tensor4 out = infer_image(net, img);
        best = std::min(best, seconds_since(t0));
        if (out.size() == 0) return -1.0;
    }
    return best;
}

// Removing `filters` from layer i of a net with these specs removes
// |filters| * n_{i-1} k_i^2 H_i W_i multiplies in layer i and
// |filters| * n_{i+1} k_{i+1}^2 H_{i+1} W_{i+1} in layer i + 1.
std::uint64_t removal_saving(const std::vector<LayerSpec>& specs, std::size_t layer,
                             std::size_t removed, std::size_t h, std::size_t w) {
    std::vector<std::uint64_t> area;
    for (const auto& s : specs) {
        h = h + 2 * s.pad - s.kernel_size + 1;
        w = w + 2 * s.pad - s.kernel_size + 1;
        area.push_back(std::uint64_t(h) * w);
    }
    const auto& cur = specs[layer];
    const auto& nxt = specs[layer + 1];
    return std::uint64_t(removed) * cur.in_channels * cur.kernel_size * cur.kernel_size * area[layer] +
           std::uint64_t(removed) * nxt.out_filters * nxt.kernel_size * nxt.kernel_size *
               area[layer + 1];
}

Outcome criterion_efficiency() {
    Rng rng(8);
    const NetworkModel full = build_network(13, 64, 32, rng);
    TrainConfig cfg;
    cfg.max_epochs_per_stage = 0;
    std::vector<NetworkModel> after;
    const TrimResult trimmed =
        cascade_trim(full, PatchSet{}, cfg, TrimPlan::uniform(13, 0.5, TrimMode::cascade, 8),
                     [&](const NetworkModel& n, const TrimStageLog&) { after.push_back(n); });

    const std::size_t side = kTimingSide;
    bool formula_ok = true;
    NetworkModel prev = full;
    for (std::size_t s = 0; s < trimmed.stages.size(); ++s) {
        // apply the stage's removals one layer at a time, checking each step
        auto specs = prev.specs();
        std::uint64_t expected = multiply_count(prev, side, side);
        for (std::size_t k = 0; k < trimmed.stages[s].layers.size(); ++k) {
            const std::size_t layer = trimmed.stages[s].layers[k];
            const std::size_t removed = trimmed.stages[s].removed[k].size();
            expected -= removal_saving(specs, layer, removed, side, side);
            specs[layer].out_filters -= removed;
            specs[layer + 1].in_channels -= removed;
        }
        formula_ok = formula_ok && expected == multiply_count(after[s], side, side);
        prev = after[s];
    }

    const Tensor4 img = testutil::synthetic_image(side, side, 5);
    const double t_full = best_inference_seconds(full, img);
    const double t_trim = best_inference_seconds(trimmed.net, img);
    const std::uint64_t m_full = multiply_count(full, side, side);
    const std::uint64_t m_trim = multiply_count(trimmed.net, side, side);
    return pass_if(formula_ok && t_trim < t_full,
                   "13-layer on " + std::to_string(side) + "x" + std::to_string(side) + ": " +
                       fmt(t_full * 1e3, 1) + " ms -> " + fmt(t_trim * 1e3, 1) + " ms (best of " +
                       std::to_string(kTimingRepeats) + "), multiplies " + std::to_string(m_full) +
                       " -> " + std::to_string(m_trim) + ", per-stage formula " +
                       (formula_ok ? "matches" : "MISMATCH"));
}

// prepare -> cascade train -> cascade trim, writing every model to `dir`.
void pipeline(const fs::path& dir) {
    const Corpus& c = corpus();
    const std::vector<std::uint8_t> cache = serialize_patches(build_patch_set(c.manifest).patches);
    {
        std::ofstream out(dir / "patches.ctpd", std::ios::binary);
        out.write(reinterpret_cast<const char*>(cache.data()), std::streamsize(cache.size()));
    }
    const PatchSet all = deserialize_patches(cache);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < all.size(); i += 8) idx.push_back(i);
    const PatchSet patches = all.subset(idx);

    TrainConfig cfg = desk_config(42);
    cfg.target_depth = 5;
    cfg.max_epochs_per_stage = 2;
    TrainHooks hooks;
    hooks.on_stage_end = [&](std::size_t, const NetworkModel& n, const StageLog&) {
        save_model(n, dir / ("model-d" + std::to_string(n.depth()) + ".ctsr"));
    };
    const CascadeResult trained = cascade_train(patches, cfg, hooks);
    save_model(trained.net, dir / "model.ctsr");
    cfg.max_epochs_per_stage = 1;
    const TrimResult trimmed = cascade_trim(
        trained.net, patches, cfg, TrimPlan::uniform(5, 0.5, TrimMode::cascade, 42),
        [&](const NetworkModel& n, const TrimStageLog& log) {
            save_model(n, dir / ("model-trimS" + std::to_string(log.stage) + ".ctsr"));
        });
    save_model(trimmed.net, dir / "trimmed.ctsr");
}

Outcome criterion_determinism() {
    const fs::path a = testutil::scratch_dir("accept_det_a");
    const fs::path b = testutil::scratch_dir("accept_det_b");
    pipeline(a);
    pipeline(b);
    std::size_t files = 0, differing = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        ++files;
        if (testutil::read_all(e.path()) != testutil::read_all(b / e.path().filename())) ++differing;
    }
    return pass_if(files > 0 && differing == 0,
                   std::to_string(files) + " files (patch cache, models, sidecars) compared across two runs, " +
                       std::to_string(differing) + " differ");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"acceptance criteria"};
    std::vector<int> only;
    app.add_option("--only", only, "criteria to run")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"parameter counts", criterion_param_counts},
        {"gradient correctness", criterion_gradients},
        {"trim surgery equivalence", criterion_surgery},
        {"bicubic baseline on Set5", criterion_set5},
        {"cascade beats one-shot at depth 5", criterion_cascade_benefit},
        {"held-out PSNR non-decreasing in depth", criterion_depth_trend},
        {"trimming order one-shot <= trim-train <= cascade-trim", criterion_trim_order},
        {"trimmed inference is faster", criterion_efficiency},
        {"determinism", criterion_determinism},
    };

    std::size_t failed = 0;
    const auto start = Clock::now();
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = int(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), number) == only.end()) continue;
        const auto t0 = Clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {Verdict::fail, std::string("exception: ") + e.what()};
        }
        const char* tag = o.verdict == Verdict::pass ? "PASS" : o.verdict == Verdict::fail ? "FAIL" : "SKIP";
        failed += o.verdict == Verdict::fail;
        std::cout << tag << " " << number << " " << criteria[i].first << ": " << o.detail << " ["
                  << fmt(seconds_since(t0), 1) << " s]" << std::endl;
    }

    // Training must at least match the interpolation it starts from.
    if (!seed_runs().empty()) {
        double worst = 1e300;
        for (const auto& [seed, run] : seed_runs())
            for (const auto& [depth, db] : run.psnr) worst = std::min(worst, db);
        const double base = corpus().bicubic_db;
        const bool ok = worst >= base;
        failed += !ok;
        std::cout << (ok ? "PASS" : "FAIL") << " invariant trained >= bicubic on held-out images: worst "
                  << fmt(worst) << " dB vs bicubic " << fmt(base) << " dB" << std::endl;
    }
    std::cout << "total " << fmt(seconds_since(start), 1) << " s, " << failed << " failing" << std::endl;
    return failed == 0 ? 0 : 1;
}
