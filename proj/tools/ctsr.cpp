// ctsr: prepare / train / trim / eval / infer front end.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctsr/benchmark.hpp"
#include "ctsr/error.hpp"
#include "ctsr/image.hpp"
#include "ctsr/network.hpp"
#include "ctsr/patches.hpp"
#include "ctsr/trainer.hpp"
#include "ctsr/trimmer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ctsr;

namespace {

// Flags shared by every subcommand. Unset optionals fall back to the config.
struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string model;
    std::string out;
    std::string mode;
    std::optional<std::size_t> depth;
    std::optional<std::size_t> scale;
    std::string in;
    bool bicubic = false;
};

struct TrimSettings {
    std::string mode = "cascade";
    double rate = 0.5;
    std::vector<double> rates;
    std::size_t layers_per_stage = 2;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> finetune_epochs;
};

struct EvalSettings {
    std::size_t border = 8;
    bool bicubic = false;
    std::size_t threads = 1;
};

struct RunConfig {
    fs::path manifest;
    fs::path patches;
    fs::path model;
    fs::path out;
    std::optional<std::size_t> scale;
    TrainConfig train;
    TrimSettings trim;
    EvalSettings eval;
};

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw Error(ErrorCode::invalid_argument, where + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.contains(key)) {
            throw Error(ErrorCode::invalid_argument, where + ": unknown key '" + key + "'");
        }
    }
}

TrainMode parse_train_mode(const std::string& s) {
    if (s == "cascade") return TrainMode::cascade;
    if (s == "one_shot" || s == "one-shot") return TrainMode::one_shot;
    throw Error(ErrorCode::invalid_argument, "unknown training mode '" + s + "'");
}

RunConfig load_config(const std::string& path) {
    RunConfig rc;
    if (path.empty()) return rc;
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot open config '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::unsupported_format, "config '" + path + "': " + e.what());
    }
    const std::string where = "config '" + path + "'";
    reject_unknown(j, {"manifest", "patches", "model", "out", "scale", "train", "trim", "eval"}, where);
    const fs::path base = fs::path(path).parent_path();
    auto resolve = [&](const char* key) -> fs::path {
        if (!j.contains(key)) return {};
        fs::path p = j.at(key).get<std::string>();
        return p.is_absolute() ? p : base / p;
    };
    try {
        rc.manifest = resolve("manifest");
        rc.patches = resolve("patches");
        rc.model = resolve("model");
        rc.out = resolve("out");
        if (j.contains("scale")) rc.scale = j.at("scale").get<std::size_t>();
        if (j.contains("train")) {
            const json& t = j.at("train");
            reject_unknown(t,
                           {"learning_rate", "plateau_threshold", "insert_count", "target_depth",
                            "batch_size", "max_epochs_per_stage", "seed", "mode", "stop_on_plateau"},
                           where + " train");
            TrainConfig& c = rc.train;
            c.learning_rate = t.value("learning_rate", c.learning_rate);
            c.plateau_threshold = t.value("plateau_threshold", c.plateau_threshold);
            c.insert_count = t.value("insert_count", c.insert_count);
            c.target_depth = t.value("target_depth", c.target_depth);
            c.batch_size = t.value("batch_size", c.batch_size);
            c.max_epochs_per_stage = t.value("max_epochs_per_stage", c.max_epochs_per_stage);
            c.seed = t.value("seed", c.seed);
            c.stop_on_plateau = t.value("stop_on_plateau", c.stop_on_plateau);
            if (t.contains("mode")) c.mode = parse_train_mode(t.at("mode").get<std::string>());
        }
        if (j.contains("trim")) {
            const json& t = j.at("trim");
            reject_unknown(t, {"mode", "rate", "rates", "layers_per_stage", "seed", "finetune_epochs"},
                           where + " trim");
            TrimSettings& s = rc.trim;
            s.mode = t.value("mode", s.mode);
            s.rate = t.value("rate", s.rate);
            if (t.contains("rates")) s.rates = t.at("rates").get<std::vector<double>>();
            s.layers_per_stage = t.value("layers_per_stage", s.layers_per_stage);
            if (t.contains("seed")) s.seed = t.at("seed").get<std::uint64_t>();
            if (t.contains("finetune_epochs"))
                s.finetune_epochs = t.at("finetune_epochs").get<std::size_t>();
        }
        if (j.contains("eval")) {
            const json& e = j.at("eval");
            reject_unknown(e, {"border", "bicubic", "threads"}, where + " eval");
            rc.eval.border = e.value("border", rc.eval.border);
            rc.eval.bicubic = e.value("bicubic", rc.eval.bicubic);
            rc.eval.threads = e.value("threads", rc.eval.threads);
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::invalid_argument, where + ": " + e.what());
    }
    return rc;
}

// Config plus command-line overrides.
RunConfig resolve(const Flags& f) {
    RunConfig rc = load_config(f.config);
    if (f.seed) rc.train.seed = *f.seed;
    if (f.depth) rc.train.target_depth = *f.depth;
    if (f.scale) rc.scale = *f.scale;
    if (!f.model.empty()) rc.model = f.model;
    if (!f.out.empty()) rc.out = f.out;
    return rc;
}

void require_file(const fs::path& p, const std::string& what) {
    if (p.empty()) throw Error(ErrorCode::invalid_argument, "no " + what + " given");
    if (!fs::is_regular_file(p)) {
        throw Error(ErrorCode::io, what + " '" + p.string() + "' does not exist");
    }
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// runs/model.ctsr + "-d3" -> runs/model-d3.ctsr
fs::path with_suffix(const fs::path& p, const std::string& suffix, const std::string& ext = {}) {
    fs::path out = p.parent_path() / (p.stem().string() + suffix);
    out += ext.empty() ? (p.has_extension() ? p.extension().string() : ".ctsr") : ext;
    return out;
}

DatasetManifest manifest_for(const RunConfig& rc, ImageRole role) {
    require_file(rc.manifest, "manifest");
    DatasetManifest m = load_manifest(rc.manifest);
    if (rc.scale) {
        m.scale = *rc.scale;
        m.validate();
    }
    std::vector<std::string> missing;
    for (const auto& p : m.paths(role)) {
        if (!fs::is_regular_file(p)) missing.push_back(p.string());
    }
    if (!missing.empty()) {
        std::string msg = "missing image file(s):";
        for (const auto& s : missing) msg += " '" + s + "'";
        throw Error(ErrorCode::io, msg);
    }
    return m;
}

// Epoch rows: stage_index, depth, epoch, mean_loss, wall_seconds.
class EpochLog {
public:
    explicit EpochLog(const fs::path& path) : out_(path) {
        if (!out_) throw Error(ErrorCode::io, "cannot write log '" + path.string() + "'");
        out_ << "stage_index,depth,epoch,mean_loss,wall_seconds\n";
        out_ << std::setprecision(10);
    }
    void row(std::size_t stage, std::size_t depth, std::size_t epoch, double loss, double secs) {
        out_ << stage << ',' << depth << ',' << epoch << ',' << loss << ',' << secs << '\n';
        out_.flush();
    }

private:
    std::ofstream out_;
};

TrainHooks epoch_hooks(EpochLog& log) {
    TrainHooks h;
    h.on_epoch = [&log](std::size_t stage, std::size_t depth, std::size_t epoch, double loss,
                        double secs) {
        log.row(stage, depth, epoch, loss, secs);
        std::cout << "  stage " << stage << " depth " << depth << " epoch " << epoch << " loss "
                  << loss << " (" << std::fixed << std::setprecision(1) << secs << "s)\n"
                  << std::defaultfloat << std::setprecision(6);
    };
    return h;
}

void report_model(const fs::path& path) {
    const NetworkModel back = load_model(path);
    std::cout << "final model " << path.string() << ": depth " << back.depth() << ", "
              << param_count(back) << " parameters\n";
}

int cmd_prepare(const Flags& f) {
    RunConfig rc = resolve(f);
    const DatasetManifest m = manifest_for(rc, ImageRole::train);
    const fs::path out = rc.out.empty() ? (rc.patches.empty() ? fs::path("patches.ctpd") : rc.patches)
                                        : rc.out;
    const PatchBuildReport report = build_patch_set(m);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
    ensure_parent(out);
    save_patches(report.patches, out);
    std::cout << report.patches.size() << " patch pairs written to " << out.string() << '\n';
    return 0;
}

PatchSet training_patches(const RunConfig& rc) {
    require_file(rc.patches, "patch cache");
    return load_patches(rc.patches);
}

int cmd_train(const Flags& f) {
    RunConfig rc = resolve(f);
    if (!f.mode.empty()) rc.train.mode = parse_train_mode(f.mode);
    rc.train.validate();
    const PatchSet patches = training_patches(rc);
    const fs::path out = rc.out.empty() ? fs::path("model.ctsr") : rc.out;
    ensure_parent(out);
    EpochLog log(with_suffix(out, "-train", ".csv"));
    TrainHooks hooks = epoch_hooks(log);
    const auto scale = static_cast<std::uint32_t>(rc.scale.value_or(2));
    hooks.on_stage_end = [&](std::size_t, const NetworkModel& net, const StageLog& s) {
        NetworkModel copy = net;
        copy.set_scale(scale);
        const fs::path ck = with_suffix(out, "-d" + std::to_string(net.depth()));
        save_model(copy, ck);
        std::cout << "checkpoint " << ck.string() << " after " << s.epochs << " epoch(s)\n";
    };
    std::cout << "training on " << patches.size() << " patches\n";
    NetworkModel final_net = [&] {
        if (rc.train.mode == TrainMode::cascade) return cascade_train(patches, rc.train, hooks).net;
        return one_shot_train(patches, rc.train, rc.train.target_depth, hooks).net;
    }();
    final_net.set_scale(scale);
    save_model(final_net, out);
    report_model(out);
    return 0;
}

json stage_json(const TrimStageLog& s) {
    return json{{"stage", s.stage},
                {"layers", s.layers},
                {"removed", s.removed},
                {"param_count", s.param_count},
                {"finetune_losses", s.finetune_losses}};
}

int cmd_trim(const Flags& f) {
    RunConfig rc = resolve(f);
    TrimSettings ts = rc.trim;
    if (!f.mode.empty()) ts.mode = f.mode;
    if (f.seed) ts.seed = *f.seed;
    const bool slim_train = ts.mode == "trim_train" || ts.mode == "trim-train";

    std::optional<NetworkModel> input;
    if (!slim_train) {
        require_file(rc.model, "model");
        input = load_model(rc.model);
    }
    TrainConfig ft = rc.train;
    if (ts.finetune_epochs) ft.max_epochs_per_stage = *ts.finetune_epochs;
    ft.validate();
    const PatchSet patches = training_patches(rc);

    const fs::path out = rc.out.empty() ? fs::path("trimmed.ctsr") : rc.out;
    ensure_parent(out);
    EpochLog log(with_suffix(out, "-trim", ".csv"));
    const TrainHooks hooks = epoch_hooks(log);
    const std::size_t depth = input ? input->depth() : rc.train.target_depth;

    auto make_plan = [&](TrimMode mode) {
        TrimPlan plan = TrimPlan::uniform(depth, ts.rate, mode, ts.seed.value_or(rc.train.seed));
        if (!ts.rates.empty()) plan.rates = ts.rates;
        plan.layers_per_stage = ts.layers_per_stage;
        return plan;
    };

    json record{{"mode", ts.mode}, {"input", input ? rc.model.string() : ""}};
    record["stages"] = json::array();
    std::optional<NetworkModel> result;

    if (slim_train) {
        const TrimPlan plan = make_plan(TrimMode::cascade);
        TrainHooks h = hooks;
        h.on_stage_end = [&](std::size_t stage, const NetworkModel& net, const StageLog& s) {
            const fs::path ck = with_suffix(out, "-d" + std::to_string(net.depth()));
            save_model(net, ck);
            record["stages"].push_back({{"stage", stage},
                                        {"depth", net.depth()},
                                        {"param_count", param_count(net)},
                                        {"epochs", s.epochs},
                                        {"losses", s.epoch_losses}});
        };
        result = trim_train(patches, rc.train, plan, h).net;
    } else {
        TrimMode mode;
        if (ts.mode == "cascade") {
            mode = TrimMode::cascade;
        } else if (ts.mode == "one_shot" || ts.mode == "one-shot") {
            mode = TrimMode::one_shot_independent;
        } else if (ts.mode == "one_shot_greedy") {
            mode = TrimMode::one_shot_greedy;
        } else {
            throw Error(ErrorCode::invalid_argument, "unknown trim mode '" + ts.mode + "'");
        }
        const TrimPlan plan = make_plan(mode);
        auto hook = [&](const NetworkModel& net, const TrimStageLog& s) {
            const fs::path ck = with_suffix(out, "-trimS" + std::to_string(s.stage));
            NetworkModel copy = net;
            copy.set_scale(input->scale());
            save_model(copy, ck);
            record["stages"].push_back(stage_json(s));
            std::cout << "checkpoint " << ck.string() << ": " << s.param_count << " parameters\n";
        };
        TrimResult r = mode == TrimMode::cascade ? cascade_trim(*input, patches, ft, plan, hook, hooks)
                                                 : one_shot_trim(*input, plan, patches, ft, hook, hooks);
        result = std::move(r.net);
        result->set_scale(input->scale());
    }
    save_model(*result, out);
    record["output"] = out.string();
    record["param_count"] = param_count(*result);
    std::ofstream(with_suffix(out, "-trimlog", ".json")) << record.dump(2) << '\n';
    report_model(out);
    return 0;
}

int cmd_eval(const Flags& f) {
    RunConfig rc = resolve(f);
    const bool bicubic = f.bicubic || (rc.eval.bicubic && f.model.empty());
    const DatasetManifest m = manifest_for(rc, ImageRole::test);
    std::optional<NetworkModel> net;
    if (!bicubic) {
        require_file(rc.model, "model");
        net = load_model(rc.model);
    }
    BenchmarkOptions opt;
    opt.border = rc.eval.border;
    opt.threads = std::getenv("CT_THREADS") ? threads_from_env() : rc.eval.threads;
    opt.net_id = bicubic ? "bicubic" : rc.model.stem().string();
    const EvalReport report = benchmark(net ? &*net : nullptr, m, opt);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';

    const fs::path out = rc.out.empty() ? fs::path("report") : rc.out;
    ensure_parent(out);
    fs::path stem = out;
    stem.replace_extension();
    report.write_csv(fs::path(stem) += ".csv");
    report.write_json(fs::path(stem) += ".json");

    for (const auto& img : report.images) {
        if (!img.ok()) continue;
        std::cout << img.image << ": "
                  << (img.psnr_infinite ? std::string("inf") : std::to_string(img.psnr_db))
                  << " dB, SSIM " << img.ssim << '\n';
    }
    std::cout << report.net_id << " x" << report.scale << ": mean PSNR " << std::fixed
              << std::setprecision(3) << report.mean_psnr_db << " dB, mean SSIM "
              << std::setprecision(4) << report.mean_ssim << " over "
              << report.images.size() - report.failures << " image(s)\n";
    if (report.failures > 0) {
        for (const auto& img : report.images)
            if (!img.ok()) std::cerr << "failed: " << img.image << ": " << img.error << '\n';
        return 1;
    }
    return 0;
}

int cmd_infer(const Flags& f) {
    RunConfig rc = resolve(f);
    require_file(rc.model, "model");
    require_file(f.in, "input image");
    if (rc.out.empty()) throw Error(ErrorCode::invalid_argument, "no output image given (--out)");
    const NetworkModel net = load_model(rc.model);
    const Tensor4 img = load_image(f.in);
    const Tensor4 result = infer_image(net, img);
    ensure_parent(rc.out);
    save_image(result, rc.out);
    std::cout << f.in << " (" << img.h() << "x" << img.w() << ") -> " << rc.out.string() << " ("
              << result.h() << "x" << result.w() << ")\n";
    return 0;
}

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--config", f.config, "JSON run configuration");
    sub->add_option("--seed", f.seed, "seed override");
    sub->add_option("--model", f.model, "model file");
    sub->add_option("--out", f.out, "output path");
    sub->add_option("--mode", f.mode, "training or trimming mode");
    sub->add_option("--depth", f.depth, "target depth");
    sub->add_option("--scale", f.scale, "upscaling factor (2, 3 or 4)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cascade-trained super-resolution networks"};
    app.require_subcommand(1);
    Flags f;
    CLI::App* prepare = app.add_subcommand("prepare", "cut LR/HR patch pairs into a cache file");
    CLI::App* train = app.add_subcommand("train", "cascade or one-shot training");
    CLI::App* trim = app.add_subcommand("trim", "filter trimming");
    CLI::App* eval = app.add_subcommand("eval", "PSNR/SSIM/time report over the test images");
    CLI::App* infer = app.add_subcommand("infer", "run a model on an interpolated image");
    for (CLI::App* sub : {prepare, train, trim, eval, infer}) add_common(sub, f);
    eval->add_flag("--bicubic", f.bicubic, "score the bicubic upsample instead of a model");
    infer->add_option("--in", f.in, "input PGM (already upsampled)")->required();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*prepare) return cmd_prepare(f);
        if (*train) return cmd_train(f);
        if (*trim) return cmd_trim(f);
        if (*eval) return cmd_eval(f);
        if (*infer) return cmd_infer(f);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
