// vcgan_cli: synthetic data, two-stage training, colorization, evaluation.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vcgan/vcgan.hpp"

namespace fs = std::filesystem;
using namespace vcgan;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<uint64_t> seed;
    std::string out;
    std::string checkpoint;
    std::string flows;
    bool zero_flow = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "flat key = value config file");
    cmd->add_option("--set", c.overrides, "override one config key (key=value), repeatable");
    cmd->add_option("--seed", c.seed, "random seed");
    cmd->add_option("--out", c.out, "output directory")->required();
}

TrainConfig resolve_config(int stage, const Common& c) {
    auto config = TrainConfig::defaults_for(stage);
    if (!c.config_path.empty()) apply_config_file(config, c.config_path);
    for (const auto& o : c.overrides) apply_assignment(config, o);
    if (c.seed) config.seed = *c.seed;
    if (config.stage != stage) throw UsageError("config sets stage = " + std::to_string(config.stage));
    config.validate();
    return config;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

// Timestamps live only in this sidecar so the other outputs stay byte-identical.
void write_meta(const fs::path& out, const std::string& command, const std::string& started) {
    nlohmann::json meta{{"command", command}, {"started", started}, {"finished", utc_now()}};
    std::ofstream(out / "run_meta.json") << meta.dump(2) << '\n';
}

// Inference and evaluation runs record their resolved inputs the same way training does.
void write_resolved(const fs::path& out, const std::vector<std::pair<std::string, std::string>>& entries) {
    std::ofstream os(out / "resolved_config.txt");
    for (const auto& [k, v] : entries) os << k << " = " << v << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
    if (path.empty()) throw UsageError("--checkpoint is required");
    return Checkpoint::load(path);
}

Frame as_gray(const Frame& f) { return f.color_space() == ColorSpace::grayscale ? f : to_grayscale(f); }

void log_step(const StepRecord& r, int64_t total) {
    if (r.step == 1 || r.step % 50 == 0 || r.step == total) {
        std::cout << "step " << r.step << "/" << total << " lr " << r.lr_g << " total " << r.total << '\n';
    }
}

}  // namespace

int run(int argc, char** argv) {
    CLI::App app{"Recurrent video colorization: data, training, inference, evaluation"};
    app.require_subcommand(1);

    // gen-synth
    Common gs;
    int gs_count = 4, gs_length = 8, gs_max_speed = 2, gs_sprites = 1;
    int64_t gs_height = 32, gs_width = 32;
    auto* gen_synth = app.add_subcommand("gen-synth", "write synthetic clips with exact flows");
    gen_synth->add_option("--out", gs.out, "output directory")->required();
    gen_synth->add_option("--seed", gs.seed, "random seed");
    gen_synth->add_option("--count", gs_count, "number of clips")->check(CLI::PositiveNumber);
    gen_synth->add_option("--length", gs_length, "frames per clip")->check(CLI::PositiveNumber);
    gen_synth->add_option("--height", gs_height, "frame height")->check(CLI::PositiveNumber);
    gen_synth->add_option("--width", gs_width, "frame width")->check(CLI::PositiveNumber);
    gen_synth->add_option("--max-speed", gs_max_speed, "max per-frame displacement")->check(CLI::NonNegativeNumber);
    gen_synth->add_option("--sprites", gs_sprites, "moving sprites per clip")->check(CLI::NonNegativeNumber);

    // train-stage1 / train-stage2
    Common t1, t2;
    std::string t1_data, t2_data;
    auto* train1 = app.add_subcommand("train-stage1", "image-mode training with L1 and perceptual losses");
    add_common(train1, t1);
    train1->add_option("--data", t1_data, "image or video directory")->required();
    train1->add_option("--checkpoint", t1.checkpoint, "resume from a stage-1 checkpoint");
    auto* train2 = app.add_subcommand("train-stage2", "recurrent training with the full objective");
    add_common(train2, t2);
    train2->add_option("--data", t2_data, "video directory (frames and .flo files)")->required();
    train2->add_option("--checkpoint", t2.checkpoint, "stage-1 checkpoint (or stage-2 to resume)");
    train2->add_option("--flows", t2.flows, "flow directory mirroring --data");

    // colorize / colorize-image
    Common cz, ci;
    std::string cz_input, ci_input;
    auto* colorize = app.add_subcommand("colorize", "colorize a grayscale frame directory");
    colorize->add_option("--input", cz_input, "directory of frames")->required();
    colorize->add_option("--out", cz.out, "output directory")->required();
    colorize->add_option("--checkpoint", cz.checkpoint, "trained checkpoint")->required();
    colorize->add_option("--flows", cz.flows, "directory of <prev>_<cur>.flo files");
    colorize->add_flag("--zero-flow", cz.zero_flow, "run the recurrence with zero flow when no flows exist");
    auto* colorize_img = app.add_subcommand("colorize-image", "colorize single images (image mode)");
    colorize_img->add_option("--input", ci_input, "PNG file or directory")->required();
    colorize_img->add_option("--out", ci.out, "output directory")->required();
    colorize_img->add_option("--checkpoint", ci.checkpoint, "trained checkpoint")->required();

    // evaluate
    Common ev;
    std::string ev_results, ev_gt;
    double ev_threshold = 0.01;
    auto* evaluate = app.add_subcommand("evaluate", "PSNR, SSIM and warp error against ground truth");
    evaluate->add_option("--results", ev_results, "colorized frames")->required();
    evaluate->add_option("--gt", ev_gt, "ground-truth frames")->required();
    evaluate->add_option("--flows", ev.flows, "flow directory (default: ground-truth directory)");
    evaluate->add_option("--out", ev.out, "directory for metrics.csv");
    evaluate->add_option("--mask-threshold", ev_threshold, "binary mask threshold in [0,1] scale");

    // ablate
    Common ab;
    std::string ab_data;
    std::vector<std::string> ab_configs;
    int64_t ab_s1 = 100, ab_s2 = 100;
    int ab_heldout = 4, ab_heldout_length = 8;
    auto* ablate = app.add_subcommand("ablate", "train ablation settings and compare them on held-out clips");
    add_common(ablate, ab);
    ablate->add_option("--data", ab_data, "training video directory")->required();
    ablate->add_option("--configs", ab_configs, "settings to run (default: every setting)");
    ablate->add_option("--stage1-steps", ab_s1, "stage-1 steps per architecture")->check(CLI::PositiveNumber);
    ablate->add_option("--stage2-steps", ab_s2, "stage-2 steps per setting")->check(CLI::PositiveNumber);
    ablate->add_option("--heldout", ab_heldout, "held-out synthetic clips")->check(CLI::PositiveNumber);
    ablate->add_option("--heldout-length", ab_heldout_length, "held-out clip length")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }
    const std::string started = utc_now();

    if (gen_synth->parsed()) {
        const uint64_t seed = gs.seed.value_or(1);
        const fs::path out = gs.out;
        fs::create_directories(out);
        for (int i = 0; i < gs_count; ++i) {
            const uint64_t clip_seed = mix_seed(seed, static_cast<uint64_t>(i));
            const auto spec = synth::random_spec(gs_height, gs_width, gs_length, gs_max_speed, gs_sprites, clip_seed);
            const auto clip = synth::make_clip(spec, clip_seed);
            char name[32];
            std::snprintf(name, sizeof(name), "video_%03d", i);
            synth::export_clip(clip.frames, clip.flows, out / name);
        }
        std::ofstream(out / "resolved_config.txt")
            << "count = " << gs_count << "\nlength = " << gs_length << "\nheight = " << gs_height
            << "\nwidth = " << gs_width << "\nmax_speed = " << gs_max_speed << "\nsprites = " << gs_sprites
            << "\nseed = " << seed << '\n';
        write_meta(out, "gen-synth", started);
        std::cout << "wrote " << gs_count << " clips to " << out << '\n';
        return 0;
    }

    if (train1->parsed()) {
        Trainer trainer(resolve_config(1, t1));
        const auto& cfg = trainer.config();
        const auto data = load_image_dataset(t1_data, cfg.generator.height, cfg.generator.width);
        RunOptions opts;
        opts.out_dir = t1.out;
        if (!t1.checkpoint.empty()) opts.init = Checkpoint::load(t1.checkpoint);
        const auto total = trainer.total_steps(data.size());
        opts.on_step = [&](const StepRecord& r) { log_step(r, total); };
        train_stage1(trainer, data, opts);
        write_meta(t1.out, "train-stage1", started);
        return 0;
    }

    if (train2->parsed()) {
        if (t2.checkpoint.empty()) throw UsageError("train-stage2 needs --checkpoint with stage-1 weights");
        Trainer trainer(resolve_config(2, t2));
        const auto data = load_video_dataset(t2_data, t2.flows);
        RunOptions opts;
        opts.out_dir = t2.out;
        opts.init = Checkpoint::load(t2.checkpoint);
        size_t usable = 0;
        for (const auto& v : data.videos) usable += v.length() >= trainer.config().window_T ? 1 : 0;
        const auto total = trainer.total_steps(std::max<size_t>(usable, 1));
        opts.on_step = [&](const StepRecord& r) { log_step(r, total); };
        train_stage2(trainer, data, opts);
        write_meta(t2.out, "train-stage2", started);
        return 0;
    }

    if (colorize->parsed()) {
        if (cz.flows.empty() && !cz.zero_flow) throw UsageError("colorize needs --flows DIR or --zero-flow");
        const auto ckpt = load_checkpoint(cz.checkpoint);
        auto gen = generator_from_checkpoint(ckpt);
        const auto files = io::list_pngs(cz_input);
        if (files.empty()) throw DataError("no PNG frames in " + cz_input);
        std::vector<Frame> grays;
        for (const auto& f : files) grays.push_back(as_gray(io::read_png(f)));
        std::vector<FlowField> flows;
        if (cz.flows.empty()) {
            warn("colorize: --zero-flow set, running the recurrence without motion compensation");
            for (size_t k = 1; k < files.size(); ++k) flows.push_back(FlowField::zeros(grays[0].height(), grays[0].width()));
        } else {
            for (size_t k = 1; k < files.size(); ++k) {
                const auto p = fs::path(cz.flows) / io::flow_filename(files[k - 1], files[k]);
                if (!fs::exists(p)) throw DataError("missing flow file " + p.string());
                flows.push_back(io::read_flo(p));
            }
        }
        const auto out = colorize_clip(gen, VideoClip(std::move(grays)), flows);
        fs::create_directories(cz.out);
        for (size_t i = 0; i < files.size(); ++i) io::write_png(fs::path(cz.out) / files[i].filename(), out[i]);
        write_resolved(cz.out, {{"input", cz_input},
                                {"checkpoint", cz.checkpoint},
                                {"flows", cz.flows},
                                {"zero_flow", cz.zero_flow ? "true" : "false"},
                                {"generator", ckpt.metadata.at("generator").dump()}});
        write_meta(cz.out, "colorize", started);
        return 0;
    }

    if (colorize_img->parsed()) {
        const auto ckpt = load_checkpoint(ci.checkpoint);
        auto gen = generator_from_checkpoint(ckpt);
        std::vector<fs::path> files;
        if (fs::is_directory(ci_input)) {
            files = io::list_pngs(ci_input);
        } else {
            files.push_back(ci_input);
        }
        if (files.empty()) throw DataError("no PNG images in " + ci_input);
        fs::create_directories(ci.out);
        for (const auto& f : files) {
            io::write_png(fs::path(ci.out) / f.filename(), colorize_image(gen, as_gray(io::read_png(f))));
        }
        write_resolved(ci.out, {{"input", ci_input},
                                {"checkpoint", ci.checkpoint},
                                {"generator", ckpt.metadata.at("generator").dump()}});
        write_meta(ci.out, "colorize-image", started);
        return 0;
    }

    if (evaluate->parsed()) {
        EvaluateOptions opts;
        opts.mask_threshold = ev_threshold;
        const auto report = evaluate_dirs(ev_results, ev_gt, ev.flows.empty() ? fs::path(ev_gt) : fs::path(ev.flows), opts);
        std::cout << report.to_table();
        if (!ev.out.empty()) {
            fs::create_directories(ev.out);
            std::ofstream(fs::path(ev.out) / "metrics.csv") << report.to_csv();
            write_resolved(ev.out, {{"results", ev_results},
                                    {"gt", ev_gt},
                                    {"flows", ev.flows.empty() ? ev_gt : ev.flows},
                                    {"mask_threshold", std::to_string(ev_threshold)}});
            write_meta(ev.out, "evaluate", started);
        }
        return 0;
    }

    if (ablate->parsed()) {
        const auto base = resolve_config(2, ab);
        const AblationSuite suite;
        if (ab_configs.empty()) ab_configs = suite.names();
        const auto train = load_video_dataset(ab_data);
        std::vector<synth::SynthClip> held_out;
        for (int i = 0; i < ab_heldout; ++i) {
            const uint64_t s = mix_seed(base.seed ^ 0x484F4C44ULL, static_cast<uint64_t>(i));
            held_out.push_back(synth::make_clip(
                synth::random_spec(base.generator.height, base.generator.width, ab_heldout_length, 2, 1, s), s));
        }
        const auto table = run_ablation(suite, ab_configs, train, held_out, base, {ab_s1, ab_s2},
                                        [](const std::string& n) { std::cout << "running " << n << '\n'; });
        fs::create_directories(ab.out);
        std::ofstream(fs::path(ab.out) / "ablation.csv") << table.to_csv();
        std::ofstream(fs::path(ab.out) / "resolved_config.txt") << to_config_text(base);
        write_meta(ab.out, "ablate", started);
        std::cout << table.to_csv();
        return 0;
    }
    return 1;
}

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const c10::Error& e) {
        std::cerr << "data error: " << e.what_without_backtrace() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 2;
    }
}
