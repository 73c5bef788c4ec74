#pragma once

// Two-stage training: stage 1 colorizes single images, stage 2 trains the
// recurrent generator against the critic on windows of T frames.

#include <torch/torch.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "vcgan/checkpoint.hpp"
#include "vcgan/discriminator.hpp"
#include "vcgan/errors.hpp"
#include "vcgan/flow_warp.hpp"
#include "vcgan/generator.hpp"
#include "vcgan/image_io.hpp"
#include "vcgan/losses.hpp"
#include "vcgan/synthdata.hpp"
#include "vcgan/train_config.hpp"

namespace vcgan {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Random helpers

// splitmix64 finalizer, used to derive independent per-step seeds.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Unbiased integer in [0, n).
inline uint64_t uniform_index(std::mt19937_64& rng, uint64_t n) {
    if (n == 0) throw UsageError("uniform_index: empty range");
    const uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % n;
    uint64_t r;
    do {
        r = rng();
    } while (r >= limit);
    return r % n;
}

inline std::vector<size_t> seeded_permutation(size_t n, uint64_t seed) {
    std::vector<size_t> perm(n);
    for (size_t i = 0; i < n; ++i) perm[i] = i;
    std::mt19937_64 rng(seed);
    for (size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
    return perm;
}

// ---------------------------------------------------------------------------
// Datasets

struct ImageDataset {
    std::vector<torch::Tensor> rgb;   // [3,H,W] in [-1,1]
    std::vector<torch::Tensor> gray;  // [1,H,W]

    size_t size() const { return rgb.size(); }

    void add(const Frame& frame) {
        if (frame.color_space() != ColorSpace::rgb) throw DataError("image dataset expects RGB frames");
        rgb.push_back(frame.data().to(torch::kFloat32));
        gray.push_back(gray_from_rgb(rgb.back()));
    }
};

/// One training video: RGB frames plus the adjacent flows. Flows for remote
/// pairs come from `pair_flows` when supplied, otherwise from composing
/// adjacent flows.
struct VideoSequence {
    std::string name;
    torch::Tensor frames;               // [L,3,H,W] in [-1,1]
    std::vector<torch::Tensor> flows;   // flows[k]: frame k -> k+1, [2,H,W]
    PairTensors pair_flows;             // optional, 1-based over the whole video

    int64_t length() const { return frames.defined() ? frames.size(0) : 0; }

    static VideoSequence from_clip(std::string name, const VideoClip& clip, const std::vector<FlowField>& flows,
                                   PairTensors pair_flows = {}) {
        if (clip.color_space() != ColorSpace::rgb) throw DataError("video '" + name + "' must be RGB");
        if (flows.size() + 1 != clip.length()) {
            throw DataError("video '" + name + "': " + std::to_string(clip.length()) + " frames need " +
                            std::to_string(clip.length() - 1) + " flows, got " + std::to_string(flows.size()));
        }
        VideoSequence v;
        v.name = std::move(name);
        v.frames = clip.stacked().to(torch::kFloat32);
        for (const auto& f : flows) v.flows.push_back(f.data().to(torch::kFloat32));
        v.pair_flows = std::move(pair_flows);
        return v;
    }

    /// Backward flow from frame m to frame t (0-based, m < t).
    torch::Tensor flow_between(int64_t m, int64_t t) const {
        if (m < 0 || t >= length() || m >= t) {
            throw UsageError("flow_between: need 0 <= m < t < " + std::to_string(length()));
        }
        auto it = pair_flows.find({static_cast<int>(m) + 1, static_cast<int>(t) + 1});
        if (it != pair_flows.end()) return it->second;
        if (flows.size() + 1 != static_cast<size_t>(length())) {
            throw DataError("video '" + name + "' lacks adjacent flows");
        }
        auto flow = flows[static_cast<size_t>(m)];
        for (int64_t k = m + 1; k < t; ++k) flow = compose_flows(flows[static_cast<size_t>(k)], flow);
        return flow;
    }
};

struct VideoDataset {
    std::vector<VideoSequence> videos;

    size_t size() const { return videos.size(); }
};

/// Videos from `root`: a directory of frames, or one subdirectory per video.
/// Flow files live beside the frames unless `flow_root` is given.
inline VideoDataset load_video_dataset(const fs::path& root, const fs::path& flow_root = {}) {
    if (!fs::is_directory(root)) throw DataError("dataset directory " + root.string() + " does not exist");
    VideoDataset ds;
    auto add = [&](const fs::path& dir, const fs::path& flows) {
        auto clip = synth::import_clip(dir, flows);
        ds.videos.push_back(VideoSequence::from_clip(dir.filename().string(), clip.frames, clip.flows));
    };
    if (!io::list_pngs(root).empty()) {
        add(root, flow_root);
    } else {
        for (const auto& sub : io::list_subdirs(root)) {
            add(sub, flow_root.empty() ? fs::path{} : flow_root / sub.filename());
        }
    }
    if (ds.videos.empty()) throw DataError("no videos found in " + root.string());
    return ds;
}

/// Every PNG under `root` (one level of subdirectories), resized to h x w.
inline ImageDataset load_image_dataset(const fs::path& root, int64_t height, int64_t width) {
    if (!fs::is_directory(root)) throw DataError("dataset directory " + root.string() + " does not exist");
    std::vector<fs::path> files = io::list_pngs(root);
    for (const auto& sub : io::list_subdirs(root)) {
        auto more = io::list_pngs(sub);
        files.insert(files.end(), more.begin(), more.end());
    }
    ImageDataset ds;
    for (const auto& f : files) {
        auto frame = io::read_png(f);
        if (frame.color_space() != ColorSpace::rgb) throw DataError(f.string() + " is not an RGB image");
        if (frame.height() != height || frame.width() != width) frame = io::resize(frame, height, width);
        ds.add(frame);
    }
    if (ds.size() == 0) throw DataError("no PNG images found in " + root.string());
    return ds;
}

inline ImageDataset images_from_videos(const VideoDataset& videos) {
    ImageDataset ds;
    for (const auto& v : videos.videos) {
        for (int64_t i = 0; i < v.length(); ++i) ds.add(Frame(v.frames[i], ColorSpace::rgb));
    }
    return ds;
}

/// Seeded synthetic videos with exact remote-pair flows.
inline VideoDataset make_synthetic_dataset(size_t count, int64_t height, int64_t width, int length, uint64_t seed,
                                           int max_speed = 2, int sprite_count = 1) {
    VideoDataset ds;
    for (size_t i = 0; i < count; ++i) {
        const uint64_t clip_seed = mix_seed(seed, i);
        const auto spec = synth::random_spec(height, width, length, max_speed, sprite_count, clip_seed);
        auto clip = synth::make_clip(spec, clip_seed);
        ds.videos.push_back(
            VideoSequence::from_clip("synth_" + std::to_string(i), clip.frames, clip.flows, clip.pair_flows));
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Window sampling

/// T consecutive frames with everything the temporal losses need. Pair keys
/// are 1-based within the window.
struct ClipSample {
    int64_t start = 0;
    std::vector<torch::Tensor> frames;       // RGB [3,H,W]
    std::vector<torch::Tensor> grays;        // [1,H,W]
    std::vector<torch::Tensor> flows;        // adjacent, T-1 entries
    std::vector<torch::Tensor> masks;        // adjacent soft masks [1,H,W]
    PairTensors pair_flows;                  // (m,t), m <= t-2: (T-1)(T-2)/2 entries
    PairTensors pair_masks;
};

// Soft mask from ground truth: exp(-alpha * |z_t - W(O_{m->t}, z_m)|^2) in [0,1] scale.
inline torch::Tensor ground_truth_mask(const torch::Tensor& target, const torch::Tensor& source,
                                       const torch::Tensor& flow, double alpha) {
    torch::NoGradGuard no_grad;
    return nonocclusion_mask(to_unit_range(target), to_unit_range(warp(source, flow)), alpha);
}

/// Picks a start uniformly in [0, L-T] and assembles the window.
inline ClipSample sample_window(const VideoSequence& video, int T, std::mt19937_64& rng, double alpha = 50.0) {
    if (T < 1) throw UsageError("sample_window: T must be >= 1");
    if (video.length() < T) {
        throw DataError("sample_window: video '" + video.name + "' has " + std::to_string(video.length()) +
                        " frames, fewer than T = " + std::to_string(T));
    }
    ClipSample s;
    s.start = static_cast<int64_t>(uniform_index(rng, static_cast<uint64_t>(video.length() - T + 1)));
    torch::NoGradGuard no_grad;
    for (int i = 0; i < T; ++i) {
        s.frames.push_back(video.frames[s.start + i]);
        s.grays.push_back(gray_from_rgb(s.frames.back()));
    }
    for (int i = 1; i < T; ++i) {
        auto flow = video.flow_between(s.start + i - 1, s.start + i);
        s.masks.push_back(ground_truth_mask(s.frames[static_cast<size_t>(i)], s.frames[static_cast<size_t>(i - 1)],
                                            flow, alpha));
        s.flows.push_back(flow);
    }
    for (const auto& [m, t] : dense_long_term_pairs(T)) {
        auto flow = video.flow_between(s.start + m - 1, s.start + t - 1);
        s.pair_masks[{m, t}] = ground_truth_mask(s.frames[static_cast<size_t>(t - 1)],
                                                 s.frames[static_cast<size_t>(m - 1)], flow, alpha);
        s.pair_flows[{m, t}] = flow;
    }
    return s;
}

inline ClipSample sample_window(const VideoClip& clip, const std::vector<FlowField>& flows, int T,
                                std::mt19937_64& rng, double alpha = 50.0) {
    return sample_window(VideoSequence::from_clip("clip", clip, flows), T, rng, alpha);
}

// ---------------------------------------------------------------------------
// Trainer

struct StepRecord {
    int64_t step = 0;   // 1-based index of the completed step
    int64_t epoch = 0;  // 0-based
    double lr_g = 0.0;
    double lr_d = 0.0;
    std::array<double, 5> terms{};  // kTermNames order
    double total = 0.0;
    std::optional<double> critic;   // stage 2 critic loss, when the critic was updated
};

/// CSV writer for per-step losses.
class LossLog {
public:
    explicit LossLog(const fs::path& path) : out_(path) {
        if (!out_) throw DataError("cannot write loss log " + path.string());
        out_ << "step,epoch,lr_g,lr_d";
        for (const auto* name : kTermNames) out_ << ',' << name;
        out_ << ",total,critic\n";
    }

    void write(const StepRecord& r) {
        out_.precision(9);
        out_ << r.step << ',' << r.epoch << ',' << r.lr_g << ',' << r.lr_d;
        for (double v : r.terms) out_ << ',' << v;
        out_ << ',' << r.total << ',';
        if (r.critic) out_ << *r.critic;
        out_ << '\n';
        out_.flush();
    }

private:
    std::ofstream out_;
};

class Trainer {
public:
    explicit Trainer(TrainConfig config) : config_(std::move(config)) {
        config_.validate();
        torch::manual_seed(config_.seed);
        generator_ = Generator(config_.generator);
        critic_ = Discriminator(config_.discriminator);
        perceptual_->eval();
        auto adam = [&](double lr) {
            return torch::optim::AdamOptions(lr).betas({config_.adam_beta1, config_.adam_beta2});
        };
        opt_g_ = std::make_unique<torch::optim::Adam>(generator_->parameters(), adam(config_.lr_g));
        opt_d_ = std::make_unique<torch::optim::Adam>(critic_->parameters(), adam(config_.lr_d));
    }

    const TrainConfig& config() const { return config_; }
    Generator& generator() { return generator_; }
    Discriminator& critic() { return critic_; }
    PerceptualNet& perceptual() { return perceptual_; }
    int64_t step() const { return step_; }

    int64_t steps_per_epoch(size_t dataset_size) const {
        if (config_.steps_per_epoch > 0) return config_.steps_per_epoch;
        const auto b = static_cast<size_t>(config_.batch_size);
        return static_cast<int64_t>(std::max<size_t>(1, (dataset_size + b - 1) / b));
    }

    int64_t total_steps(size_t dataset_size) const {
        int64_t total = config_.epochs * steps_per_epoch(dataset_size);
        if (config_.max_steps > 0) total = std::min(total, config_.max_steps);
        return total;
    }

    /// One stage-1 update on a batch of images (image mode, forward_first only).
    StepRecord step_stage1(const ImageDataset& data) {
        if (data.size() == 0) throw DataError("stage 1: empty dataset");
        const int64_t spe = steps_per_epoch(data.size());
        const int64_t epoch = step_ / spe;
        const auto perm = seeded_permutation(data.size(), mix_seed(config_.seed, static_cast<uint64_t>(epoch)));
        std::vector<torch::Tensor> rgb, gray;
        for (int64_t b = 0; b < config_.batch_size; ++b) {
            const auto pos = static_cast<size_t>((step_ % spe) * config_.batch_size + b) % data.size();
            rgb.push_back(data.rgb[perm[pos]]);
            gray.push_back(data.gray[perm[pos]]);
        }
        const auto z = torch::stack(rgb);
        const auto x = torch::stack(gray);

        StepRecord rec = begin_step(epoch);
        generator_->train();
        opt_g_->zero_grad();
        const auto s = generator_->forward_first(x);
        LossTerms terms;
        terms.l1 = vcgan::l1_loss(s, z);
        terms.perceptual = term_or_value(config_.weights.perceptual,
                                         [&] { return perceptual_loss(s, z, perceptual_); });
        const auto total = weighted_total(terms, config_.weights);
        check_finite(total, "stage 1 loss");
        total.backward();
        opt_g_->step();
        return finish_step(rec, LossBreakdown{total, terms});
    }

    /// One stage-2 iteration: a critic update on detached outputs, then a
    /// generator update against the updated critic.
    StepRecord step_stage2(const VideoDataset& data) {
        const int T = config_.window_T;
        std::vector<const VideoSequence*> usable;
        for (const auto& v : data.videos) {
            if (v.length() >= T) usable.push_back(&v);
        }
        if (usable.empty()) throw DataError("stage 2: no video has at least window_T = " + std::to_string(T) + " frames");
        const int64_t spe = steps_per_epoch(usable.size());
        const int64_t epoch = step_ / spe;

        std::mt19937_64 rng(mix_seed(config_.seed ^ 0x5354414745320000ULL, static_cast<uint64_t>(step_)));
        std::vector<ClipSample> samples;
        for (int64_t b = 0; b < config_.batch_size; ++b) {
            const auto& video = *usable[uniform_index(rng, usable.size())];
            samples.push_back(sample_window(video, T, rng, config_.alpha));
        }
        const auto batch = stack_samples(samples, T);

        StepRecord rec = begin_step(epoch);
        generator_->train();
        auto outputs = colorize_sequence(generator_, batch.grays, batch.flows);
        const auto fake = torch::cat(outputs, 0);
        const auto real = torch::cat(batch.frames, 0);

        if (config_.weights.gan > 0.0) {
            critic_->train();
            opt_d_->zero_grad();
            auto d_loss = wgan_d_loss(critic_->forward(fake.detach()), critic_->forward(real));
            check_finite(d_loss, "critic loss");
            d_loss.backward();
            opt_d_->step();
            rec.critic = d_loss.item<double>();
        }

        opt_g_->zero_grad();
        critic_->eval();
        LossTerms terms;
        terms.l1 = term_or_value(config_.weights.l1, [&] { return vcgan::l1_loss(fake, real); });
        terms.perceptual =
            term_or_value(config_.weights.perceptual, [&] { return perceptual_loss(fake, real, perceptual_); });
        terms.gan = term_or_value(config_.weights.gan, [&] { return wgan_g_loss(critic_->forward(fake)); });
        terms.short_term = term_or_value(config_.weights.short_term, [&] {
            return short_term_loss(outputs, batch.flows, batch.masks, config_.temporal).value;
        });
        terms.long_term = term_or_value(config_.weights.long_term, [&] {
            return long_term_loss(outputs, batch.pair_flows, batch.pair_masks, config_.temporal).value;
        });
        const auto objective = stage2_objective(terms, config_.weights);
        check_finite(objective.total, "stage 2 loss");
        objective.total.backward();
        opt_g_->step();
        // The critic's gradients from the generator pass are discarded.
        opt_d_->zero_grad();
        return finish_step(rec, objective);
    }

    /// Loads generator weights only (stage-2 initialization from stage 1).
    void load_generator(const Checkpoint& ckpt) { restore_module(ckpt, "generator.", *generator_); }

    /// Full state for resuming: weights, critic, optimizer moments, step.
    Checkpoint to_checkpoint() const {
        Checkpoint ckpt;
        ckpt.metadata["stage"] = config_.stage;
        ckpt.metadata["step"] = step_;
        ckpt.metadata["config"] = to_json(config_);
        ckpt.metadata["generator"] = config_.generator;
        ckpt.metadata["discriminator"] = config_.discriminator;
        store_module(ckpt, "generator.", *generator_);
        store_adam(ckpt, "adam_g.", *opt_g_, *generator_);
        if (config_.stage == 2) {
            store_module(ckpt, "critic.", *critic_);
            store_adam(ckpt, "adam_d.", *opt_d_, *critic_);
        }
        return ckpt;
    }

    /// Resumes from a checkpoint written by the same stage.
    void resume(const Checkpoint& ckpt) {
        if (ckpt.metadata.value("stage", 0) != config_.stage) {
            throw DataError("checkpoint is from stage " + std::to_string(ckpt.metadata.value("stage", 0)) +
                            ", cannot resume stage " + std::to_string(config_.stage));
        }
        restore_module(ckpt, "generator.", *generator_);
        restore_adam(ckpt, "adam_g.", *opt_g_, *generator_);
        if (config_.stage == 2) {
            restore_module(ckpt, "critic.", *critic_);
            restore_adam(ckpt, "adam_d.", *opt_d_, *critic_);
        }
        step_ = ckpt.metadata.value("step", int64_t{0});
    }

private:
    struct Batch {
        std::vector<torch::Tensor> frames, grays, flows, masks;
        PairTensors pair_flows, pair_masks;
    };

    static Batch stack_samples(const std::vector<ClipSample>& samples, int T) {
        Batch b;
        auto stack = [&](auto member, size_t i) {
            std::vector<torch::Tensor> items;
            for (const auto& s : samples) items.push_back((s.*member)[i]);
            return torch::stack(items);
        };
        for (int i = 0; i < T; ++i) {
            b.frames.push_back(stack(&ClipSample::frames, static_cast<size_t>(i)));
            b.grays.push_back(stack(&ClipSample::grays, static_cast<size_t>(i)));
        }
        for (int i = 0; i + 1 < T; ++i) {
            b.flows.push_back(stack(&ClipSample::flows, static_cast<size_t>(i)));
            b.masks.push_back(stack(&ClipSample::masks, static_cast<size_t>(i)));
        }
        for (const auto& pair : dense_long_term_pairs(T)) {
            std::vector<torch::Tensor> flows, masks;
            for (const auto& s : samples) {
                flows.push_back(s.pair_flows.at(pair));
                masks.push_back(s.pair_masks.at(pair));
            }
            b.pair_flows[pair] = torch::stack(flows);
            b.pair_masks[pair] = torch::stack(masks);
        }
        return b;
    }

    // Zero-weighted terms are still evaluated for the log, without a graph.
    template <typename F>
    static torch::Tensor term_or_value(double weight, F&& compute) {
        if (weight > 0.0) return compute();
        torch::NoGradGuard no_grad;
        return compute();
    }

    static void check_finite(const torch::Tensor& t, const char* what) {
        if (!torch::isfinite(t).all().item<bool>()) throw NumericError(std::string(what) + " is not finite");
    }

    StepRecord begin_step(int64_t epoch) {
        StepRecord rec;
        rec.epoch = epoch;
        rec.lr_g = config_.lr_g_at(epoch);
        rec.lr_d = config_.lr_d_at(epoch);
        set_lr(*opt_g_, rec.lr_g);
        set_lr(*opt_d_, rec.lr_d);
        return rec;
    }

    StepRecord finish_step(StepRecord rec, const LossBreakdown& losses) {
        const auto arr = losses.terms.as_array();
        for (size_t i = 0; i < arr.size(); ++i) rec.terms[i] = arr[i].defined() ? arr[i].item<double>() : 0.0;
        rec.total = losses.total.item<double>();
        rec.step = ++step_;
        return rec;
    }

    static void set_lr(torch::optim::Adam& opt, double lr) {
        for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
    }

    TrainConfig config_;
    Generator generator_{nullptr};
    Discriminator critic_{nullptr};
    PerceptualNet perceptual_{PerceptualConfig{}};
    std::unique_ptr<torch::optim::Adam> opt_g_, opt_d_;
    int64_t step_ = 0;
};

// ---------------------------------------------------------------------------
// Run drivers

struct RunOptions {
    fs::path out_dir;                                  // empty: no files written
    std::function<void(const StepRecord&)> on_step;    // optional observer
    std::optional<Checkpoint> init;                    // stage 2: stage-1 weights or a stage-2 resume point
};

namespace detail {

template <typename StepFn>
Checkpoint run_loop(Trainer& trainer, int64_t total, const RunOptions& options, StepFn&& step) {
    std::optional<LossLog> log;
    if (!options.out_dir.empty()) {
        fs::create_directories(options.out_dir);
        std::ofstream(options.out_dir / "resolved_config.txt") << to_config_text(trainer.config());
        log.emplace(options.out_dir / ("stage" + std::to_string(trainer.config().stage) + "_loss.csv"));
    }
    const auto every = trainer.config().checkpoint_every;
    while (trainer.step() < total) {
        const auto rec = step();
        if (log) log->write(rec);
        if (options.on_step) options.on_step(rec);
        if (!options.out_dir.empty() && every > 0 && rec.step % every == 0 && rec.step < total) {
            trainer.to_checkpoint().save(options.out_dir / ("checkpoint_step" + std::to_string(rec.step) + ".ckpt"));
        }
    }
    auto ckpt = trainer.to_checkpoint();
    if (!options.out_dir.empty()) {
        ckpt.save(options.out_dir / ("stage" + std::to_string(trainer.config().stage) + ".ckpt"));
    }
    return ckpt;
}

}  // namespace detail

/// Stage 1: image-mode training with L1 and perceptual terms.
inline Checkpoint train_stage1(Trainer& trainer, const ImageDataset& data, const RunOptions& options = {}) {
    if (trainer.config().stage != 1) throw UsageError("train_stage1 needs stage = 1");
    if (data.size() == 0) throw DataError("stage 1: empty dataset");
    if (options.init) trainer.resume(*options.init);
    return detail::run_loop(trainer, trainer.total_steps(data.size()), options,
                            [&] { return trainer.step_stage1(data); });
}

/// Stage 2: recurrent training with the full objective, starting from a
/// stage-1 checkpoint (generator weights) or resuming a stage-2 checkpoint.
inline Checkpoint train_stage2(Trainer& trainer, const VideoDataset& data, const RunOptions& options) {
    if (trainer.config().stage != 2) throw UsageError("train_stage2 needs stage = 2");
    if (!options.init) throw UsageError("train_stage2 needs an initial checkpoint");
    if (options.init->metadata.value("stage", 0) == 2) {
        trainer.resume(*options.init);
    } else {
        trainer.load_generator(*options.init);
    }
    size_t usable = 0;
    for (const auto& v : data.videos) {
        if (v.length() >= trainer.config().window_T) {
            ++usable;
        } else {
            warn("skipping video '" + v.name + "': " + std::to_string(v.length()) + " frames < window_T = " +
                 std::to_string(trainer.config().window_T));
        }
    }
    if (usable == 0) throw DataError("stage 2: no usable videos");
    return detail::run_loop(trainer, trainer.total_steps(usable), options, [&] { return trainer.step_stage2(data); });
}

/// Rebuilds a generator from a checkpoint's embedded configuration.
inline Generator generator_from_checkpoint(const Checkpoint& ckpt) {
    if (!ckpt.metadata.contains("generator")) throw DataError("checkpoint lacks a generator configuration");
    Generator gen(ckpt.metadata.at("generator").get<GeneratorConfig>());
    restore_module(ckpt, "generator.", *gen);
    gen->eval();
    return gen;
}

}  // namespace vcgan
