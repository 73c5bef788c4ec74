#pragma once

// Ablation settings as configuration toggles, and a harness that trains each
// one under a fixed budget and scores it on held-out synthetic clips.

#include <torch/torch.h>

#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vcgan/errors.hpp"
#include "vcgan/metrics.hpp"
#include "vcgan/synthdata.hpp"
#include "vcgan/training.hpp"

namespace vcgan {

enum class StageSelection {
    full,          // stage 1 then stage 2 for the whole budget
    stage1_only,   // the stage-1 checkpoint is evaluated directly
    intermediate,  // stage 2 stopped at half the budget
};

struct AblationSetting {
    std::string name;
    std::string description;
    std::vector<std::string> terms;  // objective terms switched on
    StageSelection selection = StageSelection::full;
    std::function<void(TrainConfig&)> apply;  // edits a stage-2 config in place
};

namespace detail {

inline std::function<void(TrainConfig&)> loss_set(bool l1, bool lp, bool lg, bool st, bool lt,
                                                  LongTermMode mode = LongTermMode::dense) {
    return [=](TrainConfig& c) {
        if (!l1) c.weights.l1 = 0.0;
        if (!lp) c.weights.perceptual = 0.0;
        if (!lg) c.weights.gan = 0.0;
        if (!st) c.weights.short_term = 0.0;
        if (!lt) c.weights.long_term = 0.0;
        c.temporal.long_term_mode = mode;
    };
}

}  // namespace detail

/// One entry per ablation row, plus the full model.
inline std::vector<AblationSetting> standard_settings() {
    using detail::loss_set;
    const auto fa = LongTermMode::first_anchor;
    return {
        {"l(1)", "only L1 as a baseline", {"L1"}, StageSelection::full, loss_set(true, false, false, false, false)},
        {"l(2)", "L1 and short-term loss as a baseline", {"L1", "Lst"}, StageSelection::full,
         loss_set(true, false, false, true, false)},
        {"l(3.1)", "w/o L1", {"Lp", "LG", "Lst", "Ldlt"}, StageSelection::full, loss_set(false, true, true, true, true)},
        {"l(3.2)", "w/o Lp", {"L1", "LG", "Lst", "Ldlt"}, StageSelection::full, loss_set(true, false, true, true, true)},
        {"l(3.3)", "w/o LG", {"L1", "Lp", "Lst", "Ldlt"}, StageSelection::full, loss_set(true, true, false, true, true)},
        {"l(3.4)", "w/o Lp, LG", {"L1", "Lst", "Ldlt"}, StageSelection::full, loss_set(true, false, false, true, true)},
        {"l(3.5)", "w/o L1, LG", {"Lp", "Lst", "Ldlt"}, StageSelection::full, loss_set(false, true, false, true, true)},
        {"l(3.6)", "w/o L1, Lp", {"LG", "Lst", "Ldlt"}, StageSelection::full, loss_set(false, false, true, true, true)},
        {"l(3.7)", "w/o L1, Lp, LG", {"Lst", "Ldlt"}, StageSelection::full, loss_set(false, false, false, true, true)},
        {"l(4.1)", "w/o Lst", {"L1", "Lp", "LG", "Ldlt"}, StageSelection::full, loss_set(true, true, true, false, true)},
        {"l(4.2)", "w/o Ldlt", {"L1", "Lp", "LG", "Lst"}, StageSelection::full, loss_set(true, true, true, true, false)},
        {"l(4.3)", "w/o Lst, Ldlt", {"L1", "Lp", "LG"}, StageSelection::full, loss_set(true, true, true, false, false)},
        {"l(4.4)", "first-anchor Llt instead of Lst and Ldlt", {"L1", "Lp", "LG", "Llt"}, StageSelection::full,
         loss_set(true, true, true, false, true, fa)},
        {"l(4.5)", "first-anchor Llt instead of Ldlt", {"L1", "Lp", "LG", "Lst", "Llt"}, StageSelection::full,
         loss_set(true, true, true, true, true, fa)},
        {"f(1)", "w/o global feature extractor", {"L1", "Lp", "LG", "Lst", "Ldlt"}, StageSelection::full,
         [](TrainConfig& c) { c.generator.use_global_extractor = false; }},
        {"f(2)", "w/o placeholder extractor and recurrent connection", {"L1", "Lp", "LG", "Lst", "Ldlt"},
         StageSelection::full, [](TrainConfig& c) { c.generator.use_placeholder_extractor = false; }},
        {"f(3)", "w/o both feature extractors", {"L1", "Lp", "LG", "Lst", "Ldlt"}, StageSelection::full,
         [](TrainConfig& c) {
             c.generator.use_global_extractor = false;
             c.generator.use_placeholder_extractor = false;
         }},
        {"t(1)", "stage-1 checkpoint, L1 and Lp only", {"L1", "Lp"}, StageSelection::stage1_only, [](TrainConfig&) {}},
        {"t(2)", "intermediate stage-2 checkpoint (half budget)", {"L1", "Lp", "LG", "Lst", "Ldlt"},
         StageSelection::intermediate, [](TrainConfig&) {}},
        {"full", "all terms, both stages", {"L1", "Lp", "LG", "Lst", "Ldlt"}, StageSelection::full,
         [](TrainConfig&) {}},
    };
}

/// Coefficient-sensitivity rows, runnable through the same harness.
inline std::vector<AblationSetting> sensitivity_settings() {
    auto w = [](double l1, double lp, double lg, double st, double dlt) {
        return [=](TrainConfig& c) { c.weights = LossWeights{l1, lp, lg, st, dlt}; };
    };
    const std::vector<std::string> all{"L1", "Lp", "LG", "Lst", "Ldlt"};
    return {
        {"s(1)", "all coefficients 1", all, StageSelection::full, w(1, 1, 1, 1, 1)},
        {"s(2)", "double lambda_1", all, StageSelection::full, w(20, 5, 1, 3, 5)},
        {"s(3)", "double lambda_p", all, StageSelection::full, w(10, 10, 1, 3, 5)},
        {"s(4)", "double lambda_G", all, StageSelection::full, w(10, 5, 2, 3, 5)},
        {"s(5)", "double lambda_st", all, StageSelection::full, w(10, 5, 1, 6, 5)},
        {"s(6)", "double lambda_dlt", all, StageSelection::full, w(10, 5, 1, 3, 10)},
        {"s(7)", "double lambda_1, lambda_p, lambda_G", all, StageSelection::full, w(20, 10, 2, 3, 5)},
        {"s(8)", "double lambda_st, lambda_dlt", all, StageSelection::full, w(10, 5, 1, 6, 10)},
    };
}

class AblationSuite {
public:
    AblationSuite() {
        for (auto& s : standard_settings()) add(std::move(s));
        for (auto& s : sensitivity_settings()) add(std::move(s));
    }

    void add(AblationSetting setting) {
        if (index_.count(setting.name)) throw UsageError("duplicate ablation setting " + setting.name);
        index_[setting.name] = settings_.size();
        settings_.push_back(std::move(setting));
    }

    const AblationSetting& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw UsageError("unknown ablation config '" + name + "'");
        return settings_[it->second];
    }

    const std::vector<AblationSetting>& settings() const { return settings_; }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& s : settings_) out.push_back(s.name);
        return out;
    }

    /// Stage-2 config for `name` derived from `base`.
    TrainConfig stage2_config(const std::string& name, const TrainConfig& base) const {
        TrainConfig c = base;
        c.stage = 2;
        at(name).apply(c);
        c.validate();
        return c;
    }

private:
    std::vector<AblationSetting> settings_;
    std::map<std::string, size_t> index_;
};

// ---------------------------------------------------------------------------
// Held-out scoring

struct HeldOutScore {
    double psnr = 0.0;
    double ssim = 0.0;
    double warp_error = 0.0;         // adjacent pairs, exact binary masks
    double remote_warp_error = 0.0;  // pairs with gap >= remote_gap
};

/// Colorizes each clip from its grayscale with exact adjacent flows and
/// scores the result against ground truth.
inline HeldOutScore score_clips(Generator& generator, const std::vector<synth::SynthClip>& clips, int remote_gap = 5) {
    if (clips.empty()) throw DataError("score_clips: no held-out clips");
    generator->eval();
    std::vector<double> psnrs, ssims, warps, remotes;
    for (const auto& clip : clips) {
        std::vector<Frame> grays;
        for (const auto& f : clip.frames.frames()) grays.push_back(to_grayscale(f));
        const auto out = colorize_clip(generator, VideoClip(std::move(grays)), clip.flows);
        std::vector<torch::Tensor> unit;
        for (size_t t = 0; t < out.length(); ++t) {
            psnrs.push_back(psnr(out[t], clip.frames[t]));
            ssims.push_back(ssim(out[t], clip.frames[t]));
            unit.push_back(to_unit_range(out[t].data()));
        }
        warps.push_back(warp_error(out, clip.flows, clip.masks).value);
        const auto remote = pair_warp_error_unit(unit, clip.pair_flows, clip.pair_masks, remote_gap);
        if (!remote.per_step.empty()) remotes.push_back(remote.value);
    }
    return {MetricReport::mean(psnrs), MetricReport::mean(ssims), MetricReport::mean(warps),
            MetricReport::mean(remotes)};
}

// ---------------------------------------------------------------------------
// Harness

struct AblationBudget {
    int64_t stage1_steps = 100;
    int64_t stage2_steps = 100;
};

struct AblationRow {
    std::string name;
    std::string terms;
    HeldOutScore score;
};

struct AblationTable {
    std::vector<AblationRow> rows;

    const AblationRow& row(const std::string& name) const {
        for (const auto& r : rows) {
            if (r.name == name) return r;
        }
        throw UsageError("no ablation row '" + name + "'");
    }

    std::string to_csv() const {
        std::ostringstream os;
        os << std::setprecision(10);
        os << "config,terms,psnr,ssim,warp_error,remote_warp_error\n";
        for (const auto& r : rows) {
            os << r.name << ',' << r.terms << ',' << r.score.psnr << ',' << r.score.ssim << ',' << r.score.warp_error
               << ',' << r.score.remote_warp_error << '\n';
        }
        return os.str();
    }
};

/// Trains every named setting from the same seed and budget. Stage-1
/// checkpoints are shared between settings with the same generator
/// architecture.
inline AblationTable run_ablation(const AblationSuite& suite, const std::vector<std::string>& names,
                                  const VideoDataset& train, const std::vector<synth::SynthClip>& held_out,
                                  const TrainConfig& base, const AblationBudget& budget,
                                  const std::function<void(const std::string&)>& progress = {}) {
    if (budget.stage1_steps < 1 || budget.stage2_steps < 1) throw UsageError("ablation budget must be positive");
    for (const auto& n : names) suite.at(n);  // reject unknown names before training anything

    const auto images = images_from_videos(train);
    std::map<std::string, Checkpoint> stage1_cache;
    AblationTable table;
    for (const auto& name : names) {
        const auto& setting = suite.at(name);
        if (progress) progress(name);
        auto c2 = suite.stage2_config(name, base);

        const std::string arch = nlohmann::json(c2.generator).dump();
        if (!stage1_cache.count(arch)) {
            TrainConfig c1 = c2;
            c1.stage = 1;
            c1.weights = base.weights;
            c1.lr_g = base.lr_g;
            c1.max_steps = budget.stage1_steps;
            c1.epochs = budget.stage1_steps;
            c1.steps_per_epoch = 1;
            c1.lr_schedule = LrSchedule::constant;
            Trainer t1(c1);
            stage1_cache.emplace(arch, train_stage1(t1, images));
        }
        const auto& stage1 = stage1_cache.at(arch);

        Generator gen{nullptr};
        if (setting.selection == StageSelection::stage1_only) {
            gen = generator_from_checkpoint(stage1);
        } else {
            c2.steps_per_epoch = 1;
            c2.lr_schedule = LrSchedule::constant;
            c2.max_steps = setting.selection == StageSelection::intermediate ? std::max<int64_t>(1, budget.stage2_steps / 2)
                                                                             : budget.stage2_steps;
            c2.epochs = c2.max_steps;
            Trainer t2(c2);
            RunOptions opts;
            opts.init = stage1;
            train_stage2(t2, train, opts);
            gen = t2.generator();
        }
        std::string terms;
        for (size_t i = 0; i < setting.terms.size(); ++i) terms += (i ? " " : "") + setting.terms[i];
        table.rows.push_back({name, terms, score_clips(gen, held_out)});
    }
    return table;
}

}  // namespace vcgan
