#pragma once

// Training objectives: reconstruction, perceptual, WGAN, short-term and
// long-term temporal terms, and their weighted combinations.
//
// Tensors are batched RGB [N,3,H,W]; masks are [N,1,H,W] or [1,H,W].
// Every mask-weighted term is a mean over all elements of the frame, so
// magnitudes do not depend on resolution.

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vcgan/core_data.hpp"
#include "vcgan/flow_warp.hpp"
#include "vcgan/layers.hpp"

namespace vcgan {

struct LossWeights {
    double l1 = 10.0;
    double perceptual = 5.0;
    double gan = 1.0;
    double short_term = 3.0;
    double long_term = 5.0;

    void validate() const {
        for (double w : {l1, perceptual, gan, short_term, long_term}) {
            if (!(w >= 0.0)) throw UsageError("loss weights must be non-negative");
        }
    }
};

enum class LongTermMode { dense, first_anchor };

inline LongTermMode parse_long_term_mode(const std::string& s) {
    if (s == "dense") return LongTermMode::dense;
    if (s == "first_anchor") return LongTermMode::first_anchor;
    throw UsageError("unknown long_term_mode '" + s + "' (expected dense or first_anchor)");
}

inline const char* to_string(LongTermMode mode) { return mode == LongTermMode::dense ? "dense" : "first_anchor"; }

struct TemporalOptions {
    LongTermMode long_term_mode = LongTermMode::dense;
    bool normalize_by_pairs = false;  // divide summed pair terms by the pair count
};

// 1-based frame pair (m, t), m < t.
using FramePair = std::pair<int, int>;
using PairTensors = std::map<FramePair, torch::Tensor>;

// ---------------------------------------------------------------------------
// Perceptual feature network

struct PerceptualConfig {
    std::vector<int64_t> channels{16, 32, 32};
    std::vector<int64_t> strides{1, 2, 1};
    int64_t feature_layer = 3;  // 1-based conv index whose activations are compared
    uint64_t seed = 20210101;
};

/// A frozen convolutional feature map phi_l. Weights are drawn once from a
/// fixed-seed generator and never trained.
struct PerceptualNetImpl : torch::nn::Module {
    explicit PerceptualNetImpl(PerceptualConfig cfg = {}) : config(std::move(cfg)) {
        if (config.channels.empty() || config.channels.size() != config.strides.size()) {
            throw UsageError("PerceptualConfig: channels and strides must be non-empty and equally long");
        }
        if (config.feature_layer < 1 || config.feature_layer > static_cast<int64_t>(config.channels.size())) {
            throw UsageError("PerceptualConfig: feature_layer out of range");
        }
        std::mt19937_64 rng(config.seed);
        int64_t in = 3;
        for (size_t i = 0; i < config.channels.size(); ++i) {
            auto conv = torch::nn::Conv2d(conv_options(in, config.channels[i], 3, config.strides[i], 1));
            fill_uniform(conv->weight, std::sqrt(6.0 / static_cast<double>((in + config.channels[i]) * 9)), rng);
            fill_uniform(conv->bias, 0.1, rng);
            layers.push_back(register_module("conv" + std::to_string(i + 1), conv));
            in = config.channels[i];
        }
        for (auto& p : parameters()) p.set_requires_grad(false);
        eval();
    }

    torch::Tensor forward(const torch::Tensor& rgb) {
        auto h = rgb;
        for (int64_t i = 0; i < config.feature_layer; ++i) h = leaky(layers[static_cast<size_t>(i)](h));
        return h;
    }

    PerceptualConfig config;
    std::vector<torch::nn::Conv2d> layers;

private:
    // Portable across standard libraries: 53-bit mantissa draws, no std distributions.
    static void fill_uniform(torch::Tensor& t, double bound, std::mt19937_64& rng) {
        torch::NoGradGuard no_grad;
        auto cpu = torch::empty(t.sizes(), torch::kFloat64);
        auto* p = cpu.data_ptr<double>();
        for (int64_t i = 0; i < cpu.numel(); ++i) {
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            p[i] = (2.0 * u - 1.0) * bound;
        }
        t.copy_(cpu);
    }
};
TORCH_MODULE(PerceptualNet);

// ---------------------------------------------------------------------------
// Frame-level terms

namespace detail {

inline void require_same_shape(const torch::Tensor& a, const torch::Tensor& b, const char* what) {
    if (!a.sizes().equals(b.sizes())) {
        throw DataError(std::string(what) + ": shapes " + shape_string(a) + " and " + shape_string(b) + " differ");
    }
}

inline void require_finite(const torch::Tensor& t, const char* what) {
    if (!torch::isfinite(t.detach()).all().item<bool>()) throw DataError(std::string(what) + ": non-finite scores");
}

}  // namespace detail

inline torch::Tensor l1_loss(const torch::Tensor& s, const torch::Tensor& z) {
    detail::require_same_shape(s, z, "l1_loss");
    return (s - z).abs().mean();
}

inline torch::Tensor perceptual_loss(const torch::Tensor& s, const torch::Tensor& z, PerceptualNet& net) {
    detail::require_same_shape(s, z, "perceptual_loss");
    if (s.dim() != 4 || s.size(1) != 3) throw DataError("perceptual_loss expects RGB [N,3,H,W]");
    const auto dtype = net->layers.front()->weight.scalar_type();
    if (s.scalar_type() != dtype) net->to(s.scalar_type());
    auto target = [&] {
        torch::NoGradGuard no_grad;
        return net->forward(z);
    }();
    return (net->forward(s) - target).abs().mean();
}

// L_G = -E[D(s)]
inline torch::Tensor wgan_g_loss(const torch::Tensor& fake_scores) {
    detail::require_finite(fake_scores, "wgan_g_loss");
    return -fake_scores.mean();
}

// L_D = E[D(s)] - E[D(z)]
inline torch::Tensor wgan_d_loss(const torch::Tensor& fake_scores, const torch::Tensor& real_scores) {
    detail::require_finite(fake_scores, "wgan_d_loss");
    detail::require_finite(real_scores, "wgan_d_loss");
    return fake_scores.mean() - real_scores.mean();
}

// ---------------------------------------------------------------------------
// Temporal terms

struct TemporalLoss {
    torch::Tensor value;            // scalar
    std::vector<FramePair> pairs;   // evaluated (m, t), 1-based, in evaluation order
};

namespace detail {

inline torch::Tensor zero_like_outputs(const std::vector<torch::Tensor>& outputs) {
    return outputs.empty() ? torch::zeros({}) : torch::zeros({}, outputs.front().options());
}

// mean(mask * |s_t - W(flow, s_m)|)
inline torch::Tensor masked_pair_l1(const torch::Tensor& current, const torch::Tensor& previous,
                                    const torch::Tensor& flow, const torch::Tensor& mask) {
    auto warped = warp(previous, flow);
    auto m = mask.to(current.scalar_type());
    if (m.dim() == 3) m = m.unsqueeze(0);
    if (m.size(-3) != 1 || m.size(-2) != current.size(-2) || m.size(-1) != current.size(-1)) {
        throw DataError("temporal loss: mask " + shape_string(mask) + " does not match frame " + shape_string(current));
    }
    return (m * (current - warped).abs()).expand_as(current).mean();
}

inline TemporalLoss sum_pairs(const std::vector<torch::Tensor>& outputs, const std::vector<FramePair>& pairs,
                              const PairTensors& flows, const PairTensors& masks, bool normalize_by_pairs,
                              const char* what) {
    TemporalLoss result{zero_like_outputs(outputs), {}};
    for (const auto& pair : pairs) {
        auto flow = flows.find(pair);
        auto mask = masks.find(pair);
        if (flow == flows.end() || mask == masks.end()) {
            throw DataError(std::string(what) + ": missing flow or mask for pair (" + std::to_string(pair.first) +
                            "," + std::to_string(pair.second) + ")");
        }
        result.value = result.value +
                       masked_pair_l1(outputs[static_cast<size_t>(pair.second - 1)],
                                      outputs[static_cast<size_t>(pair.first - 1)], flow->second, mask->second);
        result.pairs.push_back(pair);
    }
    if (normalize_by_pairs && !result.pairs.empty()) result.value = result.value / static_cast<double>(result.pairs.size());
    return result;
}

}  // namespace detail

// (t-1, t) for t = 2..T
inline std::vector<FramePair> short_term_pairs(int length) {
    std::vector<FramePair> pairs;
    for (int t = 2; t <= length; ++t) pairs.emplace_back(t - 1, t);
    return pairs;
}

// (m, t) for t = 3..T, m = 1..t-2; (T-1)(T-2)/2 pairs
inline std::vector<FramePair> dense_long_term_pairs(int length) {
    std::vector<FramePair> pairs;
    for (int t = 3; t <= length; ++t) {
        for (int m = 1; m <= t - 2; ++m) pairs.emplace_back(m, t);
    }
    return pairs;
}

// (1, t) for t = 3..T
inline std::vector<FramePair> first_anchor_pairs(int length) {
    std::vector<FramePair> pairs;
    for (int t = 3; t <= length; ++t) pairs.emplace_back(1, t);
    return pairs;
}

inline std::vector<FramePair> long_term_pairs(int length, LongTermMode mode) {
    return mode == LongTermMode::dense ? dense_long_term_pairs(length) : first_anchor_pairs(length);
}

/// Sum over t = 2..T of mean(M_{t-1->t} * |s_t - W(O_{t-1->t}, s_{t-1})|).
/// flows[k], masks[k] belong to the pair (k+1, k+2).
inline TemporalLoss short_term_loss(const std::vector<torch::Tensor>& outputs, const std::vector<torch::Tensor>& flows,
                                    const std::vector<torch::Tensor>& masks, const TemporalOptions& options = {}) {
    if (outputs.size() < 2) {
        warn("short_term_loss: clip shorter than 2 frames, term is zero");
        return {detail::zero_like_outputs(outputs), {}};
    }
    if (flows.size() != outputs.size() - 1 || masks.size() != outputs.size() - 1) {
        throw DataError("short_term_loss: " + std::to_string(outputs.size()) + " frames need " +
                        std::to_string(outputs.size() - 1) + " flows and masks, got " + std::to_string(flows.size()) +
                        " and " + std::to_string(masks.size()));
    }
    PairTensors flow_map, mask_map;
    for (size_t k = 0; k < flows.size(); ++k) {
        const FramePair pair{static_cast<int>(k) + 1, static_cast<int>(k) + 2};
        flow_map[pair] = flows[k];
        mask_map[pair] = masks[k];
    }
    return detail::sum_pairs(outputs, short_term_pairs(static_cast<int>(outputs.size())), flow_map, mask_map,
                             options.normalize_by_pairs, "short_term_loss");
}

/// Sum over every remote pair (m, t), m <= t-2, of the masked warped L1.
inline TemporalLoss dense_long_term_loss(const std::vector<torch::Tensor>& outputs, const PairTensors& flows,
                                         const PairTensors& masks, const TemporalOptions& options = {}) {
    if (outputs.size() < 3) {
        warn("dense_long_term_loss: clip shorter than 3 frames, term is zero");
        return {detail::zero_like_outputs(outputs), {}};
    }
    return detail::sum_pairs(outputs, dense_long_term_pairs(static_cast<int>(outputs.size())), flows, masks,
                             options.normalize_by_pairs, "dense_long_term_loss");
}

/// Anchor-only long-term baseline: pairs (1, t) for t >= 3.
inline TemporalLoss long_term_loss_first_anchor(const std::vector<torch::Tensor>& outputs, const PairTensors& flows,
                                                const PairTensors& masks, const TemporalOptions& options = {}) {
    if (outputs.size() < 3) {
        warn("long_term_loss_first_anchor: clip shorter than 3 frames, term is zero");
        return {detail::zero_like_outputs(outputs), {}};
    }
    return detail::sum_pairs(outputs, first_anchor_pairs(static_cast<int>(outputs.size())), flows, masks,
                             options.normalize_by_pairs, "long_term_loss_first_anchor");
}

inline TemporalLoss long_term_loss(const std::vector<torch::Tensor>& outputs, const PairTensors& flows,
                                   const PairTensors& masks, const TemporalOptions& options) {
    return options.long_term_mode == LongTermMode::dense ? dense_long_term_loss(outputs, flows, masks, options)
                                                         : long_term_loss_first_anchor(outputs, flows, masks, options);
}

// ---------------------------------------------------------------------------
// Weighted objectives

inline constexpr std::array<const char*, 5> kTermNames{"l1", "perceptual", "gan", "short_term", "long_term"};

/// One value per objective term, in the fixed order of kTermNames.
struct LossTerms {
    torch::Tensor l1, perceptual, gan, short_term, long_term;

    std::array<torch::Tensor, 5> as_array() const { return {l1, perceptual, gan, short_term, long_term}; }
};

struct LossBreakdown {
    torch::Tensor total;
    LossTerms terms;

    std::map<std::string, double> values() const {
        std::map<std::string, double> out;
        const auto arr = terms.as_array();
        for (size_t i = 0; i < arr.size(); ++i) {
            out[kTermNames[i]] = arr[i].defined() ? arr[i].detach().item<double>() : 0.0;
        }
        out["total"] = total.detach().item<double>();
        return out;
    }
};

/// lambda_1 L_1 + lambda_p L_p + lambda_G L_G + lambda_st L_st + lambda_lt L_lt,
/// summed left to right. Undefined terms count as zero.
inline torch::Tensor weighted_total(const LossTerms& terms, const LossWeights& weights) {
    weights.validate();
    const std::array<double, 5> w{weights.l1, weights.perceptual, weights.gan, weights.short_term, weights.long_term};
    const auto arr = terms.as_array();
    torch::Tensor total;
    for (size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].defined()) continue;
        auto term = arr[i] * w[i];
        total = total.defined() ? total + term : term;
    }
    return total.defined() ? total : torch::zeros({});
}

// Plain-number form of the same combination.
inline double weighted_total(const std::array<double, 5>& components, const LossWeights& weights) {
    weights.validate();
    const std::array<double, 5> w{weights.l1, weights.perceptual, weights.gan, weights.short_term, weights.long_term};
    double total = 0.0;
    for (size_t i = 0; i < w.size(); ++i) total += w[i] * components[i];
    return total;
}

/// L_1st = lambda_1 L_1 + lambda_p L_p on a generated batch s against ground truth z.
inline LossBreakdown stage1_objective(const torch::Tensor& s, const torch::Tensor& z, const LossWeights& weights,
                                      PerceptualNet& net) {
    weights.validate();
    LossTerms terms;
    terms.l1 = vcgan::l1_loss(s, z);
    terms.perceptual = perceptual_loss(s, z, net);
    return {weighted_total(terms, weights), terms};
}

inline LossBreakdown stage2_objective(const LossTerms& terms, const LossWeights& weights) {
    return {weighted_total(terms, weights), terms};
}

}  // namespace vcgan
