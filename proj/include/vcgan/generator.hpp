#pragma once

// Recurrent hybrid colorization generator.
//
// A U-Net mainstream colorizes the grayscale frame x_t. Two residual feature
// extractors run beside it: the global extractor sees x_t, the placeholder
// extractor sees i_t, the previous output converted to gray and warped onto
// frame t. Both feature maps are concatenated with the mainstream bottleneck
// and fused back to the bottleneck width. For the first frame (and in image
// mode) i_t = x_t.

#include <torch/torch.h>

#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "vcgan/core_data.hpp"
#include "vcgan/flow_warp.hpp"
#include "vcgan/layers.hpp"

namespace vcgan {

struct GeneratorConfig {
    int64_t base_channels = 16;
    int64_t depth = 3;                 // number of stride-2 stages in the encoder
    int64_t extractor_base = 8;        // extractor stem width, doubled per stage
    int64_t extractor_channels = 32;   // extractor output width after reduction
    int64_t extractor_blocks = 1;      // residual blocks per extractor stage
    std::vector<int64_t> nonlocal_positions{0};  // decoder stages; 0 = bottleneck resolution
    int64_t height = 64;
    int64_t width = 64;
    bool use_global_extractor = true;
    bool use_placeholder_extractor = true;

    // Extractor width before the reduction conv, e.g. 64 * 2^5 = 2048 at full scale.
    int64_t extractor_width() const { return extractor_base << depth; }
    int64_t bottleneck_channels() const { return base_channels << depth; }

    void validate() const {
        if (base_channels < 1 || extractor_base < 1 || extractor_channels < 1 || extractor_blocks < 0) {
            throw UsageError("GeneratorConfig: channel counts must be positive");
        }
        if (depth < 1 || depth > 8) throw UsageError("GeneratorConfig: depth must be in [1, 8]");
        if (height < 1 || width < 1) throw UsageError("GeneratorConfig: resolution must be positive");
        check_resolution(height, width);
        for (auto p : nonlocal_positions) {
            if (p < 0 || p > depth) throw UsageError("GeneratorConfig: non-local position out of range");
        }
    }

    void check_resolution(int64_t h, int64_t w) const {
        const int64_t factor = int64_t{1} << depth;
        if (h % factor != 0 || w % factor != 0) {
            throw DataError("resolution " + std::to_string(h) + "x" + std::to_string(w) + " is not divisible by 2^" +
                            std::to_string(depth));
        }
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GeneratorConfig, base_channels, depth, extractor_base,
                                                extractor_channels, extractor_blocks, nonlocal_positions, height,
                                                width, use_global_extractor, use_placeholder_extractor)

/// Fully convolutional residual network: stride-2 convs for downsampling,
/// instance norm, LeakyReLU, and a final channel-reduction conv. Output is at
/// 1/2^depth of the input resolution.
struct FeatureExtractorImpl : torch::nn::Module {
    explicit FeatureExtractorImpl(const GeneratorConfig& config) {
        int64_t width = config.extractor_base;
        stem = register_module("stem", ConvBlock(3, width, 3, 1, 1, false, true));
        for (int64_t s = 1; s <= config.depth; ++s) {
            auto stage = torch::nn::Sequential();
            stage->push_back(ConvBlock(width, width * 2, 4, 2, 1, true, true));
            width *= 2;
            for (int64_t b = 0; b < config.extractor_blocks; ++b) stage->push_back(ResidualBlock(width));
            stages.push_back(register_module("stage" + std::to_string(s), stage));
        }
        reduce = register_module("reduce", ConvBlock(width, config.extractor_channels, 1, 1, 0, false, false));
    }

    torch::Tensor forward(const torch::Tensor& rgb) {
        auto y = stem(rgb);
        for (auto& stage : stages) y = stage->forward(y);
        return reduce(y);
    }

    ConvBlock stem{nullptr};
    std::vector<torch::nn::Sequential> stages;
    ConvBlock reduce{nullptr};
};
TORCH_MODULE(FeatureExtractor);

// Spatial sizes seen during one forward pass, for structural tests.
struct GeneratorTrace {
    std::vector<std::vector<int64_t>> encoder;    // level 0..depth
    std::vector<std::vector<int64_t>> decoder;    // stage 0..depth (stage 0 = fused bottleneck)
    std::vector<std::vector<int64_t>> extractor;  // GFE, PFE outputs
};

struct GeneratorImpl : torch::nn::Module {
    explicit GeneratorImpl(GeneratorConfig cfg) : config(std::move(cfg)) {
        config.validate();
        const int64_t b = config.base_channels;

        encoder_in = register_module("enc0", ConvBlock(1, b, 3, 1, 1, false, true));
        for (int64_t i = 1; i <= config.depth; ++i) {
            const int64_t in = b << (i - 1), out = b << i;
            encoder_down.push_back(register_module("enc" + std::to_string(i) + "_down", ConvBlock(in, out, 4, 2, 1, true, true)));
            encoder_refine.push_back(register_module("enc" + std::to_string(i) + "_refine", ConvBlock(out, out, 3, 1, 1, true, true)));
        }

        int64_t fused_in = config.bottleneck_channels();
        if (config.use_global_extractor) {
            global_extractor = register_module("gfe", FeatureExtractor(config));
            fused_in += config.extractor_channels;
        }
        if (config.use_placeholder_extractor) {
            placeholder_extractor = register_module("pfe", FeatureExtractor(config));
            fused_in += config.extractor_channels;
        }
        fusion = register_module("fusion", ConvBlock(fused_in, config.bottleneck_channels(), 1, 1, 0, true, true));

        for (int64_t i = config.depth; i >= 1; --i) {
            const int64_t in = b << i, out = b << (i - 1);
            const auto name = "dec" + std::to_string(config.depth - i + 1);
            decoder_up.push_back(register_module(name + "_up", ConvBlock(in, out, 3, 1, 1, true, true)));
            decoder_merge.push_back(register_module(name + "_merge", ConvBlock(2 * out, out, 3, 1, 1, true, true)));
        }
        for (auto p : config.nonlocal_positions) {
            const int64_t channels = b << (config.depth - p);
            if (!nonlocal.count(p)) {
                nonlocal.emplace(p, register_module("nonlocal" + std::to_string(p), NonLocalBlock(channels)));
            }
        }
        output = register_module("out", torch::nn::Conv2d(conv_options(b, 3, 3, 1, 1)));

        // Xavier for every mainstream layer; extractors keep their own init.
        for (auto& block : encoder_down) xavier_init(block->conv);
        for (auto& block : encoder_refine) xavier_init(block->conv);
        for (auto& block : decoder_up) xavier_init(block->conv);
        for (auto& block : decoder_merge) xavier_init(block->conv);
        xavier_init(encoder_in->conv);
        xavier_init(fusion->conv);
        xavier_init(output);

        // Both extractors start from the same weights.
        if (global_extractor && placeholder_extractor) {
            torch::NoGradGuard no_grad;
            auto src = global_extractor->named_parameters();
            for (auto& item : placeholder_extractor->named_parameters()) item.value().copy_(src[item.key()]);
        }
    }

    /// x: grayscale [N,1,H,W]; placeholder: grayscale [N,1,H,W] fed to the
    /// placeholder extractor. Returns RGB [N,3,H,W] in [-1,1].
    torch::Tensor forward_step(const torch::Tensor& x, const torch::Tensor& placeholder,
                               GeneratorTrace* trace = nullptr) {
        check_input(x, "x");
        check_input(placeholder, "placeholder input");
        if (!x.sizes().equals(placeholder.sizes())) {
            throw DataError("generator: x " + shape_string(x) + " and placeholder " + shape_string(placeholder) +
                            " differ in shape");
        }
        std::vector<torch::Tensor> skips;
        auto h = encoder_in(x);
        skips.push_back(h);
        for (size_t i = 0; i < encoder_down.size(); ++i) {
            h = encoder_refine[i](encoder_down[i](h));
            skips.push_back(h);
        }
        if (trace) {
            for (auto& s : skips) trace->encoder.push_back(s.sizes().vec());
        }

        std::vector<torch::Tensor> fused{h};
        if (global_extractor) {
            fused.push_back(global_extractor(replicate_gray(x)));
        }
        if (placeholder_extractor) {
            fused.push_back(placeholder_extractor(replicate_gray(placeholder)));
        }
        if (trace) {
            for (size_t i = 1; i < fused.size(); ++i) trace->extractor.push_back(fused[i].sizes().vec());
        }
        h = fusion(torch::cat(fused, 1));
        h = apply_nonlocal(0, h);
        if (trace) trace->decoder.push_back(h.sizes().vec());

        for (size_t k = 0; k < decoder_up.size(); ++k) {
            auto up = torch::upsample_nearest2d(h, std::vector<int64_t>{h.size(2) * 2, h.size(3) * 2});
            up = decoder_up[k](up);
            const auto& skip = skips[skips.size() - 2 - k];
            h = decoder_merge[k](torch::cat({up, skip}, 1));
            h = apply_nonlocal(static_cast<int64_t>(k) + 1, h);
            if (trace) trace->decoder.push_back(h.sizes().vec());
        }
        return torch::tanh(output(h));
    }

    /// Image mode and the first frame of a clip: the placeholder sees x itself.
    torch::Tensor forward_first(const torch::Tensor& x, GeneratorTrace* trace = nullptr) {
        return forward_step(x, x, trace);
    }

    int64_t parameter_count() {
        int64_t n = 0;
        for (const auto& p : parameters()) n += p.numel();
        return n;
    }

    GeneratorConfig config;
    ConvBlock encoder_in{nullptr};
    std::vector<ConvBlock> encoder_down, encoder_refine;
    FeatureExtractor global_extractor{nullptr};
    FeatureExtractor placeholder_extractor{nullptr};
    ConvBlock fusion{nullptr};
    std::vector<ConvBlock> decoder_up, decoder_merge;
    std::map<int64_t, NonLocalBlock> nonlocal;
    torch::nn::Conv2d output{nullptr};

private:
    void check_input(const torch::Tensor& t, const char* what) const {
        if (t.dim() != 4 || t.size(1) != 1) {
            throw DataError(std::string("generator: ") + what + " must be grayscale [N,1,H,W], got " + shape_string(t));
        }
        config.check_resolution(t.size(2), t.size(3));
    }

    torch::Tensor apply_nonlocal(int64_t position, const torch::Tensor& h) {
        auto it = nonlocal.find(position);
        return it == nonlocal.end() ? h : it->second(h);
    }
};
TORCH_MODULE(Generator);

// Records what the recurrence did, for tests and diagnostics.
struct ClipTrace {
    int warps = 0;
    std::vector<torch::Tensor> placeholder_inputs;  // i_t for t >= 2
};

/// Markov-chain inference over a sequence of grayscale tensors [N,1,H,W]:
/// s_1 = G(x_1); s_t = G(x_t, W(O_{t-1->t}, Gray(s_{t-1}))).
/// flows[k] is the backward flow from frame k to frame k+1 (0-based).
/// Gradients flow through the whole chain.
inline std::vector<torch::Tensor> colorize_sequence(Generator& generator, const std::vector<torch::Tensor>& grays,
                                                    const std::vector<torch::Tensor>& flows,
                                                    ClipTrace* trace = nullptr) {
    if (grays.empty()) throw DataError("colorize: empty sequence");
    if (flows.size() + 1 != grays.size()) {
        throw DataError("colorize: " + std::to_string(grays.size()) + " frames need " +
                        std::to_string(grays.size() - 1) + " flows, got " + std::to_string(flows.size()));
    }
    std::vector<torch::Tensor> outputs;
    outputs.reserve(grays.size());
    outputs.push_back(generator->forward_first(grays[0]));
    for (size_t t = 1; t < grays.size(); ++t) {
        auto placeholder = warp(gray_from_rgb(outputs.back()), flows[t - 1]);
        if (trace) {
            ++trace->warps;
            trace->placeholder_inputs.push_back(placeholder.detach().clone());
        }
        outputs.push_back(generator->forward_step(grays[t], placeholder));
    }
    return outputs;
}

inline Frame colorize_image(Generator& generator, const Frame& gray) {
    if (gray.color_space() != ColorSpace::grayscale) throw DataError("colorize_image expects a grayscale frame");
    torch::NoGradGuard no_grad;
    auto param = generator->parameters().front();
    auto out = generator->forward_first(gray.data().unsqueeze(0).to(param.scalar_type()));
    return Frame(out.squeeze(0), ColorSpace::rgb);
}

inline VideoClip colorize_clip(Generator& generator, const VideoClip& clip, const std::vector<FlowField>& flows,
                               ClipTrace* trace = nullptr) {
    if (clip.color_space() != ColorSpace::grayscale) throw DataError("colorize_clip expects grayscale frames");
    torch::NoGradGuard no_grad;
    const auto dtype = generator->parameters().front().scalar_type();
    std::vector<torch::Tensor> grays, flow_tensors;
    for (const auto& f : clip.frames()) grays.push_back(f.data().unsqueeze(0).to(dtype));
    for (const auto& f : flows) flow_tensors.push_back(f.data().unsqueeze(0).to(dtype));
    auto outputs = colorize_sequence(generator, grays, flow_tensors, trace);
    std::vector<Frame> frames;
    for (auto& o : outputs) frames.emplace_back(o.squeeze(0), ColorSpace::rgb);
    return VideoClip(std::move(frames));
}

}  // namespace vcgan
