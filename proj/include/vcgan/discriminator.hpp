#pragma once

// Patch critic: stride-2 spectrally normalized convs, one score per patch.

#include <torch/torch.h>

#include <string>
#include <vector>

#include "json.hpp"
#include "vcgan/core_data.hpp"
#include "vcgan/layers.hpp"

namespace vcgan {

struct DiscriminatorConfig {
    int64_t base_channels = 16;
    int64_t num_downsamples = 3;
    int power_iterations = 1;

    void validate() const {
        if (base_channels < 1) throw UsageError("DiscriminatorConfig: base_channels must be positive");
        if (num_downsamples < 1) throw UsageError("DiscriminatorConfig: num_downsamples must be >= 1");
        if (power_iterations < 1) throw UsageError("DiscriminatorConfig: power_iterations must be >= 1");
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DiscriminatorConfig, base_channels, num_downsamples, power_iterations)

struct DiscriminatorImpl : torch::nn::Module {
    explicit DiscriminatorImpl(DiscriminatorConfig cfg) : config(cfg) {
        config.validate();
        int64_t in = 3;
        for (int64_t i = 0; i < config.num_downsamples; ++i) {
            const int64_t out = config.base_channels << i;
            convs.push_back(register_module("conv" + std::to_string(i),
                                            SNConv2d(in, out, 4, 2, 1, config.power_iterations)));
            if (i > 0) {
                norms.push_back(register_module("norm" + std::to_string(i),
                                                torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(out))));
            } else {
                norms.push_back(nullptr);
            }
            in = out;
        }
        convs.push_back(register_module("conv" + std::to_string(config.num_downsamples),
                                        SNConv2d(in, 1, 3, 1, 1, config.power_iterations)));
    }

    /// RGB [N,3,H,W] -> scores [N,1,H/2^d,W/2^d]; unbounded.
    torch::Tensor forward(const torch::Tensor& rgb) {
        if (rgb.dim() != 4 || rgb.size(1) != 3) {
            throw DataError("critic expects RGB [N,3,H,W], got " + shape_string(rgb));
        }
        const int64_t factor = int64_t{1} << config.num_downsamples;
        if (rgb.size(2) % factor != 0 || rgb.size(3) % factor != 0 || rgb.size(2) < factor || rgb.size(3) < factor) {
            throw DataError("critic: resolution " + std::to_string(rgb.size(2)) + "x" + std::to_string(rgb.size(3)) +
                            " incompatible with " + std::to_string(config.num_downsamples) + " downsamplings");
        }
        auto h = rgb;
        for (int64_t i = 0; i < config.num_downsamples; ++i) {
            h = convs[static_cast<size_t>(i)](h);
            if (norms[static_cast<size_t>(i)]) h = norms[static_cast<size_t>(i)](h);
            h = leaky(h);
        }
        return convs.back()(h);
    }

    DiscriminatorConfig config;
    std::vector<SNConv2d> convs;
    std::vector<torch::nn::InstanceNorm2d> norms;
};
TORCH_MODULE(Discriminator);

inline torch::Tensor criticize(Discriminator& critic, const Frame& frame) {
    if (frame.color_space() != ColorSpace::rgb) throw DataError("criticize expects an RGB frame");
    auto dtype = critic->parameters().front().scalar_type();
    return critic->forward(frame.data().unsqueeze(0).to(dtype)).squeeze(0);
}

}  // namespace vcgan
