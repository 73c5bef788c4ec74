#pragma once

// Building blocks shared by the generator and the critic.

#include <torch/torch.h>

#include <algorithm>
#include <cmath>

namespace vcgan {

inline constexpr double kLeakySlope = 0.2;

inline torch::Tensor leaky(const torch::Tensor& x) {
    return torch::leaky_relu(x, kLeakySlope);
}

inline torch::nn::Conv2dOptions conv_options(int64_t in, int64_t out, int64_t kernel, int64_t stride,
                                             int64_t padding) {
    return torch::nn::Conv2dOptions(in, out, kernel).stride(stride).padding(padding).bias(true);
}

inline void xavier_init(torch::nn::Conv2d& conv) {
    torch::NoGradGuard no_grad;
    torch::nn::init::xavier_uniform_(conv->weight);
    if (conv->bias.defined()) conv->bias.zero_();
}

// conv -> [instance norm] -> [LeakyReLU]
struct ConvBlockImpl : torch::nn::Module {
    ConvBlockImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t padding, bool norm,
                  bool activation)
        : use_norm(norm), use_activation(activation) {
        conv = register_module("conv", torch::nn::Conv2d(conv_options(in, out, kernel, stride, padding)));
        if (use_norm) {
            this->norm = register_module("norm", torch::nn::InstanceNorm2d(torch::nn::InstanceNorm2dOptions(out)));
        }
    }

    torch::Tensor forward(const torch::Tensor& x) {
        auto y = conv(x);
        if (use_norm) y = norm(y);
        if (use_activation) y = leaky(y);
        return y;
    }

    torch::nn::Conv2d conv{nullptr};
    torch::nn::InstanceNorm2d norm{nullptr};
    bool use_norm;
    bool use_activation;
};
TORCH_MODULE(ConvBlock);

struct ResidualBlockImpl : torch::nn::Module {
    explicit ResidualBlockImpl(int64_t channels) {
        first = register_module("first", ConvBlock(channels, channels, 3, 1, 1, true, true));
        second = register_module("second", ConvBlock(channels, channels, 3, 1, 1, true, false));
    }

    torch::Tensor forward(const torch::Tensor& x) { return leaky(x + second(first(x))); }

    ConvBlock first{nullptr};
    ConvBlock second{nullptr};
};
TORCH_MODULE(ResidualBlock);

/// Single-head spatial self-attention with a residual gate.
///
/// y = gamma * attend(x) + x, gamma starts at zero so the block is the
/// identity map until training moves the gate.
struct NonLocalBlockImpl : torch::nn::Module {
    explicit NonLocalBlockImpl(int64_t channels, int64_t reduction = 8) {
        const int64_t inner = std::max<int64_t>(1, channels / reduction);
        query = register_module("query", torch::nn::Conv2d(conv_options(channels, inner, 1, 1, 0)));
        key = register_module("key", torch::nn::Conv2d(conv_options(channels, inner, 1, 1, 0)));
        value = register_module("value", torch::nn::Conv2d(conv_options(channels, channels, 1, 1, 0)));
        gamma = register_parameter("gamma", torch::zeros({1}));
        xavier_init(query);
        xavier_init(key);
        xavier_init(value);
    }

    torch::Tensor forward(const torch::Tensor& x) {
        const auto n = x.size(0), c = x.size(1), h = x.size(2), w = x.size(3);
        auto q = query(x).reshape({n, -1, h * w}).transpose(1, 2);  // [N, HW, c']
        auto k = key(x).reshape({n, -1, h * w});                    // [N, c', HW]
        auto attention = torch::softmax(torch::bmm(q, k), -1);       // [N, HW, HW]
        auto v = value(x).reshape({n, c, h * w});                   // [N, C, HW]
        auto attended = torch::bmm(v, attention.transpose(1, 2)).reshape({n, c, h, w});
        return gamma * attended + x;
    }

    torch::nn::Conv2d query{nullptr}, key{nullptr}, value{nullptr};
    torch::Tensor gamma;
};
TORCH_MODULE(NonLocalBlock);

/// Power-iteration vectors for one weight matrix.
struct PowerIterationState {
    torch::Tensor u;  // [out]
    torch::Tensor v;  // [in * kh * kw]
};

inline constexpr double kSigmaFloor = 1e-12;

/// Power-iteration steps run once at construction so the first training
/// steps already see a converged estimate.
inline constexpr int kSpectralWarmupIterations = 50;

inline torch::Tensor l2_normalized(const torch::Tensor& t) {
    return t / t.norm().clamp_min(kSigmaFloor);
}

/// Divides `weight` by its largest singular value, estimated with
/// `iterations` power-iteration steps that update `state` in place. The
/// weight is viewed as a [out, rest] matrix. A zero matrix is returned
/// unchanged. Gradients flow through weight (and through sigma), not through
/// the iteration vectors.
inline torch::Tensor spectral_normalize(const torch::Tensor& weight, PowerIterationState& state, int iterations) {
    auto matrix = weight.reshape({weight.size(0), -1});
    if (!state.u.defined()) state.u = l2_normalized(torch::randn({matrix.size(0)}, weight.options().requires_grad(false)));
    if (!state.v.defined()) state.v = l2_normalized(torch::randn({matrix.size(1)}, weight.options().requires_grad(false)));
    {
        torch::NoGradGuard no_grad;
        auto m = matrix.detach();
        for (int i = 0; i < iterations; ++i) {
            state.v.copy_(l2_normalized(torch::mv(m.t(), state.u)));
            state.u.copy_(l2_normalized(torch::mv(m, state.v)));
        }
    }
    // Clones keep the autograd graph valid when a later call advances the state.
    auto sigma = torch::dot(state.u.clone(), torch::mv(matrix, state.v.clone()));
    if (sigma.detach().abs().item<double>() < kSigmaFloor) return weight;
    return weight / sigma;
}

/// Conv2d whose weight is spectrally normalized on every forward pass.
/// In training mode each call advances the power iteration; in eval mode the
/// stored vectors are reused as-is.
struct SNConv2dImpl : torch::nn::Module {
    SNConv2dImpl(int64_t in, int64_t out, int64_t kernel, int64_t stride, int64_t padding, int power_iterations)
        : stride(stride), padding(padding), iterations(power_iterations) {
        weight_orig = register_parameter("weight_orig", torch::empty({out, in, kernel, kernel}));
        bias = register_parameter("bias", torch::zeros({out}));
        torch::NoGradGuard no_grad;
        torch::nn::init::xavier_uniform_(weight_orig);
        u = register_buffer("u", l2_normalized(torch::randn({out})));
        v = register_buffer("v", l2_normalized(torch::randn({in * kernel * kernel})));
        PowerIterationState state{u, v};
        spectral_normalize(weight_orig, state, kSpectralWarmupIterations);
    }

    // The weight the convolution actually uses, without advancing the iteration.
    torch::Tensor normalized_weight() {
        PowerIterationState state{u, v};
        return spectral_normalize(weight_orig, state, 0);
    }

    torch::Tensor forward(const torch::Tensor& x) {
        PowerIterationState state{u, v};
        auto w = spectral_normalize(weight_orig, state, is_training() ? iterations : 0);
        return torch::conv2d(x, w, bias, stride, padding);
    }

    torch::Tensor weight_orig, bias, u, v;
    int64_t stride, padding;
    int iterations;
};
TORCH_MODULE(SNConv2d);

}  // namespace vcgan
