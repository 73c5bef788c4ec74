#pragma once

// Backward warping under a flow field and photometric occlusion masks.
//
// out(p) = bilinear(frame, p + flow(p)); sample coordinates are clamped to the
// image before interpolation, so anything past the border reads the edge pixel.

#include <torch/torch.h>

#include <stdexcept>
#include <utility>

#include "vcgan/core_data.hpp"

namespace vcgan {

enum class BorderMode { clamp };

struct WarpConfig {
    BorderMode border_mode = BorderMode::clamp;
    double alpha = 50.0;  // non-occlusion mask sharpness

    void validate() const {
        if (!(alpha > 0.0)) throw UsageError("WarpConfig.alpha must be positive");
    }
};

namespace detail {

// Brings image/flow to [N,C,H,W] / [N,2,H,W]; returns whether the caller passed unbatched input.
inline bool batch_pair(torch::Tensor& image, torch::Tensor& flow) {
    const bool unbatched = image.dim() == 3;
    if (unbatched) image = image.unsqueeze(0);
    if (flow.dim() == 3) flow = flow.unsqueeze(0);
    if (image.dim() != 4 || flow.dim() != 4 || flow.size(1) != 2) {
        throw DataError("warp: expected image [N,C,H,W] and flow [N,2,H,W], got " + shape_string(image) + " and " +
                        shape_string(flow));
    }
    if (image.size(2) != flow.size(2) || image.size(3) != flow.size(3)) {
        throw DataError("warp: image " + shape_string(image) + " and flow " + shape_string(flow) +
                        " differ in spatial size");
    }
    if (flow.size(0) != image.size(0)) {
        if (flow.size(0) != 1) throw DataError("warp: batch size mismatch");
        flow = flow.expand({image.size(0), 2, flow.size(2), flow.size(3)});
    }
    return unbatched;
}

}  // namespace detail

/// Differentiable backward warp of `image` by `flow` (both tensors).
/// Accepts [C,H,W]/[2,H,W] or batched [N,C,H,W]/[N,2,H,W]; a single flow
/// broadcasts over the batch.
inline torch::Tensor warp(torch::Tensor image, torch::Tensor flow) {
    const bool unbatched = detail::batch_pair(image, flow);
    if (!torch::isfinite(flow.detach()).all().item<bool>()) throw DataError("warp: flow has non-finite values");
    flow = flow.to(image.scalar_type());

    const int64_t n = image.size(0), c = image.size(1), h = image.size(2), w = image.size(3);
    const auto opts = image.options().requires_grad(false);
    auto xs = torch::arange(w, opts).view({1, 1, w});
    auto ys = torch::arange(h, opts).view({1, h, 1});
    auto sx = (xs + flow.select(1, 0)).clamp(0, static_cast<double>(w - 1));
    auto sy = (ys + flow.select(1, 1)).clamp(0, static_cast<double>(h - 1));

    auto x0 = sx.detach().floor();
    auto y0 = sy.detach().floor();
    auto wx = (sx - x0).unsqueeze(1);
    auto wy = (sy - y0).unsqueeze(1);
    auto x0i = x0.to(torch::kLong);
    auto y0i = y0.to(torch::kLong);
    auto x1i = (x0i + 1).clamp_max(w - 1);
    auto y1i = (y0i + 1).clamp_max(h - 1);

    auto flat = image.reshape({n, c, h * w});
    auto sample = [&](const torch::Tensor& yi, const torch::Tensor& xi) {
        auto idx = (yi * w + xi).reshape({n, 1, h * w}).expand({n, c, h * w});
        return flat.gather(2, idx).reshape({n, c, h, w});
    };
    auto out = sample(y0i, x0i) * (1 - wx) * (1 - wy) + sample(y0i, x1i) * wx * (1 - wy) +
               sample(y1i, x0i) * (1 - wx) * wy + sample(y1i, x1i) * wx * wy;
    return unbatched ? out.squeeze(0) : out;
}

inline Frame warp(const Frame& frame, const FlowField& flow) {
    if (frame.height() != flow.height() || frame.width() != flow.width()) {
        throw DataError("warp: frame " + shape_string(frame.data()) + " and flow " + shape_string(flow.data()) +
                        " differ in spatial size");
    }
    return Frame(warp(frame.data(), flow.data()).clamp(-1.0, 1.0), frame.color_space());
}

/// exp(-alpha * sum_c (current - warped_prev)^2), one weight per pixel.
/// Tensor form keeps the channel axis with size 1.
inline torch::Tensor nonocclusion_mask(const torch::Tensor& current, const torch::Tensor& warped_prev, double alpha) {
    if (!(alpha > 0.0)) throw UsageError("nonocclusion_mask: alpha must be positive");
    if (!current.sizes().equals(warped_prev.sizes())) {
        throw DataError("nonocclusion_mask: shapes " + shape_string(current) + " and " + shape_string(warped_prev) +
                        " differ");
    }
    const auto diff = current - warped_prev;
    return torch::exp(-alpha * diff.pow(2).sum(-3, /*keepdim=*/true));
}

inline OcclusionMask nonocclusion_mask(const Frame& current, const Frame& warped_prev, double alpha) {
    return OcclusionMask(nonocclusion_mask(current.data(), warped_prev.data(), alpha));
}

/// 1 where the channel-mean squared error is below `threshold`, else 0.
inline torch::Tensor binary_mask(const torch::Tensor& current, const torch::Tensor& warped_prev, double threshold) {
    if (!(threshold > 0.0)) throw UsageError("binary_mask: threshold must be positive");
    if (!current.sizes().equals(warped_prev.sizes())) {
        throw DataError("binary_mask: shapes " + shape_string(current) + " and " + shape_string(warped_prev) +
                        " differ");
    }
    const auto err = (current - warped_prev).pow(2).mean(-3, /*keepdim=*/true);
    return (err < threshold).to(current.scalar_type());
}

// Frame form compares in [0,1] intensity scale, which is where metric thresholds are stated.
inline OcclusionMask binary_mask(const Frame& current, const Frame& warped_prev, double threshold) {
    return OcclusionMask(binary_mask(to_unit_range(current.data()), to_unit_range(warped_prev.data()), threshold));
}

/// Chains backward flows: given later = O_{k->t} and earlier = O_{m->k},
/// returns O_{m->t}(p) = later(p) + earlier(p + later(p)).
inline torch::Tensor compose_flows(const torch::Tensor& later, const torch::Tensor& earlier) {
    return later + warp(earlier, later);
}

inline FlowField compose_flows(const FlowField& later, const FlowField& earlier) {
    return FlowField(compose_flows(later.data(), earlier.data()));
}

}  // namespace vcgan
