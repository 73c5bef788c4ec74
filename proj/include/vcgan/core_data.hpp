#pragma once

// Value types for frames, clips, flows and masks, and the color conversions
// shared by every other module. Pixel values live in [-1, 1].

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "vcgan/errors.hpp"

namespace vcgan {

enum class ColorSpace { grayscale, rgb };

inline const char* to_string(ColorSpace space) {
    return space == ColorSpace::grayscale ? "grayscale" : "rgb";
}

// BT.601 luma weights, applied in [0,1] scale.
struct LumaWeights {
    static constexpr double red = 0.299;
    static constexpr double green = 0.587;
    static constexpr double blue = 0.114;
};

inline std::string shape_string(const torch::Tensor& t) {
    std::string s = "[";
    for (int64_t i = 0; i < t.dim(); ++i) {
        if (i) s += ",";
        s += std::to_string(t.size(i));
    }
    return s + "]";
}

// Differentiable RGB -> gray on tensors shaped [..., 3, H, W].
//
// Written as G + wr*(R-G) + wb*(B-G): the green weight is implied, so a gray
// image replicated to three channels maps back to itself bit-exactly. The
// weights sum to one, so the map is the same in [0,1] and [-1,1] scale.
inline torch::Tensor gray_from_rgb(const torch::Tensor& rgb) {
    TORCH_CHECK(rgb.dim() >= 3 && rgb.size(-3) == 3, "gray_from_rgb expects 3 channels, got ",
                shape_string(rgb));
    auto r = rgb.select(-3, 0);
    auto g = rgb.select(-3, 1);
    auto b = rgb.select(-3, 2);
    return (g + LumaWeights::red * (r - g) + LumaWeights::blue * (b - g)).unsqueeze(-3);
}

// [..., 1, H, W] -> [..., 3, H, W] with identical channels.
inline torch::Tensor replicate_gray(const torch::Tensor& gray) {
    TORCH_CHECK(gray.dim() >= 3 && gray.size(-3) == 1, "replicate_gray expects 1 channel, got ",
                shape_string(gray));
    std::vector<int64_t> reps(static_cast<size_t>(gray.dim()), 1);
    reps[reps.size() - 3] = 3;
    return gray.repeat(reps);
}

// [-1,1] -> [0,1]
inline torch::Tensor to_unit_range(const torch::Tensor& t) { return (t + 1.0) * 0.5; }

/// One image, channels x height x width, values in [-1, 1].
///
/// Owns a private copy of its pixels, so a Frame is an immutable value.
class Frame {
public:
    Frame(torch::Tensor data, ColorSpace space) : data_(std::move(data)), space_(space) {
        if (!data_.defined() || data_.dim() != 3) {
            throw DataError("Frame expects a [C,H,W] tensor");
        }
        const int64_t expected = space_ == ColorSpace::grayscale ? 1 : 3;
        if (data_.size(0) != expected) {
            throw DataError("Frame: " + std::string(to_string(space_)) + " needs " +
                            std::to_string(expected) + " channel(s), got " + shape_string(data_));
        }
        if (!data_.is_floating_point()) {
            throw DataError("Frame data must be floating point");
        }
        data_ = data_.detach().to(torch::kCPU).contiguous().clone();
        if (data_.numel() > 0) {
            if (!torch::isfinite(data_).all().item<bool>()) {
                throw DataError("Frame contains non-finite values");
            }
            if (data_.min().item<double>() < -1.0 || data_.max().item<double>() > 1.0) {
                throw DataError("Frame values outside [-1, 1]");
            }
        }
    }

    // Infers the color space from the channel count.
    static Frame from_tensor(torch::Tensor data) {
        if (data.dim() != 3) throw DataError("Frame expects a [C,H,W] tensor");
        const auto c = data.size(0);
        if (c == 1) return Frame(std::move(data), ColorSpace::grayscale);
        if (c == 3) return Frame(std::move(data), ColorSpace::rgb);
        throw DataError("Frame channel count must be 1 or 3, got " + std::to_string(c));
    }

    const torch::Tensor& data() const noexcept { return data_; }
    ColorSpace color_space() const noexcept { return space_; }
    int64_t channels() const { return data_.size(0); }
    int64_t height() const { return data_.size(1); }
    int64_t width() const { return data_.size(2); }

private:
    torch::Tensor data_;
    ColorSpace space_;
};

/// Ordered frames sharing shape and color space; length >= 1.
class VideoClip {
public:
    explicit VideoClip(std::vector<Frame> frames) : frames_(std::move(frames)) {
        if (frames_.empty()) throw DataError("VideoClip needs at least one frame");
        const auto& first = frames_.front();
        for (size_t i = 1; i < frames_.size(); ++i) {
            const auto& f = frames_[i];
            if (f.color_space() != first.color_space() || !f.data().sizes().equals(first.data().sizes())) {
                throw DataError("VideoClip frame " + std::to_string(i) + " has shape " +
                                shape_string(f.data()) + ", expected " + shape_string(first.data()));
            }
        }
    }

    size_t length() const noexcept { return frames_.size(); }
    const Frame& operator[](size_t i) const { return frames_.at(i); }
    const std::vector<Frame>& frames() const noexcept { return frames_; }
    ColorSpace color_space() const { return frames_.front().color_space(); }
    int64_t height() const { return frames_.front().height(); }
    int64_t width() const { return frames_.front().width(); }

    // [T, C, H, W]
    torch::Tensor stacked() const {
        std::vector<torch::Tensor> ts;
        ts.reserve(frames_.size());
        for (const auto& f : frames_) ts.push_back(f.data());
        return torch::stack(ts);
    }

private:
    std::vector<Frame> frames_;
};

/// Per-pixel displacement [2, H, W] in pixels. Channel 0 is horizontal,
/// channel 1 vertical. flow(p) points from target pixel p to its source
/// location in the earlier frame.
class FlowField {
public:
    explicit FlowField(torch::Tensor data) : data_(std::move(data)) {
        if (!data_.defined() || data_.dim() != 3 || data_.size(0) != 2) {
            throw DataError("FlowField expects a [2,H,W] tensor");
        }
        if (!data_.is_floating_point()) throw DataError("FlowField must be floating point");
        data_ = data_.detach().to(torch::kCPU).contiguous().clone();
        if (!torch::isfinite(data_).all().item<bool>()) {
            throw DataError("FlowField contains non-finite values");
        }
    }

    static FlowField zeros(int64_t height, int64_t width, torch::Dtype dtype = torch::kFloat32) {
        return FlowField(torch::zeros({2, height, width}, dtype));
    }
    static FlowField uniform(int64_t height, int64_t width, double dx, double dy,
                             torch::Dtype dtype = torch::kFloat32) {
        auto t = torch::empty({2, height, width}, dtype);
        t[0].fill_(dx);
        t[1].fill_(dy);
        return FlowField(std::move(t));
    }

    const torch::Tensor& data() const noexcept { return data_; }
    int64_t height() const { return data_.size(1); }
    int64_t width() const { return data_.size(2); }

private:
    torch::Tensor data_;
};

/// Per-pixel weight [1, H, W] in [0, 1]; 1 marks a clean (non-occluded) pixel.
class OcclusionMask {
public:
    explicit OcclusionMask(torch::Tensor data) : data_(std::move(data)) {
        if (!data_.defined() || data_.dim() != 3 || data_.size(0) != 1) {
            throw DataError("OcclusionMask expects a [1,H,W] tensor");
        }
        data_ = data_.detach().to(torch::kCPU).contiguous().clone();
        if (data_.numel() > 0 && (data_.min().item<double>() < 0.0 || data_.max().item<double>() > 1.0)) {
            throw DataError("OcclusionMask values outside [0, 1]");
        }
    }

    static OcclusionMask ones(int64_t height, int64_t width, torch::Dtype dtype = torch::kFloat32) {
        return OcclusionMask(torch::ones({1, height, width}, dtype));
    }

    const torch::Tensor& data() const noexcept { return data_; }
    int64_t height() const { return data_.size(1); }
    int64_t width() const { return data_.size(2); }

private:
    torch::Tensor data_;
};

inline Frame to_grayscale(const Frame& frame) {
    if (frame.color_space() != ColorSpace::rgb) {
        throw DataError("to_grayscale: input is already grayscale");
    }
    return Frame(gray_from_rgb(frame.data()).clamp(-1.0, 1.0), ColorSpace::grayscale);
}

inline Frame replicate_channels(const Frame& frame) {
    if (frame.channels() != 1) {
        throw DataError("replicate_channels: expected 1 channel, got " + std::to_string(frame.channels()));
    }
    return Frame(replicate_gray(frame.data()), ColorSpace::rgb);
}

// Integer pixels in [0,255], shaped [C,H,W], to a Frame via v/127.5 - 1.
inline Frame normalize(const torch::Tensor& raw_pixels) {
    if (raw_pixels.dim() != 3) throw DataError("normalize expects a [C,H,W] grid");
    if (raw_pixels.is_floating_point()) throw DataError("normalize expects integer pixels");
    auto wide = raw_pixels.to(torch::kInt64);
    if (wide.numel() > 0 && (wide.min().item<int64_t>() < 0 || wide.max().item<int64_t>() > 255)) {
        throw DataError("normalize: pixel values outside [0, 255]");
    }
    auto data = wide.to(torch::kFloat32) / 127.5f - 1.0f;
    return Frame::from_tensor(data);
}

// Inverse of normalize, rounding to the nearest 8-bit level.
inline torch::Tensor denormalize(const Frame& frame) {
    return ((frame.data().to(torch::kFloat64) + 1.0) * 127.5).round().clamp(0, 255).to(torch::kUInt8);
}

}  // namespace vcgan
