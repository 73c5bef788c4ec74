#pragma once

// Synthetic videos with analytically exact flow and occlusion.
//
// A band-limited colored background pans by an integer displacement per
// frame; textured sprites move on top with their own integer velocities.
// Every pixel's source location in an earlier frame is known exactly, so
// warping with the returned flows reproduces frames bit-for-bit wherever the
// returned masks are 1.

#include <torch/torch.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "vcgan/core_data.hpp"
#include "vcgan/flo_io.hpp"
#include "vcgan/image_io.hpp"
#include "vcgan/losses.hpp"

namespace vcgan::synth {

struct SpriteSpec {
    int x = 0, y = 0;      // top-left at frame 0
    int vx = 0, vy = 0;    // screen velocity, pixels per frame
    int width = 6, height = 6;
    bool disc = false;
};

// Background displacement `dx, dy` for `frames` consecutive transitions.
struct MotionSegment {
    int frames = 1;
    int dx = 0, dy = 0;
};

struct SynthSpec {
    int64_t height = 32;
    int64_t width = 32;
    int length = 8;
    int dx = 1, dy = 0;                    // uniform translation when `segments` is empty
    std::vector<MotionSegment> segments;   // piecewise translation; the last segment repeats
    std::vector<SpriteSpec> sprites;
    uint64_t texture_seed = 1;
    uint64_t palette_seed = 2;
    int texture_components = 6;

    // Background displacement applied between frame k and k+1.
    std::pair<int, int> displacement(int k) const {
        if (segments.empty()) return {dx, dy};
        int start = 0;
        for (const auto& s : segments) {
            if (k < start + s.frames) return {s.dx, s.dy};
            start += s.frames;
        }
        return {segments.back().dx, segments.back().dy};
    }

    void validate() const {
        if (height < 4 || width < 4) throw UsageError("SynthSpec: resolution too small");
        if (length < 1) throw UsageError("SynthSpec: length must be >= 1");
        if (texture_components < 1) throw UsageError("SynthSpec: texture_components must be >= 1");
        const auto check = [&](int ddx, int ddy, const char* what) {
            if (std::abs(ddx) * 4 > width || std::abs(ddy) * 4 > height) {
                throw UsageError(std::string("SynthSpec: ") + what + " exceeds a quarter of the resolution");
            }
        };
        check(dx, dy, "translation");
        for (const auto& s : segments) {
            if (s.frames < 1) throw UsageError("SynthSpec: motion segment needs >= 1 frame");
            check(s.dx, s.dy, "segment translation");
        }
        for (const auto& s : sprites) {
            if (s.width < 1 || s.height < 1) throw UsageError("SynthSpec: sprite size must be positive");
            check(s.vx, s.vy, "sprite velocity");
        }
    }
};

struct SynthClip {
    VideoClip frames;                     // RGB
    std::vector<FlowField> flows;         // flows[k]: frame k -> k+1 (0-based)
    std::vector<OcclusionMask> masks;     // exact binary masks for flows[k]
    PairTensors pair_flows;               // every 1-based pair (m, t), m < t: [2,H,W]
    PairTensors pair_masks;               // matching exact binary masks [1,H,W]
};

namespace detail {

struct Wave {
    double fx, fy, phase, amplitude;
};

inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::vector<Wave> make_waves(std::mt19937_64& rng, int count, double max_freq) {
    std::vector<Wave> waves;
    for (int i = 0; i < count; ++i) {
        const double angle = 2.0 * std::numbers::pi * uniform01(rng);
        const double radius = max_freq * (0.25 + 0.75 * uniform01(rng));
        waves.push_back({radius * std::cos(angle), radius * std::sin(angle), 2.0 * std::numbers::pi * uniform01(rng),
                         0.5 + 0.5 * uniform01(rng)});
    }
    return waves;
}

inline double eval_waves(const std::vector<Wave>& waves, double x, double y) {
    double v = 0.0, norm = 0.0;
    for (const auto& w : waves) {
        v += w.amplitude * std::sin(2.0 * std::numbers::pi * (w.fx * x + w.fy * y) + w.phase);
        norm += w.amplitude;
    }
    return v / norm;  // [-1, 1]
}

// Two orthonormal chroma directions with zero BT.601 luma (w . v = 0).
inline std::array<std::array<double, 3>, 2> chroma_basis() {
    const std::array<double, 3> w{LumaWeights::red, LumaWeights::green, LumaWeights::blue};
    const auto normalize = [](std::array<double, 3> v) {
        const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
        for (auto& c : v) c /= n;
        return v;
    };
    const auto a = normalize({1.0, -w[0] / w[1], 0.0});
    const auto b = normalize({w[1] * a[2] - w[2] * a[1], w[2] * a[0] - w[0] * a[2], w[0] * a[1] - w[1] * a[0]});
    return {a, b};
}

class Scene {
public:
    Scene(const SynthSpec& spec, uint64_t seed) : spec_(spec) {
        std::mt19937_64 tex(spec.texture_seed * 0x9E3779B97F4A7C15ULL + seed);
        std::mt19937_64 pal(spec.palette_seed * 0xC2B2AE3D27D4EB4FULL + seed);
        luma_ = make_waves(tex, spec.texture_components, 1.0 / 8.0);
        hue_ = make_waves(tex, 3, 1.0 / 24.0);
        hue_offset_ = 2.0 * std::numbers::pi * uniform01(pal);
        hue_gain_ = 1.5 + 1.5 * uniform01(pal);
        chroma_amp_ = 0.25 + 0.15 * uniform01(pal);
        for (size_t i = 0; i < spec.sprites.size(); ++i) {
            sprite_color_.push_back({uniform01(pal) * 1.2 - 0.6, uniform01(pal) * 1.2 - 0.6, uniform01(pal) * 1.2 - 0.6});
            sprite_freq_.push_back(0.3 + 0.4 * uniform01(pal));
        }
        offsets_.push_back({0, 0});
        for (int k = 0; k + 1 < spec.length; ++k) {
            const auto [ddx, ddy] = spec.displacement(k);
            offsets_.push_back({offsets_.back().first + ddx, offsets_.back().second + ddy});
        }
        basis_ = chroma_basis();
    }

    // Object id at pixel (x, y) of frame t: -1 for background, else sprite index.
    int object_at(int t, int x, int y) const {
        for (int i = static_cast<int>(spec_.sprites.size()) - 1; i >= 0; --i) {
            if (sprite_covers(i, t, x, y)) return i;
        }
        return -1;
    }

    std::array<double, 3> color(int t, int x, int y) const {
        const int id = object_at(t, x, y);
        if (id < 0) {
            const double cx = x + offsets_[static_cast<size_t>(t)].first;
            const double cy = y + offsets_[static_cast<size_t>(t)].second;
            return background(cx, cy);
        }
        const auto& s = spec_.sprites[static_cast<size_t>(id)];
        const int lx = x - (s.x + t * s.vx), ly = y - (s.y + t * s.vy);
        const double pattern = 0.25 * std::sin(sprite_freq_[static_cast<size_t>(id)] * (lx + 2 * ly));
        const auto& c = sprite_color_[static_cast<size_t>(id)];
        return {clamp1(c[0] + pattern), clamp1(c[1] + pattern), clamp1(c[2] + pattern)};
    }

    // Exact backward flow at pixel (x, y) of frame t towards frame m < t.
    std::pair<int, int> flow(int m, int t, int x, int y) const {
        const int id = object_at(t, x, y);
        if (id < 0) {
            return {offsets_[static_cast<size_t>(t)].first - offsets_[static_cast<size_t>(m)].first,
                    offsets_[static_cast<size_t>(t)].second - offsets_[static_cast<size_t>(m)].second};
        }
        const auto& s = spec_.sprites[static_cast<size_t>(id)];
        return {-(t - m) * s.vx, -(t - m) * s.vy};
    }

    bool visible_in_source(int m, int t, int x, int y) const {
        const auto [fx, fy] = flow(m, t, x, y);
        const int sx = x + fx, sy = y + fy;
        if (sx < 0 || sy < 0 || sx >= spec_.width || sy >= spec_.height) return false;
        return object_at(m, sx, sy) == object_at(t, x, y);
    }

private:
    static double clamp1(double v) { return std::clamp(v, -1.0, 1.0); }

    bool sprite_covers(int i, int t, int x, int y) const {
        const auto& s = spec_.sprites[static_cast<size_t>(i)];
        const int lx = x - (s.x + t * s.vx), ly = y - (s.y + t * s.vy);
        if (lx < 0 || ly < 0 || lx >= s.width || ly >= s.height) return false;
        if (!s.disc) return true;
        const double rx = (s.width - 1) / 2.0, ry = (s.height - 1) / 2.0;
        const double nx = (lx - rx) / (rx + 0.5), ny = (ly - ry) / (ry + 0.5);
        return nx * nx + ny * ny <= 1.0;
    }

    std::array<double, 3> background(double cx, double cy) const {
        const double luma = 0.75 * eval_waves(luma_, cx, cy);
        const double theta = hue_offset_ + hue_gain_ * luma + std::numbers::pi * eval_waves(hue_, cx, cy);
        const double ca = chroma_amp_ * std::cos(theta), cb = chroma_amp_ * std::sin(theta);
        std::array<double, 3> rgb{};
        for (size_t c = 0; c < 3; ++c) rgb[c] = clamp1(luma + ca * basis_[0][c] + cb * basis_[1][c]);
        return rgb;
    }

    SynthSpec spec_;
    std::vector<Wave> luma_, hue_;
    double hue_offset_ = 0.0, hue_gain_ = 0.0, chroma_amp_ = 0.0;
    std::vector<std::array<double, 3>> sprite_color_;
    std::vector<double> sprite_freq_;
    std::vector<std::pair<int, int>> offsets_;
    std::array<std::array<double, 3>, 2> basis_{};
};

}  // namespace detail

/// Renders the clip described by `spec` with all exact flows and masks.
inline SynthClip make_clip(const SynthSpec& spec, uint64_t seed) {
    spec.validate();
    const detail::Scene scene(spec, seed);
    const int h = static_cast<int>(spec.height), w = static_cast<int>(spec.width);

    std::vector<Frame> frames;
    for (int t = 0; t < spec.length; ++t) {
        auto img = torch::empty({3, h, w}, torch::kFloat32);
        auto acc = img.accessor<float, 3>();
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const auto c = scene.color(t, x, y);
                for (int ch = 0; ch < 3; ++ch) acc[ch][y][x] = static_cast<float>(c[static_cast<size_t>(ch)]);
            }
        }
        frames.emplace_back(std::move(img), ColorSpace::rgb);
    }

    SynthClip clip{VideoClip(std::move(frames)), {}, {}, {}, {}};
    for (int t = 1; t < spec.length; ++t) {
        for (int m = 0; m < t; ++m) {
            auto flow = torch::empty({2, h, w}, torch::kFloat32);
            auto mask = torch::empty({1, h, w}, torch::kFloat32);
            auto fa = flow.accessor<float, 3>();
            auto ma = mask.accessor<float, 3>();
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const auto [fx, fy] = scene.flow(m, t, x, y);
                    fa[0][y][x] = static_cast<float>(fx);
                    fa[1][y][x] = static_cast<float>(fy);
                    ma[0][y][x] = scene.visible_in_source(m, t, x, y) ? 1.0f : 0.0f;
                }
            }
            const FramePair pair{m + 1, t + 1};
            clip.pair_flows[pair] = flow;
            clip.pair_masks[pair] = mask;
            if (m == t - 1) {
                clip.flows.emplace_back(flow);
                clip.masks.emplace_back(mask);
            }
        }
    }
    return clip;
}

/// Random but seed-determined clip specification: integer pan in
/// [-max_speed, max_speed]^2 and `sprite_count` moving sprites.
inline SynthSpec random_spec(int64_t height, int64_t width, int length, int max_speed, int sprite_count,
                             uint64_t seed) {
    std::mt19937_64 rng(seed * 0xD1B54A32D192ED03ULL + 7);
    auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<uint64_t>(hi - lo + 1)); };
    SynthSpec spec;
    spec.height = height;
    spec.width = width;
    spec.length = length;
    const int cap_x = std::min<int>(max_speed, static_cast<int>(width / 4));
    const int cap_y = std::min<int>(max_speed, static_cast<int>(height / 4));
    spec.dx = pick(-cap_x, cap_x);
    spec.dy = pick(-cap_y, cap_y);
    spec.texture_seed = rng();
    spec.palette_seed = rng();
    for (int i = 0; i < sprite_count; ++i) {
        SpriteSpec s;
        s.width = pick(3, std::max(3, static_cast<int>(width / 4)));
        s.height = pick(3, std::max(3, static_cast<int>(height / 4)));
        s.x = pick(0, static_cast<int>(width) - s.width);
        s.y = pick(0, static_cast<int>(height) - s.height);
        s.vx = pick(-cap_x, cap_x);
        s.vy = pick(-cap_y, cap_y);
        s.disc = (rng() & 1U) != 0;
        spec.sprites.push_back(s);
    }
    return spec;
}

/// Writes frame_XXXXX.png files and one "<prev>_<cur>.flo" per adjacent pair.
inline void export_clip(const VideoClip& frames, const std::vector<FlowField>& flows,
                        const std::filesystem::path& out_dir) {
    if (flows.size() + 1 != frames.length()) throw DataError("export_clip: need length-1 flows");
    const auto written = io::write_frame_dir(out_dir, frames);
    for (size_t k = 0; k < flows.size(); ++k) {
        io::write_flo(out_dir / io::flow_filename(written[k], written[k + 1]), flows[k]);
    }
}

struct ImportedClip {
    VideoClip frames;
    std::vector<FlowField> flows;
};

/// Reads frames and their adjacent flows. Flows are looked up in `flow_dir`
/// (defaults to the frame directory).
inline ImportedClip import_clip(const std::filesystem::path& dir, std::filesystem::path flow_dir = {}) {
    if (flow_dir.empty()) flow_dir = dir;
    const auto files = io::list_pngs(dir);
    if (files.empty()) throw DataError("no PNG frames in " + dir.string());
    std::vector<Frame> frames;
    for (const auto& f : files) frames.push_back(io::read_png(f));
    std::vector<FlowField> flows;
    for (size_t k = 1; k < files.size(); ++k) {
        const auto p = flow_dir / io::flow_filename(files[k - 1], files[k]);
        if (!std::filesystem::exists(p)) throw DataError("missing flow file " + p.string());
        flows.push_back(io::read_flo(p));
    }
    return {VideoClip(std::move(frames)), std::move(flows)};
}

}  // namespace vcgan::synth
