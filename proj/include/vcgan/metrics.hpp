#pragma once

// Evaluation metrics: PSNR, SSIM and flow-based warp error, plus a directory
// harness that produces a MetricReport.
//
// All metrics are computed in [0,1] intensity scale.

#include <torch/torch.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <map>
#include <iterator>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "vcgan/core_data.hpp"
#include "vcgan/flo_io.hpp"
#include "vcgan/flow_warp.hpp"
#include "vcgan/image_io.hpp"
#include "vcgan/losses.hpp"

namespace vcgan {

inline constexpr double kPsnrCap = 100.0;

// a, b in [0,1] scale
inline double psnr_unit(const torch::Tensor& a, const torch::Tensor& b) {
    if (!a.sizes().equals(b.sizes())) throw DataError("psnr: shapes " + shape_string(a) + " and " + shape_string(b) + " differ");
    const double mse = (a.to(torch::kFloat64) - b.to(torch::kFloat64)).pow(2).mean().item<double>();
    if (mse <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

inline double psnr(const Frame& a, const Frame& b) {
    return psnr_unit(to_unit_range(a.data()), to_unit_range(b.data()));
}

struct SsimOptions {
    int window = 11;
    double sigma = 1.5;
    double data_range = 1.0;
    double k1 = 0.01;
    double k2 = 0.03;
};

namespace detail {

inline torch::Tensor gaussian_window(const SsimOptions& o) {
    auto x = torch::arange(o.window, torch::kFloat64) - (o.window - 1) / 2.0;
    auto g = torch::exp(-x.pow(2) / (2.0 * o.sigma * o.sigma));
    g = g / g.sum();
    return torch::outer(g, g).view({1, 1, o.window, o.window});
}

}  // namespace detail

/// Mean SSIM over valid (fully inside) window positions with a Gaussian
/// window; multi-channel inputs are averaged per channel. a, b: [C,H,W] in [0,1].
inline double ssim_unit(const torch::Tensor& a, const torch::Tensor& b, const SsimOptions& o = {}) {
    if (!a.sizes().equals(b.sizes()) || a.dim() != 3) {
        throw DataError("ssim: expected equal [C,H,W] shapes, got " + shape_string(a) + " and " + shape_string(b));
    }
    if (a.size(1) < o.window || a.size(2) < o.window) {
        throw DataError("ssim: frame " + shape_string(a) + " smaller than the " + std::to_string(o.window) + "x" +
                        std::to_string(o.window) + " window");
    }
    const auto win = detail::gaussian_window(o);
    const double c1 = std::pow(o.k1 * o.data_range, 2), c2 = std::pow(o.k2 * o.data_range, 2);
    auto x = a.to(torch::kFloat64).unsqueeze(1);  // [C,1,H,W]: channels as batch
    auto y = b.to(torch::kFloat64).unsqueeze(1);
    auto filt = [&](const torch::Tensor& t) { return torch::conv2d(t, win); };
    auto mx = filt(x), my = filt(y);
    auto sxx = filt(x * x) - mx * mx;
    auto syy = filt(y * y) - my * my;
    auto sxy = filt(x * y) - mx * my;
    auto map = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
    return map.mean({1, 2, 3}).mean().item<double>();
}

inline double ssim(const Frame& a, const Frame& b, const SsimOptions& o = {}) {
    return ssim_unit(to_unit_range(a.data()), to_unit_range(b.data()), o);
}

struct WarpErrorResult {
    double value = 0.0;                 // mean over evaluated steps
    std::vector<double> per_step;       // one entry per evaluated transition
    std::vector<size_t> skipped;        // 1-based target frames whose mask was empty
};

namespace detail {

// sum_p M(p) * ||v_t(p) - warped(p)||^2 / sum_p M(p); nullopt when the mask is empty.
inline std::optional<double> masked_sq_error(const torch::Tensor& current, const torch::Tensor& warped_prev,
                                             const torch::Tensor& mask) {
    const auto m = mask.to(torch::kFloat64).reshape({current.size(-2), current.size(-1)});
    const double weight = m.sum().item<double>();
    if (weight <= 0.0) return std::nullopt;
    const auto sq = (current.to(torch::kFloat64) - warped_prev.to(torch::kFloat64)).pow(2).sum(0);
    return (m * sq).sum().item<double>() / weight;
}

}  // namespace detail

/// Warp error over frames v ([C,H,W] tensors in [0,1] scale): per transition
/// t the masked mean of ||v_t - W(O_{t-1->t}, v_{t-1})||^2 over clean pixels,
/// averaged over the transitions that have a non-empty mask.
inline WarpErrorResult warp_error_unit(const std::vector<torch::Tensor>& video, const std::vector<torch::Tensor>& flows,
                                       const std::vector<torch::Tensor>& masks) {
    if (video.size() < 2) throw DataError("warp_error: needs at least 2 frames");
    if (flows.size() != video.size() - 1 || masks.size() != video.size() - 1) {
        throw DataError("warp_error: flow/mask count must be frame count - 1");
    }
    WarpErrorResult r;
    for (size_t t = 1; t < video.size(); ++t) {
        auto warped = warp(video[t - 1].to(torch::kFloat64), flows[t - 1].to(torch::kFloat64));
        auto e = detail::masked_sq_error(video[t], warped, masks[t - 1]);
        if (!e) {
            r.skipped.push_back(t + 1);
            continue;
        }
        r.per_step.push_back(*e);
    }
    if (!r.skipped.empty()) {
        std::ostringstream os;
        os << "warp_error: empty mask at frame(s)";
        for (auto s : r.skipped) os << ' ' << s;
        os << ", skipped";
        warn(os.str());
    }
    if (!r.per_step.empty()) {
        r.value = std::accumulate(r.per_step.begin(), r.per_step.end(), 0.0) / static_cast<double>(r.per_step.size());
    }
    return r;
}

inline WarpErrorResult warp_error(const VideoClip& video, const std::vector<FlowField>& flows,
                                  const std::vector<OcclusionMask>& binary_masks) {
    std::vector<torch::Tensor> v, f, m;
    for (const auto& fr : video.frames()) v.push_back(to_unit_range(fr.data()));
    for (const auto& fl : flows) f.push_back(fl.data());
    for (const auto& mk : binary_masks) m.push_back(mk.data());
    return warp_error_unit(v, f, m);
}

/// Same masked disparity evaluated on arbitrary (m, t) pairs with t - m >= min_gap.
inline WarpErrorResult pair_warp_error_unit(const std::vector<torch::Tensor>& video, const PairTensors& flows,
                                            const PairTensors& masks, int min_gap) {
    WarpErrorResult r;
    for (const auto& [pair, flow] : flows) {
        if (pair.second - pair.first < min_gap) continue;
        auto mask = masks.find(pair);
        if (mask == masks.end()) throw DataError("pair_warp_error: missing mask");
        if (pair.first < 1 || pair.second > static_cast<int>(video.size())) throw DataError("pair_warp_error: pair out of range");
        auto warped = warp(video[static_cast<size_t>(pair.first - 1)].to(torch::kFloat64), flow.to(torch::kFloat64));
        auto e = detail::masked_sq_error(video[static_cast<size_t>(pair.second - 1)], warped, mask->second);
        if (!e) {
            r.skipped.push_back(static_cast<size_t>(pair.second));
            continue;
        }
        r.per_step.push_back(*e);
    }
    if (!r.per_step.empty()) {
        r.value = std::accumulate(r.per_step.begin(), r.per_step.end(), 0.0) / static_cast<double>(r.per_step.size());
    }
    return r;
}

// ---------------------------------------------------------------------------
// Reports

struct VideoMetrics {
    std::string name;
    std::vector<std::string> frames;
    std::vector<double> psnr;
    std::vector<double> ssim;
    std::optional<double> warp_error;  // absent for single-frame videos
};

struct MetricReport {
    std::vector<VideoMetrics> videos;

    static double mean(const std::vector<double>& v) {
        return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    }
    double mean_psnr() const {
        std::vector<double> all;
        for (const auto& v : videos) all.insert(all.end(), v.psnr.begin(), v.psnr.end());
        return mean(all);
    }
    double mean_ssim() const {
        std::vector<double> all;
        for (const auto& v : videos) all.insert(all.end(), v.ssim.begin(), v.ssim.end());
        return mean(all);
    }
    std::optional<double> mean_warp_error() const {
        std::vector<double> all;
        for (const auto& v : videos) {
            if (v.warp_error) all.push_back(*v.warp_error);
        }
        if (all.empty()) return std::nullopt;
        return mean(all);
    }

    std::string to_csv() const {
        std::ostringstream os;
        os << std::setprecision(10);
        os << "video,frame,psnr,ssim,warp_error\n";
        for (const auto& v : videos) {
            for (size_t i = 0; i < v.frames.size(); ++i) {
                os << v.name << ',' << v.frames[i] << ',' << v.psnr[i] << ',' << v.ssim[i] << ",\n";
            }
            os << v.name << ",*,,," << (v.warp_error ? std::to_string(*v.warp_error) : std::string()) << '\n';
        }
        const auto we = mean_warp_error();
        os << "*,*," << mean_psnr() << ',' << mean_ssim() << ',' << (we ? std::to_string(*we) : std::string()) << '\n';
        return os.str();
    }

    std::string to_table() const {
        std::ostringstream os;
        os << std::left << std::setw(24) << "video" << std::right << std::setw(10) << "PSNR" << std::setw(10) << "SSIM"
           << std::setw(14) << "WarpError" << '\n';
        os << std::fixed;
        for (const auto& v : videos) {
            os << std::left << std::setw(24) << v.name << std::right << std::setprecision(3) << std::setw(10)
               << mean(v.psnr) << std::setprecision(4) << std::setw(10) << mean(v.ssim) << std::setprecision(6)
               << std::setw(14);
            if (v.warp_error) {
                os << *v.warp_error;
            } else {
                os << "-";
            }
            os << '\n';
        }
        const auto we = mean_warp_error();
        os << std::left << std::setw(24) << "mean" << std::right << std::setprecision(3) << std::setw(10) << mean_psnr()
           << std::setprecision(4) << std::setw(10) << mean_ssim() << std::setprecision(6) << std::setw(14);
        if (we) {
            os << *we;
        } else {
            os << "-";
        }
        os << '\n';
        return os.str();
    }
};

struct EvaluateOptions {
    double mask_threshold = 0.01;  // channel-mean squared error in [0,1] scale
};

namespace detail {

inline std::string list_names(const std::set<std::string>& names) {
    std::string s;
    for (const auto& n : names) s += (s.empty() ? "" : ", ") + n;
    return s;
}

inline VideoMetrics evaluate_video(const std::string& name, const std::filesystem::path& result_dir,
                                   const std::filesystem::path& gt_dir, const std::filesystem::path& flow_dir,
                                   const EvaluateOptions& options) {
    const auto gt_files = io::list_pngs(gt_dir);
    if (gt_files.empty()) throw DataError("no ground-truth frames in " + gt_dir.string());
    const auto result_files = io::list_pngs(result_dir);
    std::set<std::string> gt_names, result_names;
    for (const auto& f : gt_files) gt_names.insert(f.filename().string());
    for (const auto& f : result_files) result_names.insert(f.filename().string());
    if (gt_names != result_names) {
        std::set<std::string> missing, extra;
        std::set_difference(gt_names.begin(), gt_names.end(), result_names.begin(), result_names.end(),
                            std::inserter(missing, missing.end()));
        std::set_difference(result_names.begin(), result_names.end(), gt_names.begin(), gt_names.end(),
                            std::inserter(extra, extra.end()));
        throw DataError("evaluate: frame sets differ for '" + name + "'; missing in results: [" + list_names(missing) +
                        "], extra in results: [" + list_names(extra) + "]");
    }

    VideoMetrics vm;
    vm.name = name;
    std::vector<torch::Tensor> results, gts;
    for (const auto& gt_path : gt_files) {
        const auto gt = io::read_png(gt_path);
        auto res = io::read_png(result_dir / gt_path.filename());
        res = io::resize(res, gt.height(), gt.width());
        if (res.channels() != gt.channels()) {
            res = res.channels() == 1 ? replicate_channels(res) : to_grayscale(res);
        }
        vm.frames.push_back(gt_path.filename().string());
        vm.psnr.push_back(psnr(res, gt));
        vm.ssim.push_back(ssim(res, gt));
        results.push_back(to_unit_range(res.data()));
        gts.push_back(to_unit_range(gt.data()));
    }
    if (gt_files.size() >= 2) {
        std::vector<torch::Tensor> flows, masks;
        for (size_t t = 1; t < gt_files.size(); ++t) {
            const auto flow_path = flow_dir / io::flow_filename(gt_files[t - 1], gt_files[t]);
            if (!std::filesystem::exists(flow_path)) throw DataError("evaluate: missing flow " + flow_path.string());
            auto flow = io::read_flo(flow_path).data();
            auto warped_gt = warp(gts[t - 1], flow);
            masks.push_back(binary_mask(gts[t], warped_gt, options.mask_threshold));
            flows.push_back(flow);
        }
        vm.warp_error = warp_error_unit(results, flows, masks).value;
    }
    return vm;
}

}  // namespace detail

/// Compares a directory of results against ground truth. Either directory
/// holds PNG frames directly (one video) or one subdirectory per video; the
/// flow directory mirrors that layout with "<prev>_<cur>.flo" files.
/// Results are resized to the ground-truth resolution first.
inline MetricReport evaluate_dirs(const std::filesystem::path& result_dir, const std::filesystem::path& gt_dir,
                                  const std::filesystem::path& flow_dir, const EvaluateOptions& options = {}) {
    MetricReport report;
    if (!io::list_pngs(gt_dir).empty()) {
        report.videos.push_back(detail::evaluate_video(gt_dir.filename().string(), result_dir, gt_dir, flow_dir, options));
        return report;
    }
    const auto subdirs = io::list_subdirs(gt_dir);
    if (subdirs.empty()) throw DataError("evaluate: no frames or videos in " + gt_dir.string());
    for (const auto& sub : subdirs) {
        const auto name = sub.filename().string();
        if (!std::filesystem::is_directory(result_dir / name)) {
            throw DataError("evaluate: result directory lacks video '" + name + "'");
        }
        report.videos.push_back(detail::evaluate_video(name, result_dir / name, sub, flow_dir / name, options));
    }
    return report;
}

}  // namespace vcgan
