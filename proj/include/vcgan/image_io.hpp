#pragma once

// 8-bit PNG frame directories. Lexicographic filename order is frame order.

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "vcgan/core_data.hpp"

namespace vcgan::io {

namespace fs = std::filesystem;

inline std::vector<fs::path> list_files(const fs::path& dir, const std::string& extension) {
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == extension) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    return out;
}

inline std::vector<fs::path> list_pngs(const fs::path& dir) { return list_files(dir, ".png"); }

inline std::vector<fs::path> list_subdirs(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory()) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Converts an 8-bit OpenCV image (gray or BGR) into a normalized Frame.
inline Frame frame_from_mat(const cv::Mat& image) {
    cv::Mat rgb;
    if (image.channels() == 1) {
        rgb = image;
    } else if (image.channels() == 3) {
        cv::cvtColor(image, rgb, cv::COLOR_BGR2RGB);
    } else if (image.channels() == 4) {
        cv::cvtColor(image, rgb, cv::COLOR_BGRA2RGB);
    } else {
        throw DataError("unsupported channel count " + std::to_string(image.channels()));
    }
    if (rgb.depth() != CV_8U) throw DataError("only 8-bit images are supported");
    rgb = rgb.isContinuous() ? rgb : rgb.clone();
    const int c = rgb.channels();
    auto hwc = torch::from_blob(rgb.data, {rgb.rows, rgb.cols, c}, torch::kUInt8).clone();
    return normalize(hwc.permute({2, 0, 1}).contiguous());
}

inline cv::Mat mat_from_frame(const Frame& frame) {
    auto hwc = denormalize(frame).permute({1, 2, 0}).contiguous();
    const int c = static_cast<int>(frame.channels());
    cv::Mat view(static_cast<int>(frame.height()), static_cast<int>(frame.width()), CV_8UC(c), hwc.data_ptr());
    cv::Mat out;
    if (c == 3) {
        cv::cvtColor(view, out, cv::COLOR_RGB2BGR);
    } else {
        out = view.clone();
    }
    return out;
}

inline Frame read_png(const fs::path& path) {
    cv::Mat image = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
    if (image.empty()) throw DataError("cannot read image " + path.string());
    return frame_from_mat(image);
}

inline void write_png(const fs::path& path, const Frame& frame) {
    if (!cv::imwrite(path.string(), mat_from_frame(frame))) {
        throw DataError("cannot write image " + path.string());
    }
}

// Bilinear resize of a frame to (height, width); identity when sizes match.
inline Frame resize(const Frame& frame, int64_t height, int64_t width) {
    if (frame.height() == height && frame.width() == width) return frame;
    auto batched = frame.data().unsqueeze(0).to(torch::kFloat32);
    auto out = torch::nn::functional::interpolate(
        batched, torch::nn::functional::InterpolateFuncOptions()
                     .size(std::vector<int64_t>{height, width})
                     .mode(torch::kBilinear)
                     .align_corners(false));
    return Frame(out.squeeze(0).clamp(-1.0, 1.0), frame.color_space());
}

inline VideoClip read_frame_dir(const fs::path& dir) {
    const auto files = list_pngs(dir);
    if (files.empty()) throw DataError("no PNG frames in " + dir.string());
    std::vector<Frame> frames;
    frames.reserve(files.size());
    for (const auto& f : files) frames.push_back(read_png(f));
    return VideoClip(std::move(frames));
}

inline std::string frame_filename(size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%05zu.png", index);
    return buf;
}

inline std::vector<fs::path> write_frame_dir(const fs::path& dir, const VideoClip& clip) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw DataError("cannot create directory " + dir.string());
    std::vector<fs::path> written;
    for (size_t i = 0; i < clip.length(); ++i) {
        auto path = dir / frame_filename(i);
        write_png(path, clip[i]);
        written.push_back(path);
    }
    return written;
}

}  // namespace vcgan::io
