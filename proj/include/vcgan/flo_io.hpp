#pragma once

// Middlebury .flo reader/writer.
//
// Layout (little-endian): float32 magic 202021.25, int32 width, int32 height,
// then height*width interleaved float32 (u, v) pairs in row-major order.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "vcgan/core_data.hpp"

namespace vcgan::io {

inline constexpr float kFloMagic = 202021.25f;

namespace detail {

template <typename T>
void put_le(std::vector<char>& out, T value) {
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out.insert(out.end(), bytes.begin(), bytes.end());
}

template <typename T>
T get_le(const char* p) {
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

}  // namespace detail

inline std::vector<char> encode_flo(const FlowField& flow) {
    const auto f = flow.data().to(torch::kFloat32).contiguous();
    const int32_t h = static_cast<int32_t>(flow.height());
    const int32_t w = static_cast<int32_t>(flow.width());
    std::vector<char> out;
    out.reserve(12 + static_cast<size_t>(h) * w * 8);
    detail::put_le(out, kFloMagic);
    detail::put_le(out, w);
    detail::put_le(out, h);
    auto acc = f.accessor<float, 3>();
    for (int32_t y = 0; y < h; ++y) {
        for (int32_t x = 0; x < w; ++x) {
            detail::put_le(out, acc[0][y][x]);
            detail::put_le(out, acc[1][y][x]);
        }
    }
    return out;
}

inline FlowField decode_flo(const std::vector<char>& bytes) {
    if (bytes.size() < 12) throw DataError(".flo: truncated header");
    if (detail::get_le<float>(bytes.data()) != kFloMagic) throw DataError(".flo: bad magic number");
    const auto w = detail::get_le<int32_t>(bytes.data() + 4);
    const auto h = detail::get_le<int32_t>(bytes.data() + 8);
    if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16)) throw DataError(".flo: implausible size");
    const size_t expected = 12 + static_cast<size_t>(w) * h * 8;
    if (bytes.size() != expected) {
        throw DataError(".flo: expected " + std::to_string(expected) + " bytes, got " + std::to_string(bytes.size()));
    }
    auto t = torch::empty({2, h, w}, torch::kFloat32);
    auto acc = t.accessor<float, 3>();
    const char* p = bytes.data() + 12;
    for (int32_t y = 0; y < h; ++y) {
        for (int32_t x = 0; x < w; ++x) {
            acc[0][y][x] = detail::get_le<float>(p);
            acc[1][y][x] = detail::get_le<float>(p + 4);
            p += 8;
        }
    }
    return FlowField(std::move(t));
}

inline void write_flo(const std::filesystem::path& path, const FlowField& flow) {
    const auto bytes = encode_flo(flow);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open " + path.string() + " for writing");
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw DataError("failed writing " + path.string());
}

inline FlowField read_flo(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return decode_flo(bytes);
}

// "<stem of frame t-1>_<stem of frame t>.flo"
inline std::string flow_filename(const std::filesystem::path& prev_frame, const std::filesystem::path& frame) {
    return prev_frame.stem().string() + "_" + frame.stem().string() + ".flo";
}

}  // namespace vcgan::io
