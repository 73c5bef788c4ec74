#pragma once

// Single-file checkpoint container.
//
//   bytes 0..7   "VCGANCKP"
//   uint32       format version
//   uint64 + n   metadata JSON (configs, schedule position, RNG state)
//   uint64       array count
//   per array:   uint32 name length, name, uint8 dtype, uint32 rank,
//                int64 dims[rank], raw little-endian element bytes
//
// Arrays are stored bit-exactly, so save -> load -> forward reproduces the
// original outputs exactly.

#include <torch/torch.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "vcgan/errors.hpp"

namespace vcgan {

inline constexpr char kCheckpointMagic[8] = {'V', 'C', 'G', 'A', 'N', 'C', 'K', 'P'};
inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    nlohmann::json metadata = nlohmann::json::object();
    std::map<std::string, torch::Tensor> arrays;

    void save(const std::filesystem::path& path) const;
    static Checkpoint load(const std::filesystem::path& path);

    const torch::Tensor& array(const std::string& name) const {
        auto it = arrays.find(name);
        if (it == arrays.end()) throw DataError("checkpoint lacks array '" + name + "'");
        return it->second;
    }
    bool has_prefix(const std::string& prefix) const {
        auto it = arrays.lower_bound(prefix);
        return it != arrays.end() && it->first.compare(0, prefix.size(), prefix) == 0;
    }
};

namespace detail {

inline uint8_t dtype_code(torch::ScalarType t) {
    switch (t) {
        case torch::kFloat32: return 0;
        case torch::kFloat64: return 1;
        case torch::kInt64: return 2;
        case torch::kInt32: return 3;
        case torch::kUInt8: return 4;
        default: throw DataError("checkpoint: unsupported dtype");
    }
}

inline torch::ScalarType dtype_from_code(uint8_t c) {
    switch (c) {
        case 0: return torch::kFloat32;
        case 1: return torch::kFloat64;
        case 2: return torch::kInt64;
        case 3: return torch::kInt32;
        case 4: return torch::kUInt8;
        default: throw DataError("checkpoint: unknown dtype code " + std::to_string(c));
    }
}

template <typename T>
void write_pod(std::ostream& os, T v) {
    static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw DataError("checkpoint: truncated file");
    return v;
}

}  // namespace detail

inline void Checkpoint::save(const std::filesystem::path& path) const {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw DataError("cannot write checkpoint " + path.string());
        os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
        detail::write_pod<uint32_t>(os, kCheckpointVersion);
        const auto meta = metadata.dump();
        detail::write_pod<uint64_t>(os, meta.size());
        os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
        detail::write_pod<uint64_t>(os, arrays.size());
        for (const auto& [name, tensor] : arrays) {
            const auto t = tensor.detach().to(torch::kCPU).contiguous();
            detail::write_pod<uint32_t>(os, static_cast<uint32_t>(name.size()));
            os.write(name.data(), static_cast<std::streamsize>(name.size()));
            detail::write_pod<uint8_t>(os, detail::dtype_code(t.scalar_type()));
            detail::write_pod<uint32_t>(os, static_cast<uint32_t>(t.dim()));
            for (int64_t d = 0; d < t.dim(); ++d) detail::write_pod<int64_t>(os, t.size(d));
            os.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
        }
        if (!os) throw DataError("failed writing checkpoint " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

inline Checkpoint Checkpoint::load(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint " + path.string());
    char magic[sizeof(kCheckpointMagic)];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
        throw DataError(path.string() + " is not a checkpoint file");
    }
    const auto version = detail::read_pod<uint32_t>(is);
    if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    const auto meta_len = detail::read_pod<uint64_t>(is);
    std::string meta(meta_len, '\0');
    is.read(meta.data(), static_cast<std::streamsize>(meta_len));
    if (!is) throw DataError("checkpoint: truncated metadata");
    ckpt.metadata = nlohmann::json::parse(meta);
    const auto count = detail::read_pod<uint64_t>(is);
    for (uint64_t i = 0; i < count; ++i) {
        const auto name_len = detail::read_pod<uint32_t>(is);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        const auto dtype = detail::dtype_from_code(detail::read_pod<uint8_t>(is));
        const auto rank = detail::read_pod<uint32_t>(is);
        std::vector<int64_t> dims(rank);
        for (auto& d : dims) d = detail::read_pod<int64_t>(is);
        auto t = torch::empty(dims, dtype);
        is.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
        if (!is) throw DataError("checkpoint: truncated array '" + name + "'");
        ckpt.arrays.emplace(std::move(name), std::move(t));
    }
    return ckpt;
}

/// Copies every parameter and buffer of `module` into `ckpt` under `prefix`.
inline void store_module(Checkpoint& ckpt, const std::string& prefix, const torch::nn::Module& module) {
    for (const auto& p : module.named_parameters()) ckpt.arrays[prefix + p.key()] = p.value().detach().clone();
    for (const auto& b : module.named_buffers()) ckpt.arrays[prefix + b.key()] = b.value().detach().clone();
}

/// Loads parameters and buffers back; every module tensor must be present
/// with the same shape.
inline void restore_module(const Checkpoint& ckpt, const std::string& prefix, torch::nn::Module& module) {
    torch::NoGradGuard no_grad;
    auto load = [&](const std::string& key, torch::Tensor& dst) {
        const auto& src = ckpt.array(prefix + key);
        if (!src.sizes().equals(dst.sizes())) {
            throw DataError("checkpoint array '" + prefix + key + "' has a different shape than the model");
        }
        dst.copy_(src);
    };
    for (auto& p : module.named_parameters()) load(p.key(), p.value());
    for (auto& b : module.named_buffers()) load(b.key(), b.value());
}

/// Adam moments and step counts for the parameters of `module`.
inline void store_adam(Checkpoint& ckpt, const std::string& prefix, torch::optim::Adam& optimizer,
                       const torch::nn::Module& module) {
    auto& state = optimizer.state();
    for (const auto& p : module.named_parameters()) {
        auto it = state.find(p.value().unsafeGetTensorImpl());
        if (it == state.end()) continue;
        const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
        ckpt.arrays[prefix + p.key() + ".exp_avg"] = s.exp_avg().detach().clone();
        ckpt.arrays[prefix + p.key() + ".exp_avg_sq"] = s.exp_avg_sq().detach().clone();
        ckpt.arrays[prefix + p.key() + ".step"] = torch::tensor({s.step()}, torch::kInt64);
    }
}

inline void restore_adam(const Checkpoint& ckpt, const std::string& prefix, torch::optim::Adam& optimizer,
                         const torch::nn::Module& module) {
    auto& state = optimizer.state();
    for (const auto& p : module.named_parameters()) {
        const auto key = prefix + p.key();
        if (!ckpt.arrays.count(key + ".step")) continue;
        auto s = std::make_unique<torch::optim::AdamParamState>();
        s->step(ckpt.array(key + ".step").item<int64_t>());
        s->exp_avg(ckpt.array(key + ".exp_avg").clone());
        s->exp_avg_sq(ckpt.array(key + ".exp_avg_sq").clone());
        state[p.value().unsafeGetTensorImpl()] = std::move(s);
    }
}

}  // namespace vcgan
