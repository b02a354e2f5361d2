#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include "crowdguard/ensemble.hpp"
#include "crowdguard/errors.hpp"
#include "crowdguard/nn.hpp"

namespace crowdguard {
namespace detail {

constexpr std::uint32_t kModelMagic = 0x4347454EU;  // "CGEN"
constexpr std::uint32_t kModelVersion = 1;

inline void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint32_t read_u32(std::istream& in, const std::string& path) {
    std::uint32_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(v))) throw DataError("model: truncated file: " + path);
    return v;
}

inline void write_tensor(std::ostream& out, const Tensor& t) {
    write_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) write_u32(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
}

inline Tensor read_tensor(std::istream& in, const std::string& path) {
    const auto ndim = read_u32(in, path);
    std::vector<int> shape(ndim);
    for (auto& d : shape) d = static_cast<int>(read_u32(in, path));
    Tensor t(shape);
    if (!in.read(reinterpret_cast<char*>(t.data.data()),
                 static_cast<std::streamsize>(t.data.size() * sizeof(float))))
        throw DataError("model: truncated file: " + path);
    return t;
}

}  // namespace detail

// Versioned binary model file: arch descriptor plus per-member weights.
// Momentum buffers are not stored; loaded ensembles are inference-only.
inline void save_ensemble(const Ensemble& ens, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("model: cannot write " + path);
    detail::write_u32(out, detail::kModelMagic);
    detail::write_u32(out, detail::kModelVersion);
    detail::write_u32(out, ens.arch.kind == ArchKind::Mlp ? 0 : 1);
    detail::write_u32(out, static_cast<std::uint32_t>(ens.arch.input_h));
    detail::write_u32(out, static_cast<std::uint32_t>(ens.arch.input_w));
    detail::write_u32(out, static_cast<std::uint32_t>(ens.arch.input_c));
    detail::write_u32(out, static_cast<std::uint32_t>(ens.arch.num_classes));
    detail::write_u32(out, static_cast<std::uint32_t>(ens.arch.hidden_sizes.size()));
    for (int h : ens.arch.hidden_sizes) detail::write_u32(out, static_cast<std::uint32_t>(h));
    detail::write_u32(out, static_cast<std::uint32_t>(ens.arch.conv_layers.size()));
    for (const auto& c : ens.arch.conv_layers) {
        detail::write_u32(out, static_cast<std::uint32_t>(c.out_channels));
        detail::write_u32(out, static_cast<std::uint32_t>(c.stride));
    }
    detail::write_u32(out, static_cast<std::uint32_t>(ens.num_classes));
    detail::write_u32(out, static_cast<std::uint32_t>(ens.members.size()));
    for (const auto& [id, params] : ens.members) {
        detail::write_u32(out, static_cast<std::uint32_t>(id));
        detail::write_u32(out, static_cast<std::uint32_t>(params.layers.size()));
        for (const auto& l : params.layers) {
            detail::write_tensor(out, l.w);
            detail::write_tensor(out, l.b);
        }
    }
}

inline Ensemble load_ensemble(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("model: cannot open " + path);
    if (detail::read_u32(in, path) != detail::kModelMagic) throw DataError("model: bad magic in " + path);
    const auto version = detail::read_u32(in, path);
    if (version != detail::kModelVersion)
        throw DataError("model: unsupported version " + std::to_string(version) + " in " + path);
    Ensemble ens;
    ens.arch.kind = detail::read_u32(in, path) == 0 ? ArchKind::Mlp : ArchKind::SmallConv;
    ens.arch.input_h = static_cast<int>(detail::read_u32(in, path));
    ens.arch.input_w = static_cast<int>(detail::read_u32(in, path));
    ens.arch.input_c = static_cast<int>(detail::read_u32(in, path));
    ens.arch.num_classes = static_cast<int>(detail::read_u32(in, path));
    ens.arch.hidden_sizes.resize(detail::read_u32(in, path));
    for (auto& h : ens.arch.hidden_sizes) h = static_cast<int>(detail::read_u32(in, path));
    ens.arch.conv_layers.resize(detail::read_u32(in, path));
    for (auto& c : ens.arch.conv_layers) {
        c.out_channels = static_cast<int>(detail::read_u32(in, path));
        c.stride = static_cast<int>(detail::read_u32(in, path));
    }
    ens.num_classes = static_cast<int>(detail::read_u32(in, path));
    const auto nmembers = detail::read_u32(in, path);
    for (std::uint32_t k = 0; k < nmembers; ++k) {
        const int id = static_cast<int>(detail::read_u32(in, path));
        ClassifierParams params;
        const auto nlayers = detail::read_u32(in, path);
        for (std::uint32_t li = 0; li < nlayers; ++li) {
            BasicLayerParams<float> l;
            l.w = detail::read_tensor(in, path);
            l.b = detail::read_tensor(in, path);
            l.vw = Tensor(l.w.shape);
            l.vb = Tensor(l.b.shape);
            params.layers.push_back(std::move(l));
        }
        ens.members.emplace_back(id, std::move(params));
    }
    ens.validate();
    return ens;
}

}  // namespace crowdguard
