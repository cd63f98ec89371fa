#pragma once

#include <filesystem>
#include <vector>

#include "crfsim/binio.hpp"
#include "crfsim/nn/sequential.hpp"

namespace crfsim::nn {

inline constexpr char kCheckpointMagic[4] = {'C', 'R', 'F', 'W'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

/// "CRFW", u16 version, u32 layer count, per-layer geometry, then every
/// parameter (weights then bias, layer by layer) as f64, all little-endian.
template <typename Scalar>
std::vector<std::uint8_t> encodeCheckpoint(const Sequential<Scalar>& net) {
    ByteWriter out;
    for (char c : kCheckpointMagic) out.put(static_cast<std::uint8_t>(c));
    out.put(kCheckpointVersion);
    out.put(static_cast<std::uint32_t>(net.layers().size()));
    for (const auto& l : net.layers()) {
        const auto& s = l.spec;
        out.put(static_cast<std::uint8_t>(s.kind));
        for (int v : {s.kernelH, s.kernelW, s.stride, s.padding, s.outputPadding, s.inChannels,
                      s.outChannels}) {
            out.put(static_cast<std::int32_t>(v));
        }
    }
    for (const auto& l : net.layers()) {
        if (!l.spec.hasParameters()) continue;
        for (Index i = 0; i < l.weight.size(); ++i) out.put(static_cast<double>(l.weight.values()[i]));
        for (Index i = 0; i < l.bias.size(); ++i) out.put(static_cast<double>(l.bias.values()[i]));
    }
    return std::move(out.bytes);
}

/// Rebuild a network from checkpoint bytes.
template <typename Scalar>
Sequential<Scalar> decodeCheckpoint(std::span<const std::uint8_t> bytes) {
    ByteReader in(bytes, "checkpoint");
    for (char c : kCheckpointMagic) {
        if (in.get<std::uint8_t>() != static_cast<std::uint8_t>(c)) {
            throw IoError("not a CRFW checkpoint (bad magic)");
        }
    }
    const auto version = in.get<std::uint16_t>();
    if (version != kCheckpointVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto count = in.get<std::uint32_t>();
    if (count > 4096) throw IoError("implausible checkpoint layer count " + std::to_string(count));
    std::vector<LayerSpec> specs(count);
    for (auto& s : specs) {
        const auto kind = in.get<std::uint8_t>();
        if (kind > static_cast<std::uint8_t>(LayerKind::Concat)) {
            throw IoError("unknown layer kind " + std::to_string(kind) + " in checkpoint");
        }
        s.kind = static_cast<LayerKind>(kind);
        for (int* v : {&s.kernelH, &s.kernelW, &s.stride, &s.padding, &s.outputPadding,
                       &s.inChannels, &s.outChannels}) {
            *v = in.get<std::int32_t>();
        }
    }
    Sequential<Scalar> net(specs);
    for (auto& l : net.layers()) {
        if (!l.spec.hasParameters()) continue;
        for (Index i = 0; i < l.weight.size(); ++i) l.weight.values()[i] = Scalar(in.get<double>());
        for (Index i = 0; i < l.bias.size(); ++i) l.bias.values()[i] = Scalar(in.get<double>());
    }
    if (in.remaining() != 0) throw IoError("trailing bytes after checkpoint parameters");
    return net;
}

/// Load parameters into `net`; the stored layer list must match its geometry.
template <typename Scalar>
void loadCheckpointInto(Sequential<Scalar>& net, std::span<const std::uint8_t> bytes) {
    auto loaded = decodeCheckpoint<Scalar>(bytes);
    const auto want = net.specs();
    const auto got = loaded.specs();
    if (want.size() != got.size()) {
        throw DimensionError("checkpoint has " + std::to_string(got.size()) + " layers, model expects " +
                             std::to_string(want.size()));
    }
    for (std::size_t i = 0; i < want.size(); ++i) {
        const auto& a = want[i];
        const auto& b = got[i];
        if (!(a == b)) {
            throw DimensionError("checkpoint layer " + std::to_string(i) + " is " +
                                 layerKindName(b.kind) + " " + std::to_string(b.inChannels) + "->" +
                                 std::to_string(b.outChannels) + " k" + std::to_string(b.kernelH) +
                                 ", model expects " + layerKindName(a.kind) + " " +
                                 std::to_string(a.inChannels) + "->" + std::to_string(a.outChannels) +
                                 " k" + std::to_string(a.kernelH));
        }
    }
    for (std::size_t i = 0; i < want.size(); ++i) {
        net.layers()[i].weight.values() = loaded.layers()[i].weight.values();
        net.layers()[i].bias.values() = loaded.layers()[i].bias.values();
    }
}

template <typename Scalar>
void saveCheckpoint(const std::filesystem::path& path, const Sequential<Scalar>& net) {
    writeFile(path, encodeCheckpoint(net));
}

template <typename Scalar>
void loadCheckpoint(const std::filesystem::path& path, Sequential<Scalar>& net) {
    const auto bytes = readFile(path);
    loadCheckpointInto(net, bytes);
}

}  // namespace crfsim::nn
