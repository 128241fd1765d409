// A trained ordinal classifier and its little-endian binary container.
//
// Container layout (all integers u32, all reals IEEE-754 binary64, little-endian):
//
//   magic        "ORDP" (4 bytes)
//   version      1
//   head         loss kind index (cross-entropy=0, fix-a, learn-a, learn-a-sigm, cheng, qwk=5)
//   k            number of classes
//   learnable    1 when the anchor vector is trained
//   layers       layer count L
//   L x { fan_in, fan_out, activation (identity=0, relu, softmax, sigmoid=3) }
//   features     input width d
//   reals        per layer: weight (fan_in*fan_out, row-major) then bias (fan_out);
//                anchors (k); standardizer mean (d); standardizer scale (d)
#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "ordinal/data.hpp"
#include "ordinal/error.hpp"
#include "ordinal/heads.hpp"
#include "ordinal/netcore.hpp"

namespace ordinal {

struct Model {
    LossKind head = LossKind::fix_a;
    int k = 2;
    NetworkParams network;
    AnchorVector anchors;
    Standardizer standardizer;

    friend bool operator==(const Model&, const Model&) = default;
};

inline AnchorVector initial_anchors(LossKind head, int k) {
    switch (head) {
        case LossKind::learn_a: return AnchorVector::trainable(k);
        case LossKind::learn_a_sigm: return AnchorVector::trainable_centered(k);
        default: return AnchorVector::fixed(k);
    }
}

/// Fresh network for `head`: input -> hidden (relu) -> head layer.
inline Model make_model(LossKind head, int k, std::size_t input_width, const std::vector<std::size_t>& hidden,
                        std::uint64_t seed) {
    std::vector<std::size_t> widths{input_width};
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(head_width(head, k));
    Model m{head, k, init_network(widths, Activation::relu, head_activation(head), seed),
            initial_anchors(head, k),
            Standardizer::identity(input_width)};
    return m;
}

inline constexpr std::array<char, 4> kParamsMagic = {'O', 'R', 'D', 'P'};
inline constexpr std::uint32_t kParamsVersion = 1;

namespace detail {

class LittleEndianWriter {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
    }
    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFu));
    }
    void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
    const std::vector<char>& bytes() const { return bytes_; }

private:
    std::vector<char> bytes_;
};

class LittleEndianReader {
public:
    explicit LittleEndianReader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
        return v;
    }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
        return std::bit_cast<double>(bits);
    }
    void expect(const std::array<char, 4>& magic) {
        need(4);
        for (char c : magic) {
            if (bytes_[pos_++] != c) throw ParseError("parameter file has a bad magic number");
        }
    }
    bool at_end() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw ParseError("parameter file is truncated");
    }
    std::vector<char> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<char> serialize(const Model& m) {
    detail::LittleEndianWriter w;
    w.raw(kParamsMagic.data(), kParamsMagic.size());
    w.u32(kParamsVersion);
    w.u32(static_cast<std::uint32_t>(m.head));
    w.u32(static_cast<std::uint32_t>(m.k));
    w.u32(m.anchors.learnable ? 1u : 0u);
    w.u32(static_cast<std::uint32_t>(m.network.layers.size()));
    for (const auto& layer : m.network.layers) {
        w.u32(static_cast<std::uint32_t>(layer.fan_in()));
        w.u32(static_cast<std::uint32_t>(layer.fan_out()));
        w.u32(static_cast<std::uint32_t>(layer.activation));
    }
    w.u32(static_cast<std::uint32_t>(m.standardizer.mean.size()));
    for (const auto& layer : m.network.layers) {
        for (double v : layer.weight.values()) w.f64(v);
        for (double v : layer.bias.values()) w.f64(v);
    }
    for (double v : m.anchors.values) w.f64(v);
    for (double v : m.standardizer.mean) w.f64(v);
    for (double v : m.standardizer.scale) w.f64(v);
    return w.bytes();
}

inline Model deserialize(std::vector<char> bytes) {
    detail::LittleEndianReader r(std::move(bytes));
    r.expect(kParamsMagic);
    const auto version = r.u32();
    if (version != kParamsVersion) throw ParseError("unsupported parameter file version " + std::to_string(version));
    const auto head = r.u32();
    if (head > static_cast<std::uint32_t>(LossKind::qwk)) throw ParseError("unknown head kind in parameter file");
    Model m;
    m.head = static_cast<LossKind>(head);
    m.k = static_cast<int>(r.u32());
    if (m.k < 2) throw ParseError("parameter file declares fewer than two classes");
    const bool learnable = r.u32() != 0;
    const auto depth = r.u32();
    std::vector<std::array<std::uint32_t, 3>> dims(depth);
    for (auto& d : dims) {
        d = {r.u32(), r.u32(), r.u32()};
        if (d[2] > static_cast<std::uint32_t>(Activation::sigmoid)) throw ParseError("unknown activation code");
    }
    const auto features = r.u32();
    for (const auto& d : dims) {
        DenseLayer layer{Tensor::matrix(d[0], d[1]), Tensor({d[1]}, 0.0), static_cast<Activation>(d[2])};
        for (auto& v : layer.weight.values()) v = r.f64();
        for (auto& v : layer.bias.values()) v = r.f64();
        m.network.layers.push_back(std::move(layer));
    }
    m.anchors = AnchorVector{std::vector<double>(static_cast<std::size_t>(m.k)), learnable};
    for (auto& v : m.anchors.values) v = r.f64();
    m.standardizer = Standardizer{std::vector<double>(features), std::vector<double>(features)};
    for (auto& v : m.standardizer.mean) v = r.f64();
    for (auto& v : m.standardizer.scale) v = r.f64();
    if (!r.at_end()) throw ParseError("trailing bytes in parameter file");
    m.network.validate();
    if (m.network.input_width() != features) throw ParseError("standardizer width does not match the network");
    if (m.network.output_width() != head_width(m.head, m.k)) throw ParseError("head width does not match k");
    return m;
}

inline void save_model(const Model& m, const std::string& path) {
    const auto bytes = serialize(m);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    return deserialize(std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()));
}

}  // namespace ordinal
