#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "cmanomaly/error.hpp"
#include "cmanomaly/model.hpp"

namespace cmanomaly {

// Binary model container, version 1. Integers are little-endian, doubles are IEEE-754
// bit patterns stored as little-endian u64. The file ends with an FNV-1a 64 checksum of
// everything before it. Full layout in docs/model_format.md.
namespace model_io {

inline constexpr char kMagic[4] = {'C', 'M', 'A', 'M'};
inline constexpr std::uint32_t kVersion = 1;

inline constexpr std::uint8_t kFlagAblate = 1u << 0;
inline constexpr std::uint8_t kFlagPooled = 1u << 1;
inline constexpr std::uint8_t kFlagReluOutput = 1u << 2;
inline constexpr std::uint8_t kFlagL2Loss = 1u << 3;

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_f64_vec(std::string& out, const std::vector<double>& v) {
    for (double x : v) put_f64(out, x);
}

// Bounds-checked cursor over the loaded bytes.
struct Reader {
    const std::string& bytes;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > bytes.size()) throw InputError("model file is truncated");
    }

    std::uint8_t u8() {
        need(1);
        return static_cast<std::uint8_t>(bytes[pos++]);
    }

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * i);
        return v;
    }

    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i)
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * i);
        return v;
    }

    double f64() { return std::bit_cast<double>(u64()); }

    std::vector<double> f64_vec(std::size_t n) {
        need(n * 8);
        std::vector<double> v(n);
        for (auto& x : v) x = f64();
        return v;
    }
};

inline std::string encode(const ForecastModel& model) {
    std::string out;
    out.append(kMagic, 4);
    put_u32(out, kVersion);
    std::uint8_t flags = 0;
    if (model.options.ablate_cm) flags |= kFlagAblate;
    if (model.options.pooled_interactions) flags |= kFlagPooled;
    if (model.options.relu_output) flags |= kFlagReluOutput;
    if (model.options.l2_loss) flags |= kFlagL2Loss;
    put_u8(out, flags);
    put_u64(out, model.omega);
    put_u64(out, model.m);
    put_u64(out, model.mlp.layers.size());
    for (std::size_t w : model.mlp.widths) put_u64(out, w);

    put_u64(out, model.cm.feat_w.size());
    put_f64(out, model.cm.feat_bias);
    put_f64_vec(out, model.cm.feat_w);
    put_f64_vec(out, model.cm.feat_v);
    put_u64(out, model.cm.time_w.size());
    put_f64(out, model.cm.time_bias);
    put_f64_vec(out, model.cm.time_w);
    put_f64_vec(out, model.cm.time_v);

    for (const MlpLayer& layer : model.mlp.layers) {
        for (std::size_t i = 0; i < layer.W.size(); ++i) put_f64(out, layer.W.data()[i]);
        put_f64_vec(out, layer.b);
    }

    put_u64(out, model.normalizer.mins.size());
    put_f64_vec(out, model.normalizer.mins);
    put_f64_vec(out, model.normalizer.maxs);

    put_u64(out, fnv1a64(out));
    return out;
}

inline ForecastModel decode(const std::string& bytes) {
    if (bytes.size() < 4 || bytes.compare(0, 4, kMagic, 4) != 0)
        throw InputError("not a model file: bad magic");
    if (bytes.size() < 4 + 4 + 1 + 8)
        throw InputError("model file is truncated");
    {
        std::string body = bytes.substr(0, bytes.size() - 8);
        Reader tail{bytes, bytes.size() - 8};
        if (tail.u64() != fnv1a64(body))
            throw InputError("model file is corrupt: checksum mismatch");
    }
    Reader r{bytes, 4};
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw InputError("unsupported model version " + std::to_string(version) +
                         ", this build reads version " + std::to_string(kVersion));
    ForecastModel model;
    const std::uint8_t flags = r.u8();
    model.options.ablate_cm = flags & kFlagAblate;
    model.options.pooled_interactions = flags & kFlagPooled;
    model.options.relu_output = flags & kFlagReluOutput;
    model.options.l2_loss = flags & kFlagL2Loss;
    model.omega = r.u64();
    model.m = r.u64();
    const std::uint64_t L = r.u64();
    if (L == 0 || L > (1u << 20)) throw InputError("malformed model file: layer count " + std::to_string(L));
    std::vector<std::size_t> widths(L + 1);
    for (auto& w : widths) {
        w = r.u64();
        if (w == 0) throw InputError("malformed model file: zero layer width");
    }

    const std::uint64_t feat_len = r.u64();
    model.cm.feat_bias = r.f64();
    model.cm.feat_w = r.f64_vec(feat_len);
    model.cm.feat_v = r.f64_vec(feat_len);
    const std::uint64_t time_len = r.u64();
    model.cm.time_bias = r.f64();
    model.cm.time_w = r.f64_vec(time_len);
    model.cm.time_v = r.f64_vec(time_len);

    model.mlp.widths = widths;
    model.mlp.layers.resize(L);
    for (std::size_t l = 0; l < L; ++l) {
        MlpLayer& layer = model.mlp.layers[l];
        layer.W = Matrix(widths[l], widths[l + 1]);
        for (std::size_t i = 0; i < layer.W.size(); ++i) layer.W.data()[i] = r.f64();
        layer.b = r.f64_vec(widths[l + 1]);
    }

    const std::uint64_t norm_n = r.u64();
    model.normalizer.mins = r.f64_vec(norm_n);
    model.normalizer.maxs = r.f64_vec(norm_n);

    if (r.pos + 8 != bytes.size())
        throw InputError("malformed model file: trailing bytes");
    const std::size_t expect_feat = model.options.ablate_cm ? 0 : model.m;
    const std::size_t expect_time = model.options.ablate_cm ? 0 : model.omega;
    if (feat_len != expect_feat || time_len != expect_time)
        throw InputError("malformed model file: interaction block does not match dimensions");
    if (widths.front() != model.input_width() || widths.back() != model.m)
        throw InputError("malformed model file: layer widths do not match dimensions");
    if (norm_n != 0 && norm_n != model.m)
        throw InputError("malformed model file: normalizer does not match metric count");
    return model;
}

} // namespace model_io

inline void save_model(const ForecastModel& model, const std::string& path) {
    std::string bytes = model_io::encode(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write model file: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw InputError("failed writing model file: " + path);
}

inline ForecastModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open model file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return model_io::decode(bytes);
}

} // namespace cmanomaly
