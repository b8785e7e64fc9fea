#include "mpc/checkpoint.hpp"

#include <map>
#include <vector>

#include "mpc/binary_io.hpp"
#include "mpc/error.hpp"

namespace mpc {
namespace {

struct RawTensor {
    std::vector<std::uint32_t> shape;
    std::vector<double> data;
};

void put_tensor(binary::Writer& w, const std::string& name, const std::vector<std::uint32_t>& shape,
                std::span<const double> data) {
    w.put<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.bytes(name);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(shape.size()));
    for (auto d : shape) w.put<std::uint32_t>(d);
    for (double v : data) w.put<double>(v);
}

const RawTensor& take(const std::map<std::string, RawTensor>& m, const std::string& name, const std::string& what) {
    auto it = m.find(name);
    if (it == m.end()) throw Error(ErrorCode::Parse, what + ": missing tensor " + name);
    return it->second;
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
    const auto views = tensors(c.model);
    const bool with_adam = !c.adam.m.empty();
    if (with_adam && (c.adam.m.size() != views.size() || c.adam.v.size() != views.size()))
        throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match model");
    binary::Writer w;
    w.bytes("MPCM");
    w.put<std::uint32_t>(kCheckpointFormatVersion);
    const std::size_t count = views.size() * (with_adam ? 3 : 1) + (with_adam ? 1 : 0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(count));
    for (const auto& t : views) put_tensor(w, t.name, t.shape, t.data);
    if (with_adam) {
        for (std::size_t k = 0; k < views.size(); ++k) put_tensor(w, "adam.m." + views[k].name, views[k].shape, c.adam.m[k]);
        for (std::size_t k = 0; k < views.size(); ++k) put_tensor(w, "adam.v." + views[k].name, views[k].shape, c.adam.v[k]);
        const double step = static_cast<double>(c.adam.step);
        put_tensor(w, "adam.step", {}, std::span<const double>(&step, 1));
    }
    return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes, const std::string& what) {
    binary::Reader r(bytes, what);
    r.expect_magic("MPCM");
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointFormatVersion)
        throw Error(ErrorCode::VersionMismatch, what + ": unsupported version " + std::to_string(version));
    const auto count = r.get<std::uint32_t>();
    std::map<std::string, RawTensor> raw;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto len = r.get<std::uint16_t>();
        std::string name(r.bytes(len));
        RawTensor t;
        t.shape.resize(r.get<std::uint8_t>());
        std::size_t n = 1;
        for (auto& d : t.shape) {
            d = r.get<std::uint32_t>();
            n *= d;
        }
        if (n * sizeof(double) > r.remaining())
            throw Error(ErrorCode::TruncatedFile, what + ": tensor " + name + " exceeds file size");
        t.data.resize(n);
        for (auto& v : t.data) v = r.get<double>();
        if (!raw.emplace(name, std::move(t)).second) throw Error(ErrorCode::Parse, what + ": duplicate tensor " + name);
    }
    if (r.remaining() != 0) throw Error(ErrorCode::Parse, what + ": trailing bytes after last tensor");

    const auto& proj = take(raw, "image.proj_w", what);
    const auto& attn = take(raw, "image.attn_w1", what);
    if (proj.shape.size() != 2 || attn.shape.size() != 2)
        throw Error(ErrorCode::ShapeMismatch, what + ": projection/attention weights must be rank 2");
    const EmbedderDims dims{proj.shape[0], attn.shape[1], proj.shape[1]};
    Checkpoint c;
    c.model = init_model(dims, raw.count("fusion.w1") != 0, 0);
    auto views = tensors(c.model);
    std::size_t used = 0;
    for (auto& v : views) {
        const auto& t = take(raw, v.name, what);
        if (t.shape != v.shape) throw Error(ErrorCode::ShapeMismatch, what + ": tensor " + v.name + " has unexpected shape");
        std::copy(t.data.begin(), t.data.end(), v.data.begin());
        ++used;
    }
    if (raw.count("adam.step") != 0) {
        for (const auto& v : views) {
            const auto& m = take(raw, "adam.m." + v.name, what);
            const auto& s = take(raw, "adam.v." + v.name, what);
            if (m.shape != v.shape || s.shape != v.shape)
                throw Error(ErrorCode::ShapeMismatch, what + ": optimizer state for " + v.name + " has unexpected shape");
            c.adam.m.push_back(m.data);
            c.adam.v.push_back(s.data);
        }
        const auto& step = take(raw, "adam.step", what);
        if (step.data.size() != 1) throw Error(ErrorCode::ShapeMismatch, what + ": adam.step must be a scalar");
        c.adam.step = static_cast<std::uint64_t>(step.data[0]);
        used += 2 * views.size() + 1;
    }
    if (used != raw.size()) throw Error(ErrorCode::Parse, what + ": unknown tensors present");
    validate(c.model);
    return c;
}

void write_checkpoint(const Checkpoint& c, const std::string& path) { binary::write_file(path, encode_checkpoint(c)); }

Checkpoint read_checkpoint(const std::string& path) { return decode_checkpoint(binary::read_file(path), path); }

}  // namespace mpc
