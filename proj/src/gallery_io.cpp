#include <string>

#include "mpc/binary_io.hpp"
#include "mpc/error.hpp"
#include "mpc/retrieval.hpp"

namespace mpc {

std::string encode_gallery(const Gallery& g) {
    binary::Writer w;
    w.bytes("MPCE");
    w.put<std::uint32_t>(kGalleryFormatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g.dim()));
    w.put<std::uint64_t>(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        w.put<std::uint64_t>(g.id(i));
        const auto& c = g.concepts(i);
        w.put<std::uint16_t>(static_cast<std::uint16_t>(c.size()));
        for (std::uint32_t v : c) w.put<std::uint32_t>(v);
        for (float v : g.mean(i)) w.put<float>(v);
        for (float v : g.log_var(i)) w.put<float>(v);
    }
    return w.take();
}

Gallery decode_gallery(std::string_view bytes, const std::string& what) {
    binary::Reader r(bytes, what);
    r.expect_magic("MPCE");
    const auto version = r.get<std::uint32_t>();
    if (version != kGalleryFormatVersion)
        throw Error(ErrorCode::VersionMismatch, what + ": unsupported version " + std::to_string(version));
    const auto dim = r.get<std::uint32_t>();
    const auto n = r.get<std::uint64_t>();
    Gallery g(dim);
    for (std::uint64_t i = 0; i < n; ++i) {
        const auto id = r.get<std::uint64_t>();
        const auto c = r.get<std::uint16_t>();
        std::vector<std::uint32_t> concepts(c);
        for (auto& v : concepts) v = r.get<std::uint32_t>();
        ProbEmbedding e{Vec(dim), Vec(dim)};
        for (auto& v : e.mean) v = r.get<float>();
        for (auto& v : e.log_var) v = r.get<float>();
        g.add(id, e, std::move(concepts));
    }
    if (r.remaining() != 0) throw Error(ErrorCode::Parse, what + ": trailing bytes after last record");
    return g;
}

void write_gallery(const Gallery& g, const std::string& path) { binary::write_file(path, encode_gallery(g)); }

Gallery read_gallery(const std::string& path) { return decode_gallery(binary::read_file(path), path); }

}  // namespace mpc
