#include "mpc/token_io.hpp"

#include <fstream>
#include <sstream>

#include "mpc/binary_io.hpp"
#include "mpc/error.hpp"

namespace mpc {

namespace binary {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

}  // namespace binary

std::string encode_tokens(const Matrix& tokens) {
    binary::Writer w;
    w.bytes("MPCT");
    w.put<std::uint32_t>(kTokenFormatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tokens.rows));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(tokens.cols));
    for (double v : tokens.data) w.put<float>(static_cast<float>(v));
    return w.take();
}

Matrix decode_tokens(std::string_view bytes, const std::string& what) {
    binary::Reader r(bytes, what);
    r.expect_magic("MPCT");
    const auto version = r.get<std::uint32_t>();
    if (version != kTokenFormatVersion)
        throw Error(ErrorCode::VersionMismatch, what + ": unsupported token format version " + std::to_string(version));
    const auto T = r.get<std::uint32_t>();
    const auto F = r.get<std::uint32_t>();
    Matrix m(T, F);
    for (double& v : m.data) v = static_cast<double>(r.get<float>());
    return m;
}

void write_tokens(const Matrix& tokens, const std::string& path) { binary::write_file(path, encode_tokens(tokens)); }

Matrix read_tokens(const std::string& path) { return decode_tokens(binary::read_file(path), path); }

}  // namespace mpc
