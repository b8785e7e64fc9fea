#pragma once

#include <string>
#include <string_view>

#include "mpc/linalg.hpp"

namespace mpc {

// MPCT token file: "MPCT", u32 version=1, u32 T, u32 F, T*F f32 row-major.
inline constexpr std::uint32_t kTokenFormatVersion = 1;

std::string encode_tokens(const Matrix& tokens);
Matrix decode_tokens(std::string_view bytes, const std::string& what = "MPCT");

void write_tokens(const Matrix& tokens, const std::string& path);
Matrix read_tokens(const std::string& path);

}  // namespace mpc
