#pragma once

#include <string>
#include <string_view>

#include "mpc/model.hpp"
#include "mpc/training.hpp"

namespace mpc {

// MPCM checkpoint: "MPCM", u32 version=1, u32 tensor count, then per tensor
// [u16 name length][name][u8 rank][rank x u32 dims][f64 data]. Optimizer
// moments are stored as "adam.m.<name>" / "adam.v.<name>", the step count as
// the scalar "adam.step".
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct Checkpoint {
    ModelParams model;
    AdamState adam;
};

std::string encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(std::string_view bytes, const std::string& what = "MPCM");
void write_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace mpc
