// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace aca {

/// One named array of a checkpoint file.
struct NamedArray {
    std::string name;
    std::vector<std::uint32_t> dims;
    std::vector<float> values;
};

/// Binary layout (little-endian):
///   "ACAS" | u32 version
///   repeated: u16 name_len | name | u8 rank | u32 dims[rank] | f32 values[prod(dims)]
inline constexpr std::uint32_t kCheckpointVersion = 1;

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
/// Throws LoadError naming the byte offset of the first inconsistency.
std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path);

} // namespace aca
