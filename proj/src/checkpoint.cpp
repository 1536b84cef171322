// SPDX-License-Identifier: Apache-2.0
#include "aca/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "aca/errors.hpp"
#include "aca/little_endian.hpp"

namespace aca {

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
    ByteWriter out;
    out.bytes("ACAS", 4);
    out.u32(kCheckpointVersion);
    for (const auto& a : arrays) {
        if (a.name.size() > 0xFFFF) throw ConfigError("checkpoint name too long: " + a.name);
        if (a.dims.size() > 0xFF) throw ConfigError("checkpoint rank too large: " + a.name);
        std::size_t n = 1;
        for (auto d : a.dims) n *= d;
        if (n != a.values.size()) throw ConfigError("checkpoint array '" + a.name + "' has inconsistent size");
        out.u16(static_cast<std::uint16_t>(a.name.size()));
        out.bytes(a.name.data(), a.name.size());
        out.u8(static_cast<std::uint8_t>(a.dims.size()));
        for (auto d : a.dims) out.u32(d);
        for (float v : a.values) out.f32(v);
    }
    write_file(path, out.buffer());
}

std::vector<NamedArray> read_checkpoint(const std::filesystem::path& path) {
    const std::vector<unsigned char> data = read_file(path);
    ByteReader in(data);
    if (data.size() < 4 || std::memcmp(data.data(), "ACAS", 4) != 0) throw LoadError(0, "bad checkpoint magic");
    in.skip(4);
    const std::uint32_t version = in.u32();
    if (version != kCheckpointVersion)
        throw LoadError(4, "unsupported checkpoint version " + std::to_string(version));
    std::vector<NamedArray> arrays;
    while (!in.done()) {
        NamedArray a;
        const std::uint16_t len = in.u16();
        a.name = in.string(len);
        const std::uint8_t rank = in.u8();
        std::size_t n = 1;
        for (int i = 0; i < rank; ++i) {
            a.dims.push_back(in.u32());
            n *= a.dims.back();
        }
        if (n > in.remaining() / 4) throw LoadError(in.offset(), "truncated values of '" + a.name + "'");
        a.values.resize(n);
        for (auto& v : a.values) v = in.f32();
        arrays.push_back(std::move(a));
    }
    return arrays;
}

} // namespace aca
