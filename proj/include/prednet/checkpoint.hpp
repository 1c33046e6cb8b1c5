#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace prednet {

// Flat container of named float arrays.
//
// Layout (little-endian):
//   magic "PNCK", version byte 1, then per entry:
//     u32 name length, name bytes (UTF-8),
//     u32 rank, u32 extents[rank],
//     f32 data[prod(extents)].
// Entries are written sorted by name; readers take entries until EOF.
struct NamedArray {
    std::vector<std::uint32_t> extents;
    std::vector<float> data;
};

using ArrayMap = std::map<std::string, NamedArray>;

void write_pnck(const ArrayMap& arrays, const std::string& path);
ArrayMap read_pnck(const std::string& path);

}  // namespace prednet
