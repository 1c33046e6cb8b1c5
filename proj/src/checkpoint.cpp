#include "prednet/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "prednet/errors.hpp"

namespace prednet {

namespace {

constexpr char kMagic[4] = {'P', 'N', 'C', 'K'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is, const char* what) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw FormatError(std::string("checkpoint truncated reading ") + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& os, const float* v, std::size_t n) {
    static_assert(sizeof(float) == 4);
    // little-endian host assumed; serialize bytewise to keep the layout pinned
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, &v[i], 4);
        put_u32(os, bits);
    }
}

}  // namespace

void write_pnck(const ArrayMap& arrays, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open for writing: " + path);
    os.write(kMagic, 4);
    os.put(static_cast<char>(kVersion));
    for (const auto& [name, arr] : arrays) {  // std::map iterates sorted
        std::size_t n = 1;
        for (std::uint32_t e : arr.extents) n *= e;
        if (n != arr.data.size()) throw FormatError("array '" + name + "' extents do not match data length");
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<std::uint32_t>(arr.extents.size()));
        for (std::uint32_t e : arr.extents) put_u32(os, e);
        put_f32(os, arr.data.data(), arr.data.size());
    }
    if (!os) throw FormatError("write failed: " + path);
}

ArrayMap read_pnck(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad checkpoint magic in " + path);
    int version = is.get();
    if (version != kVersion)
        throw FormatError("unsupported checkpoint version " + std::to_string(version) + " in " + path);
    ArrayMap out;
    while (true) {
        int peek = is.peek();
        if (peek == std::char_traits<char>::eof()) break;
        std::uint32_t name_len = get_u32(is, "name length");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (!is) throw FormatError("checkpoint truncated reading name");
        std::uint32_t rank = get_u32(is, "rank");
        NamedArray arr;
        std::size_t n = 1;
        for (std::uint32_t r = 0; r < rank; ++r) {
            arr.extents.push_back(get_u32(is, "extent"));
            n *= arr.extents.back();
        }
        arr.data.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::uint32_t bits = get_u32(is, "data");
            float f;
            std::memcpy(&f, &bits, 4);
            arr.data[i] = f;
        }
        if (out.count(name)) throw FormatError("duplicate array '" + name + "' in " + path);
        out.emplace(std::move(name), std::move(arr));
    }
    return out;
}

}  // namespace prednet
