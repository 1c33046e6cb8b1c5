#include "prednet/image_io.hpp"

#include <algorithm>
#include <fstream>

#include "prednet/errors.hpp"

namespace prednet {

namespace {

unsigned char to_byte(float v) {
    const float x = std::clamp(v, 0.0f, 1.0f);
    return static_cast<unsigned char>(x * 255.0f + 0.5f);
}

}  // namespace

void write_pnm(const std::string& path, const float* data, int c, int h, int w) {
    if (c <= 0 || h <= 0 || w <= 0) throw DimensionError("write_pnm: empty image");
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open for writing: " + path);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    if (c == 3) {
        os << "P6\n" << w << " " << h << "\n255\n";
        for (std::size_t i = 0; i < plane; ++i) {
            os.put(static_cast<char>(to_byte(data[i])));
            os.put(static_cast<char>(to_byte(data[plane + i])));
            os.put(static_cast<char>(to_byte(data[2 * plane + i])));
        }
    } else {
        os << "P5\n" << w << " " << h << "\n255\n";
        for (std::size_t i = 0; i < plane; ++i) {
            float acc = 0.0f;
            for (int cc = 0; cc < c; ++cc) acc += data[cc * plane + i];
            os.put(static_cast<char>(to_byte(acc / static_cast<float>(c))));
        }
    }
    if (!os) throw FormatError("write failed: " + path);
}

}  // namespace prednet
