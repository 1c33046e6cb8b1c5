#pragma once

#include <string>
#include <vector>

namespace prednet {

// Binary PGM (P5) / PPM (P6) dumps, maxval 255, values clamped from [0,1].
// c == 3 writes PPM; any other channel count is averaged into one plane.
void write_pnm(const std::string& path, const float* data, int c, int h, int w);

}  // namespace prednet
