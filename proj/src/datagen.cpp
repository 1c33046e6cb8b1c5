#include "prednet/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <random>

#include "prednet/errors.hpp"
#include "prednet/tensor.hpp"

namespace prednet {

namespace {

constexpr std::array<std::pair<int, int>, 8> kDirections = {{
    {1, 0},    // E
    {1, -1},   // NE
    {0, -1},   // N
    {-1, -1},  // NW
    {-1, 0},   // W
    {-1, 1},   // SW
    {0, 1},    // S
    {1, 1},    // SE
}};

int sgn(int v) { return (v > 0) - (v < 0); }

void draw_rect(std::vector<float>& img, int h, int w, int x0, int y0, int rw, int rh, float val) {
    for (int y = std::max(0, y0); y < std::min(h, y0 + rh); ++y)
        for (int x = std::max(0, x0); x < std::min(w, x0 + rw); ++x) img[y * w + x] = val;
}

void draw_circle(std::vector<float>& img, int h, int w, int cx, int cy, int r, float val) {
    for (int y = std::max(0, cy - r); y <= std::min(h - 1, cy + r); ++y)
        for (int x = std::max(0, cx - r); x <= std::min(w - 1, cx + r); ++x)
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) img[y * w + x] = val;
}

void draw_triangle(std::vector<float>& img, int h, int w, const int px[3], const int py[3], float val) {
    auto edge = [](int ax, int ay, int bx, int by, int cx, int cy) {
        return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
    };
    const int x0 = std::max(0, std::min({px[0], px[1], px[2]}));
    const int x1 = std::min(w - 1, std::max({px[0], px[1], px[2]}));
    const int y0 = std::max(0, std::min({py[0], py[1], py[2]}));
    const int y1 = std::min(h - 1, std::max({py[0], py[1], py[2]}));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const int e0 = edge(px[0], py[0], px[1], py[1], x, y);
            const int e1 = edge(px[1], py[1], px[2], py[2], x, y);
            const int e2 = edge(px[2], py[2], px[0], py[0], x, y);
            if ((e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0)) img[y * w + x] = val;
        }
}

std::uint32_t get_u32_be(std::istream& is, const char* what) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw FormatError(std::string("IDX file truncated reading ") + what);
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

void put_u32_le(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32_le(std::istream& is, const char* what) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw FormatError(std::string("VSEQ file truncated reading ") + what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

// 5x7 digit bitmaps for the fallback glyph set
constexpr const char* kDigitRows[10][7] = {
    {"01110", "10001", "10011", "10101", "11001", "10001", "01110"},  // 0
    {"00100", "01100", "00100", "00100", "00100", "00100", "01110"},  // 1
    {"01110", "10001", "00001", "00110", "01000", "10000", "11111"},  // 2
    {"01110", "10001", "00001", "00110", "00001", "10001", "01110"},  // 3
    {"00010", "00110", "01010", "10010", "11111", "00010", "00010"},  // 4
    {"11111", "10000", "11110", "00001", "00001", "10001", "01110"},  // 5
    {"01110", "10000", "11110", "10001", "10001", "10001", "01110"},  // 6
    {"11111", "00001", "00010", "00100", "01000", "01000", "01000"},  // 7
    {"01110", "10001", "10001", "01110", "10001", "10001", "01110"},  // 8
    {"01110", "10001", "10001", "01111", "00001", "00001", "01110"},  // 9
};

}  // namespace

std::uint64_t SceneSpec::hash() const {
    std::string s = std::to_string(canvas_h) + "," + std::to_string(canvas_w) + "," + std::to_string(num_shapes) +
                    "," + std::to_string(glyph_size) + "," + std::to_string(speed) + "," + std::to_string(seq_len) +
                    "," + std::to_string(bg_min) + "," + std::to_string(bg_max) + "," + std::to_string(glyph_min) +
                    "," + std::to_string(glyph_max);
    return fnv1a(s);
}

void SceneSpec::validate() const {
    if (canvas_h <= 0 || canvas_w <= 0 || seq_len < 2 || glyph_size <= 0 || num_shapes < 0 || speed < 0)
        throw ContractError("scene spec: nonpositive extents");
    if (glyph_size + 2 > canvas_h || glyph_size + 2 > canvas_w)
        throw ContractError("scene spec: glyph does not fit inside the canvas with a 1 pixel margin");
    if (!(bg_min <= bg_max) || !(glyph_min <= glyph_max) || bg_min < 0 || bg_max > 1 || glyph_min < 0 ||
        glyph_max > 1)
        throw ContractError("scene spec: intensity ranges must be ordered and within [0,1]");
}

std::pair<int, int> direction_vector(int index, int speed) {
    if (index < 0 || index >= 8) throw ContractError("direction_vector: index must be in 0..7");
    return {kDirections[index].first * speed, kDirections[index].second * speed};
}

int direction_index(int dx, int dy) {
    const int sx = sgn(dx), sy = sgn(dy);
    for (int i = 0; i < 8; ++i)
        if (kDirections[i].first == sx && kDirections[i].second == sy) return i;
    throw ContractError("direction_index: zero displacement has no direction");
}

std::vector<float> gen_background(std::uint64_t seed, const SceneSpec& spec) {
    spec.validate();
    std::mt19937 rng(static_cast<std::uint32_t>(splitmix64(seed ^ 0xb6c5f02ae0d4a1ull)));
    std::uniform_real_distribution<double> intensity(spec.bg_min, spec.bg_max);
    const int h = spec.canvas_h, w = spec.canvas_w;
    std::vector<float> img(static_cast<std::size_t>(h) * w, static_cast<float>(intensity(rng)));
    std::uniform_int_distribution<int> kind_dist(0, 2);
    std::uniform_int_distribution<int> xs(0, w - 1), ys(0, h - 1);
    std::uniform_int_distribution<int> extent(3, std::max(3, w / 2));
    std::uniform_int_distribution<int> radius(2, std::max(2, std::min(h, w) / 4));
    for (int i = 0; i < spec.num_shapes; ++i) {
        const int kind = kind_dist(rng);
        const float val = static_cast<float>(intensity(rng));
        if (kind == 0) {
            const int x0 = xs(rng), y0 = ys(rng), rw = extent(rng), rh = extent(rng);
            draw_rect(img, h, w, x0, y0, rw, rh, val);
        } else if (kind == 1) {
            const int cx = xs(rng), cy = ys(rng), r = radius(rng);
            draw_circle(img, h, w, cx, cy, r, val);
        } else {
            int px[3], py[3];
            for (int v = 0; v < 3; ++v) {
                px[v] = xs(rng);
                py[v] = ys(rng);
            }
            draw_triangle(img, h, w, px, py, val);
        }
    }
    return img;
}

LabeledSequence gen_sequence(std::uint64_t seed, const SceneSpec& spec, const std::vector<Glyph>& glyphs) {
    spec.validate();
    if (glyphs.empty()) throw ContractError("gen_sequence: glyph set is empty");
    const int h = spec.canvas_h, w = spec.canvas_w, g = spec.glyph_size;
    const int x_lo = 1, x_hi = w - g - 1;  // glyph box stays >= 1 pixel from the border
    const int y_lo = 1, y_hi = h - g - 1;

    std::vector<float> bg = gen_background(seed, spec);
    std::mt19937 rng(static_cast<std::uint32_t>(splitmix64(seed ^ 0x51ab9eec6da74309ull)));
    std::uniform_int_distribution<int> glyph_dist(0, static_cast<int>(glyphs.size()) - 1);
    std::uniform_int_distribution<int> dir_dist(0, 7);
    std::uniform_int_distribution<int> px(x_lo, x_hi), py(y_lo, y_hi);
    std::uniform_real_distribution<double> gi(spec.glyph_min, spec.glyph_max);

    const Glyph& glyph = glyphs[glyph_dist(rng)];
    if (glyph.size() != static_cast<std::size_t>(g) * g)
        throw ContractError("gen_sequence: glyph size does not match spec.glyph_size");
    int dir = dir_dist(rng);
    int x = px(rng), y = py(rng);
    const float glyph_val = static_cast<float>(gi(rng));
    if (spec.start_dir) dir = *spec.start_dir;
    if (spec.start_x) x = std::clamp(*spec.start_x, x_lo, x_hi);
    if (spec.start_y) y = std::clamp(*spec.start_y, y_lo, y_hi);
    if (dir < 0 || dir >= 8) throw ContractError("gen_sequence: start_dir out of range");

    LabeledSequence seq;
    seq.t = spec.seq_len;
    seq.c = 1;
    seq.h = h;
    seq.w = w;
    seq.seed = seed;
    seq.spec_hash = spec.hash();
    seq.frames.resize(static_cast<std::size_t>(seq.t) * h * w);
    seq.labels.resize(seq.t);

    for (int t = 0; t < seq.t; ++t) {
        float* frame = seq.frames.data() + static_cast<std::size_t>(t) * h * w;
        std::copy(bg.begin(), bg.end(), frame);
        for (int gy = 0; gy < g; ++gy)
            for (int gx = 0; gx < g; ++gx) {
                const float a = glyph[gy * g + gx];
                float& pix = frame[(y + gy) * w + (x + gx)];
                pix = pix * (1.0f - a) + glyph_val * a;
            }
        if (spec.speed == 0) {
            seq.labels[t] = static_cast<std::uint8_t>(dir);
            continue;
        }
        auto [dx, dy] = direction_vector(dir, spec.speed);
        if (x + dx < x_lo || x + dx > x_hi) dx = -dx;
        if (y + dy < y_lo || y + dy > y_hi) dy = -dy;
        dir = direction_index(dx, dy);
        seq.labels[t] = static_cast<std::uint8_t>(dir);
        x = std::clamp(x + dx, x_lo, x_hi);
        y = std::clamp(y + dy, y_lo, y_hi);
    }
    seq.labels[seq.t - 1] = seq.labels[seq.t - 2];
    return seq;
}

std::vector<LabeledSequence> gen_dataset(std::uint64_t seed, const SceneSpec& spec, const std::vector<Glyph>& glyphs,
                                         int count) {
    std::vector<LabeledSequence> out;
    out.reserve(count);
    const std::uint64_t stream = splitmix64(seed);
    for (int i = 0; i < count; ++i) out.push_back(gen_sequence(splitmix64(stream ^ (0x2545f4914f6cdd1dull * (i + 1))),
                                                               spec, glyphs));
    return out;
}

std::vector<Glyph> load_digits_idx(const std::string& path, int glyph_size) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open IDX file: " + path);
    const std::uint32_t magic = get_u32_be(is, "magic");
    if (magic != 0x00000803u) throw FormatError("bad IDX magic in " + path);
    const std::uint32_t n = get_u32_be(is, "count");
    const std::uint32_t rows = get_u32_be(is, "rows");
    const std::uint32_t cols = get_u32_be(is, "cols");
    if (rows == 0 || cols == 0 || rows > 4096 || cols > 4096) throw FormatError("implausible IDX dims in " + path);
    std::vector<Glyph> glyphs;
    glyphs.reserve(n);
    std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
    for (std::uint32_t i = 0; i < n; ++i) {
        is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!is) throw FormatError("IDX file truncated reading image " + std::to_string(i));
        Glyph gph(static_cast<std::size_t>(glyph_size) * glyph_size);
        for (int y = 0; y < glyph_size; ++y)
            for (int x = 0; x < glyph_size; ++x) {
                const std::uint32_t sy = static_cast<std::uint32_t>(y) * rows / glyph_size;
                const std::uint32_t sx = static_cast<std::uint32_t>(x) * cols / glyph_size;
                gph[y * glyph_size + x] = static_cast<float>(buf[sy * cols + sx]) / 255.0f;
            }
        glyphs.push_back(std::move(gph));
    }
    return glyphs;
}

std::vector<Glyph> builtin_glyphs(int glyph_size) {
    std::vector<Glyph> glyphs;
    glyphs.reserve(10);
    for (int d = 0; d < 10; ++d) {
        Glyph gph(static_cast<std::size_t>(glyph_size) * glyph_size, 0.0f);
        for (int y = 0; y < glyph_size; ++y)
            for (int x = 0; x < glyph_size; ++x) {
                const int sy = y * 7 / glyph_size;
                const int sx = x * 5 / glyph_size;
                gph[y * glyph_size + x] = kDigitRows[d][sy][sx] == '1' ? 1.0f : 0.0f;
            }
        glyphs.push_back(std::move(gph));
    }
    return glyphs;
}

std::vector<Glyph> load_glyphs_or_fallback(const std::string& path, int glyph_size) {
    if (!path.empty()) {
        std::ifstream probe(path, std::ios::binary);
        if (probe) return load_digits_idx(path, glyph_size);
        std::cerr << "warning: glyph file '" << path << "' not found, using built-in digit set\n";
    }
    return builtin_glyphs(glyph_size);
}

void write_vseq(const std::vector<LabeledSequence>& sequences, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw FormatError("cannot open for writing: " + path);
    int t = 0, c = 1, h = 0, w = 0;
    if (!sequences.empty()) {
        t = sequences[0].t;
        c = sequences[0].c;
        h = sequences[0].h;
        w = sequences[0].w;
        for (const auto& s : sequences)
            if (s.t != t || s.c != c || s.h != h || s.w != w)
                throw ContractError("write_vseq: sequences must share dimensions");
    }
    os.write("VSEQ", 4);
    os.put(1);  // version
    put_u32_le(os, static_cast<std::uint32_t>(sequences.size()));
    put_u32_le(os, static_cast<std::uint32_t>(t));
    put_u32_le(os, static_cast<std::uint32_t>(c));
    put_u32_le(os, static_cast<std::uint32_t>(h));
    put_u32_le(os, static_cast<std::uint32_t>(w));
    for (const auto& s : sequences) {
        for (float f : s.frames) {
            std::uint32_t bits;
            std::memcpy(&bits, &f, 4);
            put_u32_le(os, bits);
        }
        os.write(reinterpret_cast<const char*>(s.labels.data()), static_cast<std::streamsize>(s.labels.size()));
    }
    if (!os) throw FormatError("write failed: " + path);
}

std::vector<LabeledSequence> read_vseq(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "VSEQ", 4) != 0) throw FormatError("bad VSEQ magic in " + path);
    const int version = is.get();
    if (version != 1) throw FormatError("unsupported VSEQ version " + std::to_string(version) + " in " + path);
    const std::uint32_t n = get_u32_le(is, "N");
    const std::uint32_t t = get_u32_le(is, "T");
    const std::uint32_t c = get_u32_le(is, "C");
    const std::uint32_t h = get_u32_le(is, "H");
    const std::uint32_t w = get_u32_le(is, "W");
    if (n > 0 && (t == 0 || c == 0 || h == 0 || w == 0)) throw FormatError("VSEQ header has zero dimension in " + path);
    const std::size_t frame_floats = static_cast<std::size_t>(t) * c * h * w;
    std::vector<LabeledSequence> out;
    out.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        LabeledSequence s;
        s.t = static_cast<int>(t);
        s.c = static_cast<int>(c);
        s.h = static_cast<int>(h);
        s.w = static_cast<int>(w);
        s.frames.resize(frame_floats);
        for (std::size_t j = 0; j < frame_floats; ++j) {
            const std::uint32_t bits = get_u32_le(is, "frame data");
            float f;
            std::memcpy(&f, &bits, 4);
            s.frames[j] = f;
        }
        s.labels.resize(t);
        is.read(reinterpret_cast<char*>(s.labels.data()), static_cast<std::streamsize>(t));
        if (!is) throw FormatError("VSEQ file truncated reading labels of sequence " + std::to_string(i));
        out.push_back(std::move(s));
    }
    return out;
}

std::array<std::uint64_t, 8> label_histogram(const std::vector<LabeledSequence>& sequences) {
    std::array<std::uint64_t, 8> hist{};
    for (const auto& s : sequences)
        for (std::uint8_t l : s.labels) {
            if (l >= 8) throw FormatError("label out of range in sequence data");
            ++hist[l];
        }
    return hist;
}

}  // namespace prednet
