#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace prednet {

// Synthetic moving-digit scenes: a static background of overlapping random
// shapes and a single glyph moving in one of eight compass directions with
// elastic reflection at the canvas margins. Per-frame labels give the
// direction applied between frame t and t+1.

struct SceneSpec {
    int canvas_h = 32;
    int canvas_w = 32;
    int num_shapes = 6;
    int glyph_size = 10;
    int speed = 1;  // pixels per frame; 0 is the static debug variant
    int seq_len = 20;
    double bg_min = 0.0;
    double bg_max = 0.75;
    double glyph_min = 0.75;
    double glyph_max = 1.0;
    // deterministic overrides for tests
    std::optional<int> start_x, start_y, start_dir;

    std::uint64_t hash() const;
    void validate() const;
};

struct LabeledSequence {
    int t = 0, c = 1, h = 0, w = 0;
    std::vector<float> frames;         // [T,C,H,W], values in [0,1]
    std::vector<std::uint8_t> labels;  // [T], direction indices 0..7
    std::uint64_t seed = 0;
    std::uint64_t spec_hash = 0;

    std::size_t frame_size() const { return static_cast<std::size_t>(c) * h * w; }
    const float* frame(int ti) const { return frames.data() + static_cast<std::size_t>(ti) * frame_size(); }
};

using Glyph = std::vector<float>;  // glyph_size x glyph_size alpha mask in [0,1]

// Compass directions: 0=E, 1=NE, 2=N, 3=NW, 4=W, 5=SW, 6=S, 7=SE,
// as (dx, dy) with y growing downward, scaled by speed.
std::pair<int, int> direction_vector(int index, int speed = 1);
int direction_index(int dx, int dy);

// Static background, deterministic in (seed, spec); later shapes overdraw.
std::vector<float> gen_background(std::uint64_t seed, const SceneSpec& spec);

LabeledSequence gen_sequence(std::uint64_t seed, const SceneSpec& spec, const std::vector<Glyph>& glyphs);

std::vector<LabeledSequence> gen_dataset(std::uint64_t seed, const SceneSpec& spec, const std::vector<Glyph>& glyphs,
                                         int count);

// IDX (magic 0x00000803, big-endian dims, unsigned bytes), normalized to
// [0,1] and resized to glyph_size by nearest neighbor.
std::vector<Glyph> load_digits_idx(const std::string& path, int glyph_size);

// Built-in deterministic set of ten rendered digit shapes.
std::vector<Glyph> builtin_glyphs(int glyph_size);

// load_digits_idx when the file exists, otherwise the built-in set with a
// warning on stderr, so the pipeline runs without external data.
std::vector<Glyph> load_glyphs_or_fallback(const std::string& path, int glyph_size);

// VSEQ container: magic "VSEQ", version byte 1, u32 little-endian counts
// (N, T, C, H, W), then per sequence T*C*H*W float32 frames followed by
// T label bytes. Round-trips are bit-exact.
void write_vseq(const std::vector<LabeledSequence>& sequences, const std::string& path);
std::vector<LabeledSequence> read_vseq(const std::string& path);

std::array<std::uint64_t, 8> label_histogram(const std::vector<LabeledSequence>& sequences);

}  // namespace prednet
