#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "prednet/datagen.hpp"
#include "prednet/errors.hpp"
#include "prednet/metrics.hpp"

using namespace prednet;

namespace {

Image make_image(int h, int w, double val) {
    Image img;
    img.c = 1;
    img.h = h;
    img.w = w;
    img.v.assign(static_cast<std::size_t>(h) * w, val);
    return img;
}

Image random_image(int h, int w, std::mt19937& rng) {
    Image img = make_image(h, w, 0.0);
    std::uniform_real_distribution<double> d(0.0, 1.0);
    for (auto& v : img.v) v = d(rng);
    return img;
}

// Independent oracle: dense per-position 11x11 weighted statistics, no
// separable filtering.
double ssim_oracle(const Image& a, const Image& b) {
    const int win = 11;
    const double sigma = 1.5, c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double wsum = 0.0;
    double wt[11][11];
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) {
            const double dy = i - 5.0, dx = j - 5.0;
            wt[i][j] = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
            wsum += wt[i][j];
        }
    for (int i = 0; i < win; ++i)
        for (int j = 0; j < win; ++j) wt[i][j] /= wsum;

    double total = 0.0;
    int count = 0;
    for (int y = 0; y + win <= a.h; ++y)
        for (int x = 0; x + win <= a.w; ++x) {
            double ma = 0, mb = 0, maa = 0, mbb = 0, mab = 0;
            for (int i = 0; i < win; ++i)
                for (int j = 0; j < win; ++j) {
                    const double va = a.v[(y + i) * a.w + x + j];
                    const double vb = b.v[(y + i) * a.w + x + j];
                    ma += wt[i][j] * va;
                    mb += wt[i][j] * vb;
                    maa += wt[i][j] * va * va;
                    mbb += wt[i][j] * vb * vb;
                    mab += wt[i][j] * va * vb;
                }
            const double sa = maa - ma * ma, sb = mbb - mb * mb, sab = mab - ma * mb;
            total += ((2 * ma * mb + c1) * (2 * sab + c2)) / ((ma * ma + mb * mb + c1) * (sa + sb + c2));
            ++count;
        }
    return total / count;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("mae identities") {
    std::mt19937 rng(1);
    Image a = random_image(8, 8, rng);
    CHECK(mae(a, a) == 0.0);

    Image b = a;
    for (auto& v : b.v) v += 0.1;
    CHECK(mae(a, b) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(mae(a, b) == mae(b, a));

    Image c = make_image(4, 4, 0.0);
    CHECK_THROWS_AS(mae(a, c), DimensionError);
}

TEST_CASE("psnr golden values") {
    Image a = make_image(16, 16, 0.5);
    CHECK(psnr(a, a) == 100.0);  // cap

    Image b = make_image(16, 16, 0.6);  // uniform difference 0.1
    CHECK(std::abs(psnr(a, b) - 20.0) < 1e-9);

    Image z = make_image(16, 16, 0.0), o = make_image(16, 16, 1.0);
    CHECK(std::abs(psnr(z, o) - 0.0) < 1e-12);
}

TEST_CASE("ssim identities and oracle agreement") {
    std::mt19937 rng(2);
    Image a = random_image(20, 24, rng);
    CHECK(std::abs(ssim(a, a) - 1.0) < 1e-9);

    Image b = random_image(20, 24, rng);
    CHECK(ssim(a, b) == ssim(b, a));  // symmetric arithmetic
    CHECK(ssim(a, b) >= -1.0);
    CHECK(ssim(a, b) <= 1.0);

    for (int trial = 0; trial < 50; ++trial) {
        Image x = random_image(16, 16, rng);
        Image y = random_image(16, 16, rng);
        CHECK(std::abs(ssim(x, y) - ssim_oracle(x, y)) < 1e-6);
    }

    Image tiny = make_image(8, 8, 0.5);
    CHECK_THROWS_AS(ssim(tiny, tiny), DimensionError);
}

TEST_CASE("movement mask") {
    std::vector<Image> still(5, make_image(12, 12, 0.3));
    CHECK(movement_mask(still).empty());

    std::vector<Image> moving;
    for (int t = 0; t < 4; ++t) moving.push_back(make_image(12, 12, 0.1 * t));
    const auto mask = movement_mask(moving, 0.01);
    CHECK(mask == std::vector<int>{1, 2, 3});

    CHECK_THROWS_AS(movement_mask({make_image(4, 4, 0.0)}), ContractError);
    CHECK_THROWS_AS(movement_mask(still, 0.0), ContractError);

    // a moving glyph on a static background produces movement frames
    SceneSpec spec;
    spec.seq_len = 8;
    auto seqs = gen_dataset(99, spec, builtin_glyphs(spec.glyph_size), 1);
    std::vector<Image> frames;
    for (int t = 0; t < seqs[0].t; ++t) {
        Image img;
        img.c = 1;
        img.h = seqs[0].h;
        img.w = seqs[0].w;
        img.v.assign(seqs[0].frame(t), seqs[0].frame(t) + seqs[0].frame_size());
        frames.push_back(img);
    }
    CHECK_FALSE(movement_mask(frames).empty());
}

TEST_CASE("conditioned ssim") {
    std::mt19937 rng(5);
    // still frame, pure copy earns exactly zero
    Image prev = random_image(16, 16, rng);
    Image actual = prev;
    Image pred = prev;
    CHECK(std::abs(conditioned_ssim(prev, actual, pred)) < 1e-9);

    CHECK(conditioned_ssim_from(0.5, 0.8) == doctest::Approx(0.4));

    // perfect risky prediction is rewarded
    Image moved = random_image(16, 16, rng);
    CHECK(conditioned_ssim(prev, moved, moved) > 0.0);

    // consistency between the composed form and its parts
    Image x = random_image(16, 16, rng), y = random_image(16, 16, rng), z = random_image(16, 16, rng);
    CHECK(conditioned_ssim(x, y, z) == doctest::Approx(conditioned_ssim_from(ssim(x, z), ssim(y, z))));
}

TEST_CASE("sharpness") {
    CHECK(sharpness(make_image(10, 10, 0.42)) == 0.0);

    Image impulse = make_image(9, 9, 0.0);
    impulse.v[4 * 9 + 4] = 1.0;
    CHECK(sharpness(impulse) > 0.0);

    std::mt19937 rng(6);
    Image x = random_image(16, 16, rng);
    Image blurred = make_image(16, 16, 0.0);
    for (int y = 0; y < 16; ++y)
        for (int xx = 0; xx < 16; ++xx) {
            double acc = 0.0;
            int n = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = y + dy, xi = xx + dx;
                    if (yy < 0 || yy >= 16 || xi < 0 || xi >= 16) continue;
                    acc += x.v[yy * 16 + xi];
                    ++n;
                }
            blurred.v[y * 16 + xx] = acc / n;
        }
    CHECK(sharpness(blurred) < sharpness(x));
}

TEST_CASE("copy baseline identities") {
    std::vector<Image> still(4, make_image(16, 16, 0.25));
    auto preds = baseline_copy(still);
    for (std::size_t t = 1; t < still.size(); ++t) CHECK(mae(preds[t], still[t]) == 0.0);

    // report of the copy baseline against itself: all deltas zero
    std::mt19937 rng(8);
    std::vector<Image> seq;
    for (int t = 0; t < 5; ++t) seq.push_back(random_image(16, 16, rng));
    std::vector<Image> copy_preds(seq.begin(), seq.end() - 1);
    MetricsReport rep = build_report({"s0"}, {seq}, {copy_preds}, 1, 0.01);
    CHECK(rep.agg_delta.mae == 0.0);
    CHECK(rep.agg_delta.psnr == 0.0);
    CHECK(rep.agg_delta.ssim == 0.0);
    CHECK(rep.agg_delta.ssim_cond == 0.0);
    if (rep.agg_delta.ssim_movement) CHECK(*rep.agg_delta.ssim_movement == 0.0);
}

TEST_CASE("movement aggregates over an empty mask are absent, not zero") {
    std::vector<Image> still(4, make_image(16, 16, 0.25));
    std::vector<Image> preds(still.begin(), still.end() - 1);
    SequenceMetrics m = score_sequence(still, preds, 1, 0.01);
    CHECK_FALSE(m.psnr_movement.has_value());
    CHECK_FALSE(m.ssim_movement.has_value());
    CHECK(m.ssim_cond_still.has_value());
}

TEST_CASE("report csv has one row per sequence plus aggregate") {
    std::mt19937 rng(9);
    std::vector<std::vector<Image>> actual, preds;
    std::vector<std::string> ids;
    for (int s = 0; s < 3; ++s) {
        std::vector<Image> seq;
        for (int t = 0; t < 4; ++t) seq.push_back(random_image(16, 16, rng));
        preds.push_back({seq[0], seq[1], seq[2]});
        actual.push_back(std::move(seq));
        ids.push_back("seq" + std::to_string(s));
    }
    MetricsReport rep = build_report(ids, actual, preds, 1, 0.01);
    write_report_csv(rep, "metrics_test.csv");
    std::ifstream is("metrics_test.csv");
    std::string line;
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 1 + 3 + 1);  // header + sequences + aggregate
}

TEST_SUITE_END();
