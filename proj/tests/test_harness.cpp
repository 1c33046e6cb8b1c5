#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "prednet/harness.hpp"

using namespace prednet;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

// a small dataset written to disk for harness-level tests
std::string make_tiny_dataset(const std::string& path, int n, std::uint64_t seed, int seq_len = 6, int canvas = 16,
                              int speed = 1) {
    SceneSpec spec;
    spec.canvas_h = canvas;
    spec.canvas_w = canvas;
    spec.glyph_size = 6;
    spec.seq_len = seq_len;
    spec.speed = speed;
    write_vseq(gen_dataset(seed, spec, builtin_glyphs(spec.glyph_size), n), path);
    return path;
}

const char* kTinyConfig = R"(
[model]
num_layers = 2
a_channels = 1,2
r_channels = 2,4
loss_mode = L0
input_h = 16
input_w = 16

[optimizer]
learning_rate = 0.002
epochs = 2
batch_size = 4

[data]
train = harness_out/train.vseq
test = harness_out/test.vseq

[experiment]
seed = 5
)";

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("subsample_fps") {
    SceneSpec spec;
    spec.seq_len = 12;
    spec.canvas_h = 16;
    spec.canvas_w = 16;
    spec.glyph_size = 6;
    LabeledSequence seq = gen_sequence(1, spec, builtin_glyphs(6));

    LabeledSequence same = subsample_fps(seq, 1);
    CHECK(same.frames == seq.frames);
    CHECK(same.labels == seq.labels);

    LabeledSequence half = subsample_fps(seq, 2);
    CHECK(half.t == 6);
    for (int t = 0; t < half.t; ++t) {
        CHECK(std::equal(half.frame(t), half.frame(t) + half.frame_size(), seq.frame(2 * t)));
        CHECK(half.labels[t] == seq.labels[2 * t]);
    }

    LabeledSequence two = subsample_fps(seq, 11);
    CHECK(two.t == 2);

    CHECK_THROWS_AS(subsample_fps(seq, 0), ContractError);
    CHECK_THROWS_AS(subsample_fps(seq, 13), ContractError);
}

TEST_CASE("config parsing") {
    ExperimentConfig cfg = parse_config_text(kTinyConfig);
    CHECK(cfg.model.num_layers == 2);
    CHECK(cfg.model.r_channels == std::vector<int>{2, 4});
    CHECK(cfg.optimizer.epochs == 2);
    CHECK(cfg.seed == 5);
    CHECK_FALSE(cfg.classifier_enabled);

    CHECK_THROWS_AS(parse_config_text("[model]\nbogus_key = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[nosuch]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[model]\nnum_layers = banana\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("key_without_section = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[optimizer]\nlearning_rate = -1\n"), ConfigError);
}

TEST_CASE("training runs, improves on the initial loss, and is deterministic") {
    fs::create_directories("harness_out");
    make_tiny_dataset("harness_out/train.vseq", 12, 11);
    make_tiny_dataset("harness_out/test.vseq", 4, 12);
    ExperimentConfig cfg = parse_config_text(kTinyConfig);
    cfg.optimizer.epochs = 3;

    TrainResult r1 = train(cfg, "harness_out/run1");
    REQUIRE(r1.log.size() == 4);  // epoch 0 plus three epochs
    CHECK(r1.log.front().epoch == 0);
    CHECK(r1.log.back().train_loss < r1.log.front().train_loss);
    CHECK(fs::exists(r1.checkpoint_path));
    CHECK(fs::exists(r1.log_path));

    TrainResult r2 = train(cfg, "harness_out/run2");
    CHECK(slurp(r1.checkpoint_path) == slurp(r2.checkpoint_path));  // bit-identical artifacts
    CHECK(slurp(r1.log_path) == slurp(r2.log_path));
}

TEST_CASE("multi-task run with gamma 0 and a frozen zero decoder matches vanilla logs bit for bit") {
    fs::create_directories("harness_out");
    make_tiny_dataset("harness_out/train.vseq", 10, 21);
    make_tiny_dataset("harness_out/test.vseq", 4, 22);
    ExperimentConfig vanilla = parse_config_text(kTinyConfig);
    vanilla.optimizer.epochs = 2;

    ExperimentConfig plus = vanilla;
    plus.classifier_enabled = true;
    plus.classifier.encoder_channels = {2, 2};
    plus.classifier.decoder_mid_channels = 2;
    plus.classifier.feedback_channels = 2;
    plus.classifier.beta = 1.0f;
    plus.classifier.gamma = 0.0f;
    plus.classifier.decoder_zero_init = true;

    TrainResult rv = train(vanilla, "harness_out/vanilla");
    TrainResult rp = train(plus, "harness_out/plus0");
    CHECK(slurp(rv.log_path) == slurp(rp.log_path));
}

TEST_CASE("evaluate scores the copy baseline with zero deltas") {
    fs::create_directories("harness_out");
    make_tiny_dataset("harness_out/train.vseq", 10, 31);
    make_tiny_dataset("harness_out/test.vseq", 4, 32);
    ExperimentConfig cfg = parse_config_text(kTinyConfig);
    cfg.optimizer.epochs = 1;
    TrainResult tr = train(cfg, "harness_out/eval_model");

    EvalOutputs copy = evaluate(cfg, "", "harness_out/test.vseq", "harness_out/eval_copy", /*copy_predictor=*/true);
    CHECK(copy.report.agg_delta.mae == 0.0);
    CHECK(copy.report.agg_delta.ssim == 0.0);
    CHECK_FALSE(copy.top1_accuracy.has_value());

    EvalOutputs model = evaluate(cfg, tr.checkpoint_path, "harness_out/test.vseq", "harness_out/eval_out");
    CHECK(fs::exists(model.metrics_csv));
    CHECK(model.report.model.size() == 4);
}

TEST_CASE("evaluate reports classification accuracy with top5 at least top1") {
    fs::create_directories("harness_out");
    make_tiny_dataset("harness_out/ptrain.vseq", 10, 41);
    make_tiny_dataset("harness_out/ptest.vseq", 6, 42);
    ExperimentConfig cfg = parse_config_text(kTinyConfig);
    cfg.train_path = "harness_out/ptrain.vseq";
    cfg.test_path = "harness_out/ptest.vseq";
    cfg.classifier_enabled = true;
    cfg.classifier.encoder_channels = {2, 2};
    cfg.classifier.decoder_mid_channels = 2;
    cfg.classifier.feedback_channels = 2;
    cfg.classifier.gamma = 0.5f;
    cfg.optimizer.epochs = 1;
    TrainResult tr = train(cfg, "harness_out/plus_model");
    EvalOutputs out = evaluate(cfg, tr.checkpoint_path, "harness_out/ptest.vseq", "harness_out/plus_eval");
    REQUIRE(out.top1_accuracy.has_value());
    REQUIRE(out.top5_accuracy.has_value());
    CHECK(*out.top5_accuracy >= *out.top1_accuracy);
    CHECK(fs::exists(out.classes_csv));
    // classes.csv: header plus one row per sequence
    std::string text = slurp(out.classes_csv);
    CHECK(std::count(text.begin(), text.end(), '\n') == 7);
}

TEST_CASE("extrapolate with one step equals the open-loop prediction at t_start") {
    fs::create_directories("harness_out");
    make_tiny_dataset("harness_out/etrain.vseq", 8, 51);
    make_tiny_dataset("harness_out/etest.vseq", 3, 52);
    ExperimentConfig cfg = parse_config_text(kTinyConfig);
    cfg.train_path = "harness_out/etrain.vseq";
    cfg.test_path = "harness_out/etest.vseq";
    cfg.optimizer.epochs = 1;
    TrainResult tr = train(cfg, "harness_out/extrap_model");

    auto rows = extrapolate(cfg, tr.checkpoint_path, "harness_out/etest.vseq", 3, 1, "harness_out/extrap_out");
    REQUIRE(rows.size() == 1);

    // reference: open-loop rollout of the same checkpoint
    Model m = init_model(cfg.model, cfg.seed);
    import_params(m, read_pnck(tr.checkpoint_path));
    auto data = read_vseq("harness_out/etest.vseq");
    NoGradGuard ng;
    double acc = 0.0;
    for (const auto& seq : data) {
        RolloutTrace trace = rollout(m, frames_of(seq), RolloutMode::open_loop);
        acc += mae(image_of(trace.predictions[3]), image_of_frame(seq, 3));
    }
    CHECK(rows[0].mae == doctest::Approx(acc / data.size()).epsilon(1e-9));

    CHECK_THROWS_AS(extrapolate(cfg, tr.checkpoint_path, "harness_out/etest.vseq", 1, 1, "harness_out/x"),
                    ContractError);
    CHECK_THROWS_AS(extrapolate(cfg, tr.checkpoint_path, "harness_out/etest.vseq", 3, 9, "harness_out/x"),
                    ContractError);
}

TEST_CASE("probe writes a full trace and spots the zero fixed point") {
    fs::create_directories("harness_out");
    // all-zero frames: untrained model with zero biases keeps E at zero
    std::vector<LabeledSequence> zero_seqs(1);
    auto& zs = zero_seqs[0];
    zs.t = 4;
    zs.c = 1;
    zs.h = 16;
    zs.w = 16;
    zs.frames.assign(static_cast<std::size_t>(zs.t) * 16 * 16, 0.0f);
    zs.labels.assign(4, 0);
    write_vseq(zero_seqs, "harness_out/zeros.vseq");

    ExperimentConfig cfg = parse_config_text(kTinyConfig);
    Model m = init_model(cfg.model, cfg.seed);
    write_pnck(export_params(m), "harness_out/init.pnck");

    ProbeSummary s = probe(cfg, "harness_out/init.pnck", "harness_out/zeros.vseq", 0, "harness_out/probe_out");
    std::string text = slurp(s.trace_csv);
    CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 4 * 2);  // header + T*L rows
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 + 1);
        const auto c3 = line.find(',', c2 + 1);
        const double e = std::stod(line.substr(c2 + 1, c3 - c2 - 1));
        CHECK(e == 0.0);
    }
    CHECK(fs::exists("harness_out/probe_out/probe_E_t0_l0.pgm"));
    CHECK(fs::exists("harness_out/probe_out/probe_pred_t3.pgm"));
}

TEST_SUITE_END();
