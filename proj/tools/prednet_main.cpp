#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "prednet/config.hpp"
#include "prednet/datagen.hpp"
#include "prednet/errors.hpp"
#include "prednet/harness.hpp"

namespace fs = std::filesystem;
using namespace prednet;

namespace {

ExperimentConfig load_with_overrides(const std::string& config_path, const std::uint64_t* seed) {
    ExperimentConfig cfg = config_path.empty() ? parse_config_text("") : load_config(config_path);
    if (seed) cfg.seed = *seed;
    cfg.validate();
    return cfg;
}

int run_datagen(const ExperimentConfig& cfg, const std::string& out_dir) {
    fs::create_directories(out_dir);
    const auto glyphs = load_glyphs_or_fallback(cfg.datagen.glyph_path, cfg.datagen.scene.glyph_size);
    const auto train_set = gen_dataset(cfg.seed, cfg.datagen.scene, glyphs, cfg.datagen.num_train);
    const auto test_set = gen_dataset(splitmix64(cfg.seed ^ 0x7e57da7aull), cfg.datagen.scene, glyphs,
                                      cfg.datagen.num_test);
    write_vseq(train_set, (fs::path(out_dir) / "train.vseq").string());
    write_vseq(test_set, (fs::path(out_dir) / "test.vseq").string());

    std::ofstream stats(fs::path(out_dir) / "stats.csv", std::ios::trunc);
    stats << "split,label,count\n";
    const auto train_hist = label_histogram(train_set);
    const auto test_hist = label_histogram(test_set);
    for (int l = 0; l < 8; ++l) stats << "train," << l << ',' << train_hist[l] << '\n';
    for (int l = 0; l < 8; ++l) stats << "test," << l << ',' << test_hist[l] << '\n';
    std::cout << "wrote " << train_set.size() << " train / " << test_set.size() << " test sequences to " << out_dir
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Predictive-coding video prediction laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", checkpoint, data_path;
    std::uint64_t seed_override = 0;
    bool have_seed = false;
    app.add_option("--config", config_path, "experiment config file (key = value sections)");
    app.add_option("--out", out_dir, "output directory");
    auto* seed_opt = app.add_option("--seed", seed_override, "override the config seed");

    auto* cmd_datagen = app.add_subcommand("datagen", "generate a synthetic moving-digit dataset");
    auto* cmd_train = app.add_subcommand("train", "train a model and write checkpoint + log");
    auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint against a dataset");
    bool copy_baseline = false;
    cmd_eval->add_flag("--copy-baseline", copy_baseline, "score the last-frame-copy predictor instead of a model");
    cmd_eval->add_option("--checkpoint", checkpoint, "model checkpoint (.pnck)");
    cmd_eval->add_option("--data", data_path, "dataset (.vseq); defaults to the config test path");
    auto* cmd_extrap = app.add_subcommand("extrapolate", "closed-loop rollout diagnostics");
    int t_start = 0, steps = 0, sequence_index = 0;
    cmd_extrap->add_option("--checkpoint", checkpoint, "model checkpoint (.pnck)");
    cmd_extrap->add_option("--data", data_path, "dataset (.vseq)");
    cmd_extrap->add_option("--t-start", t_start, "first closed-loop step (0 = use config list)");
    cmd_extrap->add_option("--steps", steps, "number of extrapolation steps (0 = config value)");
    auto* cmd_probe = app.add_subcommand("probe", "per-layer activation traces for one sequence");
    cmd_probe->add_option("--checkpoint", checkpoint, "model checkpoint (.pnck)");
    cmd_probe->add_option("--data", data_path, "dataset (.vseq)");
    cmd_probe->add_option("--sequence", sequence_index, "sequence index to probe");

    CLI11_PARSE(app, argc, argv);
    have_seed = seed_opt->count() > 0;

    try {
        ExperimentConfig cfg = load_with_overrides(config_path, have_seed ? &seed_override : nullptr);
        if (cmd_datagen->parsed()) return run_datagen(cfg, out_dir);
        if (cmd_train->parsed()) {
            TrainResult res = train(cfg, out_dir);
            std::cout << "checkpoint: " << res.checkpoint_path << "\nlog: " << res.log_path << "\n";
            return 0;
        }
        if (data_path.empty()) data_path = cfg.test_path;
        if (cmd_eval->parsed()) {
            EvalOutputs out = evaluate(cfg, checkpoint, data_path, out_dir, copy_baseline);
            std::cout << "metrics: " << out.metrics_csv << "\n";
            std::cout << "aggregate mae " << out.report.agg_model.mae << " (copy " << out.report.agg_copy.mae
                      << ", delta " << out.report.agg_delta.mae << ")\n";
            if (out.top1_accuracy)
                std::cout << "top1 " << *out.top1_accuracy << " top5 " << *out.top5_accuracy << "\n";
            return 0;
        }
        if (cmd_extrap->parsed()) {
            std::vector<LabeledSequence> probe_dims = read_vseq(data_path);
            const int T = probe_dims.empty() ? 0 : probe_dims[0].t;
            std::vector<int> starts = cfg.eval.extrapolation_start;
            if (t_start > 0) starts = {t_start};
            if (starts.empty()) starts = {T / 4, T / 2, 3 * T / 4};
            const int n_cfg = steps > 0 ? steps : cfg.eval.extrapolation_steps;
            for (int s : starts) {
                const int n = std::min(n_cfg, T - s);
                auto rows = extrapolate(cfg, checkpoint, data_path, s, n, out_dir);
                for (const auto& r : rows)
                    std::cout << "t_start " << r.t_start << " step " << r.step << " mae " << r.mae << " ssim "
                              << r.ssim << " sharpness " << r.sharpness << "\n";
            }
            return 0;
        }
        if (cmd_probe->parsed()) {
            ProbeSummary s = probe(cfg, checkpoint, data_path, sequence_index, out_dir);
            std::cout << "trace: " << s.trace_csv << "\n";
            std::cout << "mean |E| non-decreasing in layer: " << (s.e_nondecreasing_in_layer ? "yes" : "no") << "\n";
            for (std::size_t l = 0; l < s.r0_trajectory_corr.size(); ++l)
                std::cout << "corr(mean|R_0|, mean|R_" << (l + 1) << "|) = " << s.r0_trajectory_corr[l] << "\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const ContractError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const DimensionError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
