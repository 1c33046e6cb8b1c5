#pragma once

#include <optional>
#include <string>
#include <vector>

#include "prednet/config.hpp"
#include "prednet/core.hpp"
#include "prednet/datagen.hpp"
#include "prednet/metrics.hpp"
#include "prednet/plus.hpp"

namespace prednet {

// Keeps frames 0, factor, 2*factor, ...; labels are subsampled identically.
LabeledSequence subsample_fps(const LabeledSequence& seq, int factor);

std::vector<TensorPtr> frames_of(const LabeledSequence& seq);
Image image_of(const TensorPtr& frame);
Image image_of_frame(const LabeledSequence& seq, int t);

struct TrainLogRow {
    int epoch = 0;  // row 0 describes the untrained model
    double train_loss = 0, val_loss = 0, val_mae = 0;
};

struct TrainResult {
    std::vector<TrainLogRow> log;
    std::string checkpoint_path;
    std::string log_path;
};

// Adaptive-moment descent on the frame loss (or the multi-task loss when the
// classifier is enabled). Deterministic given (config, seed). Writes
// model.pnck and train_log.csv under out_dir; a non-finite loss aborts with a
// diagnostic dump.
TrainResult train(const ExperimentConfig& cfg, const std::string& out_dir);

struct EvalOutputs {
    MetricsReport report;
    std::optional<double> top1_accuracy, top5_accuracy;
    std::string metrics_csv, classes_csv;
};

// Open-loop rollout per sequence, full metric suite plus copy-baseline
// deltas; classification accuracy when the model has a head.
// copy_predictor swaps the model for the last-frame-copy baseline.
EvalOutputs evaluate(const ExperimentConfig& cfg, const std::string& checkpoint_path, const std::string& data_path,
                     const std::string& out_dir, bool copy_predictor = false);

struct ExtrapRow {
    int t_start = 0, step = 0;
    double mae = 0, psnr = 0, ssim = 0, sharpness = 0;
};

// Closed-loop rollout from t_start for n steps; metrics per extrapolation
// step against ground truth, aggregated over the dataset. Dumps prediction
// frames for the first few sequences with t_start encoded in the filename.
std::vector<ExtrapRow> extrapolate(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                                   const std::string& data_path, int t_start, int n, const std::string& out_dir,
                                   int dump_sequences = 2);

struct ProbeSummary {
    bool e_nondecreasing_in_layer = false;        // time-averaged mean |E_l| vs l
    std::vector<double> r0_trajectory_corr;       // corr of mean|R_0|(t) with mean|R_l|(t), l >= 1
    std::string trace_csv;
};

// Per-(t, layer) mean absolute E and R traces as CSV plus channel-averaged
// activation images for one sequence.
ProbeSummary probe(const ExperimentConfig& cfg, const std::string& checkpoint_path, const std::string& data_path,
                   int sequence_index, const std::string& out_dir);

}  // namespace prednet
