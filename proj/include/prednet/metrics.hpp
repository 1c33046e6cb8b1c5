#pragma once

#include <optional>
#include <string>
#include <vector>

namespace prednet {

// Image/video quality metrics. Computed in double precision regardless of
// model storage so the closed-form identities hold to tight tolerances.
struct Image {
    int c = 0, h = 0, w = 0;
    std::vector<double> v;  // [c,h,w] row-major, values in [0,1] for pixel data

    std::size_t size() const { return v.size(); }
};

double mae(const Image& a, const Image& b);

// 10*log10(1/MSE) with MAX=1; capped at 100 dB when MSE < 1e-10.
double psnr(const Image& a, const Image& b);

// Mean local SSIM, 11x11 Gaussian window sigma=1.5, K1=0.01, K2=0.03,
// dynamic range 1.0, valid-region sliding window, channels averaged.
double ssim(const Image& a, const Image& b);

// (SSIM_max - ssim(prev, pred)) * ssim(actual, pred) with SSIM_max = 1.
double conditioned_ssim(const Image& actual_prev, const Image& actual_t, const Image& pred_t);
inline double conditioned_ssim_from(double ssim_prev_pred, double ssim_actual_pred) {
    return (1.0 - ssim_prev_pred) * ssim_actual_pred;
}

// Frame indices t >= 1 whose MAE against the previous frame exceeds tau.
std::vector<int> movement_mask(const std::vector<Image>& sequence, double tau = 0.01);

// Variance of the 3x3 Laplacian response over interior pixels.
double sharpness(const Image& img);

// pred[t] = frame[t-1] for t >= 1; pred[0] is left empty (never evaluated).
std::vector<Image> baseline_copy(const std::vector<Image>& sequence);

// --- reporting ---------------------------------------------------------------

struct SequenceMetrics {
    double mae = 0, psnr = 0, ssim = 0, ssim_cond = 0, sharpness = 0;
    std::optional<double> psnr_movement, ssim_movement;
    std::optional<double> ssim_cond_movement, ssim_cond_still;
};

struct MetricsReport {
    std::vector<std::string> sequence_ids;
    std::vector<SequenceMetrics> model;
    std::vector<SequenceMetrics> copy;
    std::vector<SequenceMetrics> delta;  // model - copy, per sequence
    SequenceMetrics agg_model, agg_copy, agg_delta;
};

// Scores predictions for frames t in [t_begin, T) of one sequence.
// `preds[i]` predicts frame t_begin + i.
SequenceMetrics score_sequence(const std::vector<Image>& actual, const std::vector<Image>& preds, int t_begin,
                               double tau);

// Full report over many sequences; copy baseline and deltas included.
MetricsReport build_report(const std::vector<std::string>& ids, const std::vector<std::vector<Image>>& actual,
                           const std::vector<std::vector<Image>>& preds, int t_begin, double tau);

// One row per sequence plus a final aggregate row.
void write_report_csv(const MetricsReport& report, const std::string& path);

}  // namespace prednet
