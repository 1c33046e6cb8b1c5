#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "prednet/core.hpp"

namespace prednet {

// ---------------------------------------------------------------------------
// Classification pathway on the top representation layer: a two-stage
// ConvLSTM encoder feeding class logits per frame, exponential aggregation
// over time, and a decoder that turns the encoder features back into a map
// joining the top-down stream one level below the head.
// ---------------------------------------------------------------------------

struct ClassifierConfig {
    int num_classes = 8;
    float alpha = 2.0f;  // exponential time-weighting rate
    float beta = 1.0f;   // frame-loss weight
    float gamma = 0.1f;  // class-loss weight
    std::vector<int> group_map;  // class -> group; empty disables group scaling
    float group_penalty = 2.0f;
    std::vector<int> encoder_channels = {16, 16};
    int decoder_mid_channels = 8;
    int feedback_channels = 4;
    bool recurrent_head = true;      // false swaps the ConvLSTM stages for plain convolutions
    bool decoder_zero_init = false;  // decoder frozen at zero: feedback permanently inert
    bool decoder_zero_last = true;   // final decoder stage starts at zero, trainable

    void validate() const;
};

// Opposite compass directions share a group: E/W, NE/SW, N/S, NW/SE.
std::vector<int> axis_group_map();

struct ClassifierState {
    ConvLstmStateT<float> s1, s2;
};

struct ClassTrace {
    std::vector<TensorPtr> per_t_logits;
    TensorPtr agg_logits;       // exponentially weighted logit sum
    TensorPtr aggregate_probs;  // softmax(agg_logits)
    std::vector<TensorPtr> feedback_maps;
};

struct PlusModel {
    Model core;  // built with feedback channels on layer L-2
    ClassifierConfig ccfg;
    ConvLstmWeightsT<float> enc1, enc2;               // recurrent head
    TensorPtr enc1_cw, enc1_cb, enc2_cw, enc2_cb;     // convolutional head
    TensorPtr fc_w, fc_b;
    TensorPtr dec1_w, dec2_w;  // bias-free decoder: zero features decode to zero feedback
    std::map<std::string, TensorPtr> params;  // core + head

    int top_h() const { return core.cfg.layer_h(core.cfg.num_layers - 1); }
    int top_w() const { return core.cfg.layer_w(core.cfg.num_layers - 1); }
};

PlusModel init_plus_model(const PredNetConfig& cfg, const ClassifierConfig& ccfg, std::uint64_t seed);

ClassifierState classifier_zero_state(const PlusModel& m);

// Encoder stages + global average pooling + affine map to logits. Returns
// the logits, the pre-pool encoder features and the carried state.
struct ClassifyResult {
    TensorPtr logits;
    TensorPtr features;
    ClassifierState state;
};
ClassifyResult classify_step(const PlusModel& m, const TensorPtr& r_top, const ClassifierState& state);

// w_t = exp(alpha*(t+1-T)/T) normalized to sum 1; softmax of the weighted
// logit sum. Later frames dominate for alpha > 0.
struct AggregateResult {
    TensorPtr logits;
    TensorPtr probs;
};
AggregateResult aggregate_logits(const std::vector<TensorPtr>& per_t_logits, float alpha);

// Transposed convolution (2x up) plus a shape-preserving convolution; output
// matches the spatial extents of layer L-2.
TensorPtr decode_feedback(const PlusModel& m, const TensorPtr& features);

// beta*frame_loss + gamma*scale*xent(agg_logits, label), where scale is
// group_penalty when a group map is present and the top-1 prediction falls in
// a different group than the label, 1 otherwise.
TensorPtr multitask_loss(const TensorPtr& frame_loss, const TensorPtr& agg_logits, int label,
                         const ClassifierConfig& cfg);

struct PlusRollout {
    RolloutTrace frame_trace;
    ClassTrace class_trace;
};

PlusRollout rollout_plus(const PlusModel& m, const std::vector<TensorPtr>& frames, RolloutMode mode,
                         int t_start = -1);

ArrayMap export_params(const PlusModel& m);
void import_params(PlusModel& m, const ArrayMap& arrays);

}  // namespace prednet
