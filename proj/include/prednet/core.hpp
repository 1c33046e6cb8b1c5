#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "prednet/checkpoint.hpp"
#include "prednet/kernels.hpp"
#include "prednet/tensor.hpp"

namespace prednet {

// ---------------------------------------------------------------------------
// The predictive-coding hierarchy. Each layer holds an input unit A, a
// prediction unit Ahat, a split rectified error unit E and a recurrent
// representation unit R. Errors flow bottom-up, predictions top-down.
// ---------------------------------------------------------------------------

enum class LossMode { L0, Lall };

struct PredNetConfig {
    int num_layers = 3;
    std::vector<int> a_channels;  // [0] is the input channel count
    std::vector<int> r_channels;
    LossMode loss_mode = LossMode::L0;
    std::vector<float> layer_weights;  // empty: derived from loss_mode
    std::vector<float> time_weights;   // empty: mu_0 = 0, mu_t = 1/(T-1)
    float pixel_max = 1.0f;
    int input_h = 32;
    int input_w = 32;
    int kernel = 3;

    void validate() const;
    std::vector<float> effective_layer_weights() const;
    int layer_h(int l) const { return input_h >> l; }
    int layer_w(int l) const { return input_w >> l; }
};

struct LayerParams {
    ConvLstmWeightsT<float> r;  // input groups ordered: error, top-down, feedback
    TensorPtr ahat_w, ahat_b;
    TensorPtr a_w, a_b;  // layers >= 1
};

struct Model {
    PredNetConfig cfg;
    int feedback_channels = 0;  // extra input group on layer L-2, 0 = none
    std::vector<LayerParams> layers;
    std::map<std::string, TensorPtr> params;  // name -> leaf, sorted

    TensorPtr param(const std::string& name) const;
};

// Per-timestep carry: ConvLSTM states and previous error signals.
struct StepState {
    std::vector<ConvLstmStateT<float>> r_states;
    std::vector<TensorPtr> e_prev;
};

// The (A, Ahat, E, R) quadruple of one layer at one timestep.
struct LayerTrace {
    TensorPtr a, ahat, e, r;
};

struct StepResult {
    TensorPtr prediction;  // Ahat_0
    std::vector<LayerTrace> layers;
    StepState state;
};

enum class RolloutMode { open_loop, closed_loop };

struct RolloutTrace {
    std::vector<TensorPtr> predictions;            // predictions[t] == Ahat_0 at t
    std::vector<std::vector<LayerTrace>> states;   // [t][l]
    std::vector<std::vector<TensorPtr>> e_means;   // [t][l], scalar graph nodes
    std::vector<std::vector<double>> mean_abs_e;   // [t][l]
    std::vector<std::vector<double>> mean_abs_r;   // [t][l]
};

// Glorot-uniform weights, zero biases except ConvLSTM forget gate at 1.
// Every parameter draws from its own name-keyed stream, so models sharing a
// parameter name and shape get bit-identical values for it.
Model init_model(const PredNetConfig& cfg, std::uint64_t seed, int feedback_channels = 0);

StepState zero_state(const Model& m);

// One timestep: pass 1 updates R top-down from previous errors and the
// upsampled higher representation, pass 2 updates A/Ahat/E bottom-up.
// `feedback` joins layer L-2's ConvLSTM input when the model was built with
// feedback channels; pass nullptr for a zero feedback frame.
StepResult step(const Model& m, const TensorPtr& frame, const StepState& prev, const TensorPtr& feedback = nullptr);

// Open loop feeds ground-truth frames; closed loop feeds the previous
// prediction as input from t_start onward (2 <= t_start <= T).
RolloutTrace rollout(const Model& m, const std::vector<TensorPtr>& frames, RolloutMode mode, int t_start = -1);

// L = sum_t mu_t sum_l lambda_l mean(E_l^t).
TensorPtr loss(const RolloutTrace& trace, const PredNetConfig& cfg);

// Checkpoint bridge. Loading verifies that names and shapes line up.
ArrayMap export_params(const Model& m);
void import_params(Model& m, const ArrayMap& arrays);

}  // namespace prednet
