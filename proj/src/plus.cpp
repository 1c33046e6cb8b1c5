#include "prednet/plus.hpp"

#include <algorithm>
#include <cmath>

#include "prednet/errors.hpp"

namespace prednet {

void ClassifierConfig::validate() const {
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (alpha < 0) throw ConfigError("alpha must be >= 0");
    if (beta < 0 || gamma < 0) throw ConfigError("beta and gamma must be nonnegative");
    if (!(beta + gamma > 0)) throw ConfigError("beta + gamma must be positive");
    if (encoder_channels.size() != 2 || encoder_channels[0] <= 0 || encoder_channels[1] <= 0)
        throw ConfigError("encoder_channels must list two positive counts");
    if (decoder_mid_channels <= 0 || feedback_channels <= 0)
        throw ConfigError("decoder channel counts must be positive");
    if (!group_map.empty() && group_map.size() != static_cast<std::size_t>(num_classes))
        throw ConfigError("group_map must have one entry per class");
    if (group_penalty <= 0) throw ConfigError("group_penalty must be positive");
}

std::vector<int> axis_group_map() { return {0, 1, 2, 3, 0, 1, 2, 3}; }

namespace {

TensorPtr glorot_named(const Shape& shape, int fan_in, int fan_out, std::uint64_t seed, const std::string& name) {
    const float lim = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
    std::mt19937 rng(static_cast<std::uint32_t>(splitmix64(splitmix64(seed) ^ fnv1a(name))));
    return uniform_tensor<float>(shape, -lim, lim, rng, true);
}

TensorPtr conv_w(int co, int ci, int k, std::uint64_t seed, const std::string& name) {
    return glorot_named({co, ci, k, k}, ci * k * k, co * k * k, seed, name);
}

ConvLstmWeightsT<float> make_enc_lstm(int in_ch, int hidden, int k, std::uint64_t seed, const std::string& pfx,
                                      std::map<std::string, TensorPtr>& reg) {
    ConvLstmWeightsT<float> w;
    w.w_in.push_back(conv_w(4 * hidden, in_ch, k, seed, pfx + ".W_x"));
    reg.emplace(pfx + ".W_x", w.w_in.back());
    w.w_h = conv_w(4 * hidden, hidden, k, seed, pfx + ".W_h");
    reg.emplace(pfx + ".W_h", w.w_h);
    std::vector<float> bias(4 * hidden, 0.0f);
    for (int i = hidden; i < 2 * hidden; ++i) bias[i] = 1.0f;
    w.b = make_tensor<float>({4 * hidden}, std::move(bias), true);
    reg.emplace(pfx + ".b", w.b);
    return w;
}

}  // namespace

PlusModel init_plus_model(const PredNetConfig& cfg, const ClassifierConfig& ccfg, std::uint64_t seed) {
    cfg.validate();
    ccfg.validate();
    if (cfg.num_layers < 2) throw ConfigError("the classification pathway needs at least two layers");
    PlusModel m;
    m.ccfg = ccfg;
    m.core = init_model(cfg, seed, ccfg.feedback_channels);
    m.params = m.core.params;

    const int k = cfg.kernel;
    const int r_top = cfg.r_channels[cfg.num_layers - 1];
    const int e1 = ccfg.encoder_channels[0], e2 = ccfg.encoder_channels[1];
    if (ccfg.recurrent_head) {
        m.enc1 = make_enc_lstm(r_top, e1, k, seed, "head.enc1", m.params);
        m.enc2 = make_enc_lstm(e1, e2, k, seed, "head.enc2", m.params);
    } else {
        m.enc1_cw = conv_w(e1, r_top, k, seed, "head.enc1.Wc");
        m.enc1_cb = zeros<float>({e1}, true);
        m.enc2_cw = conv_w(e2, e1, k, seed, "head.enc2.Wc");
        m.enc2_cb = zeros<float>({e2}, true);
        m.params.emplace("head.enc1.Wc", m.enc1_cw);
        m.params.emplace("head.enc1.bc", m.enc1_cb);
        m.params.emplace("head.enc2.Wc", m.enc2_cw);
        m.params.emplace("head.enc2.bc", m.enc2_cb);
    }
    m.fc_w = glorot_named({ccfg.num_classes, e2}, e2, ccfg.num_classes, seed, "head.fc.W");
    m.fc_b = zeros<float>({ccfg.num_classes}, true);
    m.params.emplace("head.fc.W", m.fc_w);
    m.params.emplace("head.fc.b", m.fc_b);

    const int mid = ccfg.decoder_mid_channels, fb = ccfg.feedback_channels;
    if (ccfg.decoder_zero_init) {
        // frozen at zero: the feedback pathway is inert and the model is the
        // plain hierarchy with widened-but-zero inputs
        m.dec1_w = zeros<float>({e2, mid, k, k}, false);
        m.dec2_w = zeros<float>({fb, mid, k, k}, false);
    } else {
        m.dec1_w = conv_w(e2, mid, k, seed, "head.dec1.W");
        m.dec2_w = ccfg.decoder_zero_last ? zeros<float>({fb, mid, k, k}, true)
                                          : conv_w(fb, mid, k, seed, "head.dec2.W");
    }
    m.params.emplace("head.dec1.W", m.dec1_w);
    m.params.emplace("head.dec2.W", m.dec2_w);
    return m;
}

ClassifierState classifier_zero_state(const PlusModel& m) {
    ClassifierState s;
    s.s1 = convlstm_zero_state<float>(m.ccfg.encoder_channels[0], m.top_h(), m.top_w());
    s.s2 = convlstm_zero_state<float>(m.ccfg.encoder_channels[1], m.top_h(), m.top_w());
    return s;
}

ClassifyResult classify_step(const PlusModel& m, const TensorPtr& r_top, const ClassifierState& state) {
    if (r_top->shape.size() != 3 || r_top->shape[1] != m.top_h() || r_top->shape[2] != m.top_w())
        throw DimensionError("classify_step: representation shape " + shape_str(r_top->shape) +
                             " does not match the top layer");
    ClassifyResult out;
    if (m.ccfg.recurrent_head) {
        auto [h1, s1] = convlstm_step<float>({r_top}, state.s1, m.enc1);
        auto [h2, s2] = convlstm_step<float>({h1}, state.s2, m.enc2);
        out.features = h2;
        out.state = ClassifierState{s1, s2};
    } else {
        TensorPtr h1 = relu(conv2d(r_top, m.enc1_cw, m.enc1_cb));
        out.features = relu(conv2d(h1, m.enc2_cw, m.enc2_cb));
        out.state = state;
    }
    out.logits = affine(global_avg_pool(out.features), m.fc_w, m.fc_b);
    return out;
}

AggregateResult aggregate_logits(const std::vector<TensorPtr>& per_t_logits, float alpha) {
    const int T = static_cast<int>(per_t_logits.size());
    if (T < 1) throw ContractError("aggregate_logits: need at least one frame");
    if (alpha < 0) throw ContractError("aggregate_logits: alpha must be >= 0");
    std::vector<double> w(T);
    double sum = 0.0;
    for (int t = 0; t < T; ++t) {
        w[t] = std::exp(static_cast<double>(alpha) * (t + 1 - T) / T);
        sum += w[t];
    }
    TensorPtr acc;
    for (int t = 0; t < T; ++t) {
        TensorPtr term = scale(per_t_logits[t], static_cast<float>(w[t] / sum));
        acc = acc ? add(acc, term) : term;
    }
    return {acc, softmax(acc)};
}

TensorPtr decode_feedback(const PlusModel& m, const TensorPtr& features) {
    TensorPtr up = relu(conv2d_transpose<float>(features, m.dec1_w, nullptr, 2));
    return conv2d<float>(up, m.dec2_w, nullptr, 1);
}

TensorPtr multitask_loss(const TensorPtr& frame_loss, const TensorPtr& agg_logits, int label,
                         const ClassifierConfig& cfg) {
    if (label < 0 || label >= cfg.num_classes) throw ContractError("multitask_loss: label out of range");
    if (agg_logits->shape != Shape{cfg.num_classes})
        throw DimensionError("multitask_loss: logits shape " + shape_str(agg_logits->shape));
    TensorPtr total = scale(frame_loss, cfg.beta);
    if (cfg.gamma == 0.0f) return total;
    float factor = 1.0f;
    if (!cfg.group_map.empty()) {
        const int top1 = static_cast<int>(std::max_element(agg_logits->data.begin(), agg_logits->data.end()) -
                                          agg_logits->data.begin());
        if (cfg.group_map[top1] != cfg.group_map[label]) factor = cfg.group_penalty;
    }
    TensorPtr ce = cross_entropy_with_logits(agg_logits, label);
    return add(total, scale(ce, cfg.gamma * factor));
}

PlusRollout rollout_plus(const PlusModel& m, const std::vector<TensorPtr>& frames, RolloutMode mode, int t_start) {
    const int T = static_cast<int>(frames.size());
    if (T < 1) throw ContractError("rollout_plus: empty sequence");
    if (mode == RolloutMode::closed_loop && (t_start < 2 || t_start > T))
        throw ContractError("rollout_plus: closed loop needs 2 <= t_start <= T");
    PlusRollout out;
    StepState state = zero_state(m.core);
    ClassifierState cstate = classifier_zero_state(m);
    TensorPtr feedback;  // consumed one step after it is produced
    const int L = m.core.cfg.num_layers;
    for (int t = 0; t < T; ++t) {
        TensorPtr input = frames[t];
        if (mode == RolloutMode::closed_loop && t >= t_start) input = out.frame_trace.predictions[t - 1];
        StepResult res = step(m.core, input, state, feedback);
        state = std::move(res.state);
        ClassifyResult cls = classify_step(m, res.layers[L - 1].r, cstate);
        cstate = cls.state;
        feedback = decode_feedback(m, cls.features);
        out.class_trace.per_t_logits.push_back(cls.logits);
        out.class_trace.feedback_maps.push_back(feedback);

        out.frame_trace.predictions.push_back(res.prediction);
        out.frame_trace.e_means.emplace_back();
        out.frame_trace.mean_abs_e.emplace_back();
        out.frame_trace.mean_abs_r.emplace_back();
        for (int l = 0; l < L; ++l) {
            TensorPtr em = mean_all(res.layers[l].e);
            out.frame_trace.e_means.back().push_back(em);
            out.frame_trace.mean_abs_e.back().push_back(em->scalar());
            double acc = 0.0;
            for (float v : res.layers[l].r->data) acc += std::abs(static_cast<double>(v));
            out.frame_trace.mean_abs_r.back().push_back(acc / static_cast<double>(res.layers[l].r->size()));
        }
        out.frame_trace.states.push_back(std::move(res.layers));
    }
    AggregateResult agg = aggregate_logits(out.class_trace.per_t_logits, m.ccfg.alpha);
    out.class_trace.agg_logits = agg.logits;
    out.class_trace.aggregate_probs = agg.probs;
    return out;
}

ArrayMap export_params(const PlusModel& m) {
    ArrayMap arrays;
    for (const auto& [name, t] : m.params) {
        NamedArray arr;
        for (int d : t->shape) arr.extents.push_back(static_cast<std::uint32_t>(d));
        arr.data = t->data;
        arrays.emplace(name, std::move(arr));
    }
    return arrays;
}

void import_params(PlusModel& m, const ArrayMap& arrays) {
    for (auto& [name, t] : m.params) {
        auto it = arrays.find(name);
        if (it == arrays.end()) throw FormatError("checkpoint is missing parameter '" + name + "'");
        Shape shape;
        for (std::uint32_t e : it->second.extents) shape.push_back(static_cast<int>(e));
        if (shape != t->shape)
            throw FormatError("checkpoint parameter '" + name + "' has shape " + shape_str(shape) +
                              ", model expects " + shape_str(t->shape));
        t->data = it->second.data;
    }
    for (const auto& [name, arr] : arrays)
        if (!m.params.count(name)) throw FormatError("checkpoint has unexpected parameter '" + name + "'");
}

}  // namespace prednet
