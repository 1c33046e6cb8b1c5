#include "prednet/core.hpp"

#include <cmath>

#include "prednet/errors.hpp"

namespace prednet {

void PredNetConfig::validate() const {
    if (num_layers < 1) throw ConfigError("num_layers must be >= 1");
    if (a_channels.size() != static_cast<std::size_t>(num_layers) ||
        r_channels.size() != static_cast<std::size_t>(num_layers))
        throw ConfigError("a_channels and r_channels must both have num_layers entries");
    for (int c : a_channels)
        if (c <= 0) throw ConfigError("a_channels entries must be positive");
    for (int c : r_channels)
        if (c <= 0) throw ConfigError("r_channels entries must be positive");
    if (kernel < 1 || kernel % 2 == 0) throw ConfigError("kernel must be odd");
    const int div = 1 << (num_layers - 1);
    if (input_h % div != 0 || input_w % div != 0)
        throw ConfigError("input size " + std::to_string(input_h) + "x" + std::to_string(input_w) +
                          " must be divisible by 2^(num_layers-1) = " + std::to_string(div));
    if (!(pixel_max > 0)) throw ConfigError("pixel_max must be positive");
    if (!layer_weights.empty()) {
        if (layer_weights.size() != static_cast<std::size_t>(num_layers))
            throw ConfigError("layer_weights must have num_layers entries");
        for (float w : layer_weights)
            if (w < 0) throw ConfigError("layer_weights must be nonnegative");
        if (loss_mode == LossMode::L0) {
            if (layer_weights[0] != 1.0f) throw ConfigError("L0 mode requires lambda_0 = 1");
            for (int l = 1; l < num_layers; ++l)
                if (layer_weights[l] != 0.0f) throw ConfigError("L0 mode requires lambda_l = 0 for l > 0");
        }
    }
    for (float w : time_weights)
        if (w < 0) throw ConfigError("time_weights must be nonnegative");
}

std::vector<float> PredNetConfig::effective_layer_weights() const {
    if (!layer_weights.empty()) return layer_weights;
    std::vector<float> w(num_layers, loss_mode == LossMode::Lall ? 0.1f : 0.0f);
    w[0] = 1.0f;
    return w;
}

TensorPtr Model::param(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
}

namespace {

TensorPtr glorot(const Shape& shape, int fan_in, int fan_out, std::uint64_t seed, const std::string& name) {
    const float lim = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
    std::mt19937 rng(static_cast<std::uint32_t>(splitmix64(splitmix64(seed) ^ fnv1a(name))));
    return uniform_tensor<float>(shape, -lim, lim, rng, /*requires_grad=*/true);
}

TensorPtr conv_weight(int co, int ci, int k, std::uint64_t seed, const std::string& name) {
    return glorot({co, ci, k, k}, ci * k * k, co * k * k, seed, name);
}

}  // namespace

Model init_model(const PredNetConfig& cfg, std::uint64_t seed, int feedback_channels) {
    cfg.validate();
    if (feedback_channels < 0) throw ConfigError("feedback_channels must be >= 0");
    if (feedback_channels > 0 && cfg.num_layers < 2)
        throw ConfigError("feedback requires at least two layers");
    Model m;
    m.cfg = cfg;
    m.feedback_channels = feedback_channels;
    const int L = cfg.num_layers, k = cfg.kernel;
    m.layers.resize(L);
    auto reg = [&](const std::string& name, const TensorPtr& t) { m.params.emplace(name, t); };
    for (int l = 0; l < L; ++l) {
        LayerParams& lp = m.layers[l];
        const int r = cfg.r_channels[l];
        const int e_ch = 2 * cfg.a_channels[l];
        const std::string pfx = "l" + std::to_string(l) + ".";

        lp.r.w_in.push_back(conv_weight(4 * r, e_ch, k, seed, pfx + "R.W_e"));
        reg(pfx + "R.W_e", lp.r.w_in.back());
        if (l < L - 1) {
            lp.r.w_in.push_back(conv_weight(4 * r, cfg.r_channels[l + 1], k, seed, pfx + "R.W_td"));
            reg(pfx + "R.W_td", lp.r.w_in.back());
        }
        if (feedback_channels > 0 && l == L - 2) {
            lp.r.w_in.push_back(conv_weight(4 * r, feedback_channels, k, seed, pfx + "R.W_fb"));
            reg(pfx + "R.W_fb", lp.r.w_in.back());
        }
        lp.r.w_h = conv_weight(4 * r, r, k, seed, pfx + "R.W_h");
        reg(pfx + "R.W_h", lp.r.w_h);
        std::vector<float> bias(4 * r, 0.0f);
        for (int i = r; i < 2 * r; ++i) bias[i] = 1.0f;  // forget gate opens at init
        lp.r.b = make_tensor<float>({4 * r}, std::move(bias), true);
        reg(pfx + "R.b", lp.r.b);

        lp.ahat_w = conv_weight(cfg.a_channels[l], r, k, seed, pfx + "Ahat.W");
        lp.ahat_b = zeros<float>({cfg.a_channels[l]}, true);
        reg(pfx + "Ahat.W", lp.ahat_w);
        reg(pfx + "Ahat.b", lp.ahat_b);

        if (l >= 1) {
            lp.a_w = conv_weight(cfg.a_channels[l], 2 * cfg.a_channels[l - 1], k, seed, pfx + "A.W");
            lp.a_b = zeros<float>({cfg.a_channels[l]}, true);
            reg(pfx + "A.W", lp.a_w);
            reg(pfx + "A.b", lp.a_b);
        }
    }
    return m;
}

StepState zero_state(const Model& m) {
    StepState s;
    const int L = m.cfg.num_layers;
    for (int l = 0; l < L; ++l) {
        const int h = m.cfg.layer_h(l), w = m.cfg.layer_w(l);
        s.r_states.push_back(convlstm_zero_state<float>(m.cfg.r_channels[l], h, w));
        s.e_prev.push_back(zeros<float>({2 * m.cfg.a_channels[l], h, w}));
    }
    return s;
}

StepResult step(const Model& m, const TensorPtr& frame, const StepState& prev, const TensorPtr& feedback) {
    const int L = m.cfg.num_layers;
    if (frame->shape != Shape{m.cfg.a_channels[0], m.cfg.input_h, m.cfg.input_w})
        throw DimensionError("step: frame shape " + shape_str(frame->shape) + " does not match config");
    if (static_cast<int>(prev.r_states.size()) != L || static_cast<int>(prev.e_prev.size()) != L)
        throw DimensionError("step: state has wrong number of layers");

    StepResult out;
    out.layers.resize(L);
    out.state.r_states.resize(L);
    out.state.e_prev.resize(L);

    // pass 1, top-down: update representations
    std::vector<TensorPtr> r_new(L);
    for (int l = L - 1; l >= 0; --l) {
        std::vector<TensorPtr> inputs;
        inputs.push_back(prev.e_prev[l]);
        if (l < L - 1) inputs.push_back(upsample_nearest2(r_new[l + 1]));
        if (m.feedback_channels > 0 && l == L - 2) {
            TensorPtr fb = feedback;
            if (!fb) fb = zeros<float>({m.feedback_channels, m.cfg.layer_h(l), m.cfg.layer_w(l)});
            inputs.push_back(fb);
        }
        auto [h, state] = convlstm_step(inputs, prev.r_states[l], m.layers[l].r);
        r_new[l] = h;
        out.state.r_states[l] = state;
        out.layers[l].r = h;
    }

    // pass 2, bottom-up: targets, predictions, errors
    TensorPtr a = frame;
    for (int l = 0; l < L; ++l) {
        if (l > 0) a = maxpool2(relu(conv2d(out.layers[l - 1].e, m.layers[l].a_w, m.layers[l].a_b)));
        TensorPtr ahat = relu(conv2d(r_new[l], m.layers[l].ahat_w, m.layers[l].ahat_b));
        if (l == 0) ahat = clamp_max(ahat, m.cfg.pixel_max);
        TensorPtr e = concat_channels<float>({relu(sub(ahat, a)), relu(sub(a, ahat))});
        out.layers[l].a = a;
        out.layers[l].ahat = ahat;
        out.layers[l].e = e;
        out.state.e_prev[l] = e;
    }
    out.prediction = out.layers[0].ahat;
    return out;
}

namespace {

double mean_abs(const TensorPtr& t) {
    double acc = 0.0;
    for (float v : t->data) acc += std::abs(static_cast<double>(v));
    return acc / static_cast<double>(t->size());
}

}  // namespace

RolloutTrace rollout(const Model& m, const std::vector<TensorPtr>& frames, RolloutMode mode, int t_start) {
    const int T = static_cast<int>(frames.size());
    if (T < 1) throw ContractError("rollout: empty sequence");
    if (mode == RolloutMode::closed_loop) {
        if (t_start < 2 || t_start > T)
            throw ContractError("rollout: closed loop needs 2 <= t_start <= T, got " + std::to_string(t_start));
    }
    RolloutTrace trace;
    StepState state = zero_state(m);
    const int L = m.cfg.num_layers;
    for (int t = 0; t < T; ++t) {
        TensorPtr input = frames[t];
        if (mode == RolloutMode::closed_loop && t >= t_start) input = trace.predictions[t - 1];
        StepResult res = step(m, input, state);
        state = std::move(res.state);
        trace.predictions.push_back(res.prediction);
        trace.e_means.emplace_back();
        trace.mean_abs_e.emplace_back();
        trace.mean_abs_r.emplace_back();
        for (int l = 0; l < L; ++l) {
            TensorPtr em = mean_all(res.layers[l].e);
            trace.e_means.back().push_back(em);
            trace.mean_abs_e.back().push_back(em->scalar());
            trace.mean_abs_r.back().push_back(mean_abs(res.layers[l].r));
        }
        trace.states.push_back(std::move(res.layers));
    }
    return trace;
}

TensorPtr loss(const RolloutTrace& trace, const PredNetConfig& cfg) {
    const int T = static_cast<int>(trace.predictions.size());
    if (T < 2) throw ContractError("loss: trace must cover at least two frames");
    const std::vector<float> lam = cfg.effective_layer_weights();
    std::vector<float> mu = cfg.time_weights;
    if (mu.empty()) {
        mu.assign(T, 1.0f / static_cast<float>(T - 1));
        mu[0] = 0.0f;
    } else if (mu.size() != static_cast<std::size_t>(T)) {
        throw ContractError("loss: time_weights length does not match trace length");
    }
    TensorPtr total;
    for (int t = 0; t < T; ++t) {
        if (mu[t] == 0.0f) continue;
        TensorPtr layer_sum;
        for (int l = 0; l < cfg.num_layers; ++l) {
            if (lam[l] == 0.0f) continue;
            TensorPtr term = lam[l] == 1.0f ? trace.e_means[t][l] : scale(trace.e_means[t][l], lam[l]);
            layer_sum = layer_sum ? add(layer_sum, term) : term;
        }
        if (!layer_sum) continue;
        TensorPtr wt = mu[t] == 1.0f ? layer_sum : scale(layer_sum, mu[t]);
        total = total ? add(total, wt) : wt;
    }
    if (!total) total = zeros<float>({1});
    return total;
}

ArrayMap export_params(const Model& m) {
    ArrayMap arrays;
    for (const auto& [name, t] : m.params) {
        NamedArray arr;
        for (int d : t->shape) arr.extents.push_back(static_cast<std::uint32_t>(d));
        arr.data = t->data;
        arrays.emplace(name, std::move(arr));
    }
    return arrays;
}

void import_params(Model& m, const ArrayMap& arrays) {
    for (auto& [name, t] : m.params) {
        auto it = arrays.find(name);
        if (it == arrays.end()) throw FormatError("checkpoint is missing parameter '" + name + "'");
        const NamedArray& arr = it->second;
        Shape shape;
        for (std::uint32_t e : arr.extents) shape.push_back(static_cast<int>(e));
        if (shape != t->shape)
            throw FormatError("checkpoint parameter '" + name + "' has shape " + shape_str(shape) +
                              ", model expects " + shape_str(t->shape));
        t->data = arr.data;
    }
    for (const auto& [name, arr] : arrays)
        if (!m.params.count(name)) throw FormatError("checkpoint has unexpected parameter '" + name + "'");
}

}  // namespace prednet
