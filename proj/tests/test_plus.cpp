#include <doctest.h>

#include <cmath>
#include <random>

#include "prednet/plus.hpp"

using namespace prednet;

namespace {

PredNetConfig tiny_core(int layers = 2, int hw = 8) {
    PredNetConfig cfg;
    cfg.num_layers = layers;
    cfg.a_channels.assign(layers, 2);
    cfg.a_channels[0] = 1;
    cfg.r_channels.assign(layers, 2);
    cfg.input_h = hw;
    cfg.input_w = hw;
    return cfg;
}

ClassifierConfig tiny_head() {
    ClassifierConfig c;
    c.num_classes = 8;
    c.encoder_channels = {2, 2};
    c.decoder_mid_channels = 2;
    c.feedback_channels = 2;
    c.decoder_zero_last = false;
    return c;
}

std::vector<TensorPtr> random_frames(const PredNetConfig& cfg, int T, std::uint32_t seed) {
    std::mt19937 rng(seed);
    std::vector<TensorPtr> frames;
    for (int t = 0; t < T; ++t)
        frames.push_back(uniform_tensor<float>({cfg.a_channels[0], cfg.input_h, cfg.input_w}, 0.0f, 1.0f, rng));
    return frames;
}

}  // namespace

TEST_SUITE_BEGIN("plus");

TEST_CASE("classify_step with zeroed head weights yields zero logits at every step") {
    PlusModel m = init_plus_model(tiny_core(), tiny_head(), 3);
    for (const std::string& name : {"head.enc1.W_x", "head.enc1.W_h", "head.enc1.b", "head.enc2.W_x",
                                    "head.enc2.W_h", "head.enc2.b", "head.fc.W", "head.fc.b"})
        for (auto& v : m.params.at(name)->data) v = 0.0f;
    ClassifierState st = classifier_zero_state(m);
    std::mt19937 rng(4);
    for (int t = 0; t < 4; ++t) {
        auto r_top = uniform_tensor<float>({2, m.top_h(), m.top_w()}, -1.0f, 1.0f, rng);
        ClassifyResult res = classify_step(m, r_top, st);
        st = res.state;
        for (float v : res.logits->data) CHECK(v == 0.0f);
    }
}

TEST_CASE("constant input drives the recurrent head to a fixed point") {
    PlusModel m = init_plus_model(tiny_core(), tiny_head(), 7);
    NoGradGuard ng;
    std::mt19937 rng(8);
    auto r_top = uniform_tensor<float>({2, m.top_h(), m.top_w()}, -0.5f, 0.5f, rng);
    ClassifierState st = classifier_zero_state(m);
    std::vector<std::vector<float>> logit_hist;
    for (int t = 0; t < 20; ++t) {
        ClassifyResult res = classify_step(m, r_top, st);
        st = res.state;
        logit_hist.push_back(res.logits->data);
    }
    auto dist = [&](int a, int b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < logit_hist[a].size(); ++i)
            acc += std::abs(logit_hist[a][i] - logit_hist[b][i]);
        return acc;
    };
    CHECK(dist(19, 18) < dist(3, 2));
    CHECK(dist(19, 18) < 1e-3);
}

TEST_CASE("classify_step gradient check") {
    PlusModel m = init_plus_model(tiny_core(), tiny_head(), 11);
    std::mt19937 rng(12);
    auto r_top = uniform_tensor<float>({2, m.top_h(), m.top_w()}, -1.0f, 1.0f, rng, true);
    ScalarFn<float> f = [&](const std::vector<TensorPtr>& in) {
        ClassifyResult res = classify_step(m, in[0], classifier_zero_state(m));
        return sum_all(mul(res.logits, res.logits));
    };
    CHECK(grad_check<float>(f, {r_top}, 1e-2f) < 1e-3);
}

TEST_CASE("aggregate_logits weighting") {
    std::mt19937 rng(15);
    std::vector<TensorPtr> logits;
    for (int t = 0; t < 5; ++t) logits.push_back(uniform_tensor<float>({8}, -1.0f, 1.0f, rng));

    // alpha = 0: softmax of the plain mean
    AggregateResult a0 = aggregate_logits(logits, 0.0f);
    std::vector<float> mean(8, 0.0f);
    for (const auto& l : logits)
        for (int i = 0; i < 8; ++i) mean[i] += l->data[i] / 5.0f;
    auto sm = softmax(make_tensor<float>({8}, std::vector<float>(mean)));
    for (int i = 0; i < 8; ++i) CHECK(a0.probs->data[i] == doctest::Approx(sm->data[i]).epsilon(1e-5));

    // constant logits: output independent of alpha
    std::vector<TensorPtr> constant(6, logits[0]);
    AggregateResult c1 = aggregate_logits(constant, 0.0f);
    AggregateResult c2 = aggregate_logits(constant, 5.0f);
    for (int i = 0; i < 8; ++i) CHECK(c1.probs->data[i] == doctest::Approx(c2.probs->data[i]).epsilon(1e-6));

    // large alpha: the last frame dominates
    AggregateResult big = aggregate_logits(logits, 200.0f);
    auto last = softmax(logits.back());
    for (int i = 0; i < 8; ++i) CHECK(big.probs->data[i] == doctest::Approx(last->data[i]).epsilon(1e-4));

    // a valid distribution
    double sum = 0.0;
    for (float v : big.probs->data) {
        CHECK(v > 0.0f);
        sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("decode_feedback shape contract and zero map") {
    for (int layers : {2, 3, 4}) {
        PredNetConfig cfg = tiny_core(layers, 16);
        PlusModel m = init_plus_model(cfg, tiny_head(), 21);
        auto feat = zeros<float>({2, m.top_h(), m.top_w()});
        TensorPtr fb = decode_feedback(m, feat);
        CHECK(fb->shape == Shape{2, cfg.layer_h(layers - 2), cfg.layer_w(layers - 2)});
        for (float v : fb->data) CHECK(v == 0.0f);  // zero features decode to zero feedback
    }
}

TEST_CASE("plus step with zero feedback equals the vanilla step bit for bit") {
    PredNetConfig cfg = tiny_core(3, 16);
    ClassifierConfig head = tiny_head();
    PlusModel pm = init_plus_model(cfg, head, 33);
    Model vm = init_model(cfg, 33);  // same seed: shared names draw identical weights

    auto frames = random_frames(cfg, 3, 34);
    StepState ps = zero_state(pm.core), vs = zero_state(vm);
    for (int t = 0; t < 3; ++t) {
        StepResult pr = step(pm.core, frames[t], ps);  // no feedback tensor: zero group
        StepResult vr = step(vm, frames[t], vs);
        ps = std::move(pr.state);
        vs = std::move(vr.state);
        CHECK(pr.prediction->data == vr.prediction->data);
        for (int l = 0; l < cfg.num_layers; ++l) CHECK(pr.layers[l].r->data == vr.layers[l].r->data);
    }
}

TEST_CASE("class loss reaches the shared representation weights") {
    PredNetConfig cfg = tiny_core(2, 8);
    ClassifierConfig head = tiny_head();
    head.gamma = 1.0f;
    head.beta = 0.0f;  // isolate the class pathway
    PlusModel m = init_plus_model(cfg, head, 41);
    auto frames = random_frames(cfg, 4, 42);
    PlusRollout pr = rollout_plus(m, frames, RolloutMode::open_loop);
    TensorPtr frame_loss = loss(pr.frame_trace, cfg);
    TensorPtr total = multitask_loss(frame_loss, pr.class_trace.agg_logits, 3, head);
    backward(total);
    double r_norm = 0.0;
    for (const auto& [name, p] : m.params) {
        if (name.find(".R.") == std::string::npos || name.rfind("head.", 0) == 0) continue;
        for (float g : p->grad) r_norm += static_cast<double>(g) * g;
    }
    CHECK(r_norm > 0.0);
}

TEST_CASE("multitask loss arithmetic") {
    ClassifierConfig cfg = tiny_head();
    cfg.beta = 0.7f;
    cfg.gamma = 0.0f;
    auto frame_loss = make_tensor<float>({1}, {0.5f});
    auto logits = zeros<float>({8});
    TensorPtr l = multitask_loss(frame_loss, logits, 0, cfg);
    CHECK(l->scalar() == doctest::Approx(0.35).epsilon(1e-6));

    // certain correct prediction: zero class loss
    cfg.gamma = 1.0f;
    cfg.beta = 0.0f;
    std::vector<float> sure(8, -50.0f);
    sure[2] = 50.0f;
    TensorPtr l2 = multitask_loss(frame_loss, make_tensor<float>({8}, std::vector<float>(sure)), 2, cfg);
    CHECK(l2->scalar() == doctest::Approx(0.0).epsilon(1e-6));

    // wrong-group top-1 with p[label] = 1/e: class loss is exactly doubled
    cfg.group_map = axis_group_map();
    cfg.group_penalty = 2.0f;
    std::vector<float> two(8, -50.0f);
    two[0] = 0.0f;                              // the label, p = 1/e
    two[1] = std::log(std::exp(1.0f) - 1.0f);   // wrong group, takes top-1
    TensorPtr l3 = multitask_loss(frame_loss, make_tensor<float>({8}, std::vector<float>(two)), 0, cfg);
    CHECK(l3->scalar() == doctest::Approx(2.0).epsilon(1e-4));

    CHECK_THROWS_AS(multitask_loss(frame_loss, logits, 8, cfg), ContractError);
}

TEST_CASE("class gradient scales proportionally with gamma") {
    PredNetConfig cfg = tiny_core(2, 8);
    ClassifierConfig head = tiny_head();
    PlusModel m = init_plus_model(cfg, head, 51);
    auto frames = random_frames(cfg, 3, 52);

    auto grad_with_gamma = [&](float gamma) {
        ClassifierConfig h = head;
        h.beta = 0.0f;
        h.gamma = gamma;
        for (auto& [name, p] : m.params) p->zero_grad();
        PlusRollout pr = rollout_plus(m, frames, RolloutMode::open_loop);
        TensorPtr total = multitask_loss(loss(pr.frame_trace, cfg), pr.class_trace.agg_logits, 1, h);
        backward(total);
        std::vector<float> g;
        for (const auto& [name, p] : m.params)
            if (name.find(".R.") != std::string::npos) g.insert(g.end(), p->grad.begin(), p->grad.end());
        return g;
    };
    std::vector<float> g1 = grad_with_gamma(0.5f);
    std::vector<float> g2 = grad_with_gamma(1.0f);
    double n1 = 0, n2 = 0;
    for (float v : g1) n1 += static_cast<double>(v) * v;
    for (float v : g2) n2 += static_cast<double>(v) * v;
    REQUIRE(n1 > 0.0);
    CHECK(std::sqrt(n2) == doctest::Approx(2.0 * std::sqrt(n1)).epsilon(1e-3));
}

TEST_CASE("convolutional head variant") {
    ClassifierConfig head = tiny_head();
    head.recurrent_head = false;
    PlusModel m = init_plus_model(tiny_core(), head, 61);
    CHECK(m.params.count("head.enc1.Wc") == 1);
    CHECK(m.params.count("head.enc1.W_x") == 0);
    auto frames = random_frames(m.core.cfg, 3, 62);
    PlusRollout pr = rollout_plus(m, frames, RolloutMode::open_loop);
    CHECK(pr.class_trace.aggregate_probs->shape == Shape{8});
}

TEST_CASE("classifier config validation") {
    ClassifierConfig bad = tiny_head();
    bad.beta = 0.0f;
    bad.gamma = 0.0f;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    ClassifierConfig badg = tiny_head();
    badg.group_map = {0, 1};  // wrong length
    CHECK_THROWS_AS(badg.validate(), ConfigError);

    CHECK_THROWS_AS(init_plus_model(tiny_core(1, 8), tiny_head(), 1), ConfigError);
}

TEST_SUITE_END();
