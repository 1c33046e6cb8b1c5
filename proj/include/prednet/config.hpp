#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prednet/core.hpp"
#include "prednet/datagen.hpp"
#include "prednet/plus.hpp"

namespace prednet {

struct OptimizerConfig {
    float learning_rate = 1e-3f;
    int epochs = 10;
    int batch_size = 8;
    int plateau_patience = 3;  // epochs without val improvement before halving lr
    float lr_decay = 0.5f;
    float min_lr = 1e-5f;
};

struct EvalConfig {
    double tau = 0.01;
    std::vector<int> extrapolation_start;  // empty: T/4, T/2, 3T/4
    int extrapolation_steps = 4;
};

struct DatagenConfig {
    SceneSpec scene;
    int num_train = 2000;
    int num_test = 400;
    std::string glyph_path;  // empty: built-in digit set
};

struct ExperimentConfig {
    PredNetConfig model;
    bool classifier_enabled = false;
    ClassifierConfig classifier;
    OptimizerConfig optimizer;
    std::string train_path, val_path, test_path;
    int fps_factor = 1;
    EvalConfig eval;
    DatagenConfig datagen;
    std::uint64_t seed = 1;

    void validate() const;
};

// key = value file with one [section] per module; '#' starts a comment.
// Unknown sections or keys are configuration errors.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");

}  // namespace prednet
