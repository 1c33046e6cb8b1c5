#include "prednet/config.hpp"

#include <fstream>
#include <sstream>

#include "prednet/errors.hpp"

namespace prednet {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        long long out = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected integer, got '" + v + "'");
    }
}

double parse_real(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        double out = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected number, got '" + v + "'");
    }
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("key '" + key + "': expected boolean, got '" + v + "'");
}

template <class T, class F>
std::vector<T> parse_list(const std::string& v, const std::string& key, F item) {
    std::vector<T> out;
    std::stringstream ss(v);
    std::string part;
    while (std::getline(ss, part, ',')) {
        part = trim(part);
        if (!part.empty()) out.push_back(static_cast<T>(item(part, key)));
    }
    return out;
}

}  // namespace

void ExperimentConfig::validate() const {
    model.validate();
    if (classifier_enabled) classifier.validate();
    if (fps_factor < 1) throw ConfigError("fps_factor must be >= 1");
    if (optimizer.epochs < 0 || optimizer.batch_size < 1) throw ConfigError("bad optimizer settings");
    if (!(optimizer.learning_rate > 0)) throw ConfigError("learning_rate must be positive");
    if (!(eval.tau > 0)) throw ConfigError("eval tau must be positive");
    if (eval.extrapolation_steps < 1) throw ConfigError("extrapolation_steps must be >= 1");
    datagen.scene.validate();
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg;
    cfg.model.a_channels = {1, 4, 8};
    cfg.model.r_channels = {4, 8, 16};
    std::istringstream is(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "model" && section != "classifier" && section != "optimizer" && section != "data" &&
                section != "eval" && section != "datagen" && section != "experiment")
                throw ConfigError(where + ": unknown section '" + section + "'");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");

        auto unknown = [&]() -> ConfigError {
            return ConfigError(where + ": unknown key '" + key + "' in section [" + section + "]");
        };

        if (section == "model") {
            if (key == "num_layers") cfg.model.num_layers = static_cast<int>(parse_int(val, key));
            else if (key == "a_channels") cfg.model.a_channels = parse_list<int>(val, key, parse_int);
            else if (key == "r_channels") cfg.model.r_channels = parse_list<int>(val, key, parse_int);
            else if (key == "loss_mode") {
                if (val == "L0") cfg.model.loss_mode = LossMode::L0;
                else if (val == "Lall") cfg.model.loss_mode = LossMode::Lall;
                else throw ConfigError(where + ": loss_mode must be L0 or Lall");
            } else if (key == "layer_weights") cfg.model.layer_weights = parse_list<float>(val, key, parse_real);
            else if (key == "time_weights") cfg.model.time_weights = parse_list<float>(val, key, parse_real);
            else if (key == "pixel_max") cfg.model.pixel_max = static_cast<float>(parse_real(val, key));
            else if (key == "input_h") cfg.model.input_h = static_cast<int>(parse_int(val, key));
            else if (key == "input_w") cfg.model.input_w = static_cast<int>(parse_int(val, key));
            else if (key == "kernel") cfg.model.kernel = static_cast<int>(parse_int(val, key));
            else throw unknown();
        } else if (section == "classifier") {
            if (key == "enabled") cfg.classifier_enabled = parse_bool(val, key);
            else if (key == "num_classes") cfg.classifier.num_classes = static_cast<int>(parse_int(val, key));
            else if (key == "alpha") cfg.classifier.alpha = static_cast<float>(parse_real(val, key));
            else if (key == "beta") cfg.classifier.beta = static_cast<float>(parse_real(val, key));
            else if (key == "gamma") cfg.classifier.gamma = static_cast<float>(parse_real(val, key));
            else if (key == "group_map") {
                if (val == "axes") cfg.classifier.group_map = axis_group_map();
                else if (val == "none") cfg.classifier.group_map.clear();
                else cfg.classifier.group_map = parse_list<int>(val, key, parse_int);
            } else if (key == "group_penalty") cfg.classifier.group_penalty = static_cast<float>(parse_real(val, key));
            else if (key == "encoder_channels") cfg.classifier.encoder_channels = parse_list<int>(val, key, parse_int);
            else if (key == "decoder_mid_channels")
                cfg.classifier.decoder_mid_channels = static_cast<int>(parse_int(val, key));
            else if (key == "feedback_channels")
                cfg.classifier.feedback_channels = static_cast<int>(parse_int(val, key));
            else if (key == "recurrent_head") cfg.classifier.recurrent_head = parse_bool(val, key);
            else if (key == "decoder_zero_init") cfg.classifier.decoder_zero_init = parse_bool(val, key);
            else if (key == "decoder_zero_last") cfg.classifier.decoder_zero_last = parse_bool(val, key);
            else throw unknown();
        } else if (section == "optimizer") {
            if (key == "learning_rate") cfg.optimizer.learning_rate = static_cast<float>(parse_real(val, key));
            else if (key == "epochs") cfg.optimizer.epochs = static_cast<int>(parse_int(val, key));
            else if (key == "batch_size") cfg.optimizer.batch_size = static_cast<int>(parse_int(val, key));
            else if (key == "plateau_patience") cfg.optimizer.plateau_patience = static_cast<int>(parse_int(val, key));
            else if (key == "lr_decay") cfg.optimizer.lr_decay = static_cast<float>(parse_real(val, key));
            else if (key == "min_lr") cfg.optimizer.min_lr = static_cast<float>(parse_real(val, key));
            else throw unknown();
        } else if (section == "data") {
            if (key == "train") cfg.train_path = val;
            else if (key == "val") cfg.val_path = val;
            else if (key == "test") cfg.test_path = val;
            else if (key == "fps_factor") cfg.fps_factor = static_cast<int>(parse_int(val, key));
            else throw unknown();
        } else if (section == "eval") {
            if (key == "tau") cfg.eval.tau = parse_real(val, key);
            else if (key == "extrapolation_start") cfg.eval.extrapolation_start = parse_list<int>(val, key, parse_int);
            else if (key == "extrapolation_steps") cfg.eval.extrapolation_steps = static_cast<int>(parse_int(val, key));
            else throw unknown();
        } else if (section == "datagen") {
            if (key == "canvas_h") cfg.datagen.scene.canvas_h = static_cast<int>(parse_int(val, key));
            else if (key == "canvas_w") cfg.datagen.scene.canvas_w = static_cast<int>(parse_int(val, key));
            else if (key == "num_shapes") cfg.datagen.scene.num_shapes = static_cast<int>(parse_int(val, key));
            else if (key == "glyph_size") cfg.datagen.scene.glyph_size = static_cast<int>(parse_int(val, key));
            else if (key == "speed") cfg.datagen.scene.speed = static_cast<int>(parse_int(val, key));
            else if (key == "seq_len") cfg.datagen.scene.seq_len = static_cast<int>(parse_int(val, key));
            else if (key == "bg_min") cfg.datagen.scene.bg_min = parse_real(val, key);
            else if (key == "bg_max") cfg.datagen.scene.bg_max = parse_real(val, key);
            else if (key == "glyph_min") cfg.datagen.scene.glyph_min = parse_real(val, key);
            else if (key == "glyph_max") cfg.datagen.scene.glyph_max = parse_real(val, key);
            else if (key == "num_train") cfg.datagen.num_train = static_cast<int>(parse_int(val, key));
            else if (key == "num_test") cfg.datagen.num_test = static_cast<int>(parse_int(val, key));
            else if (key == "glyph_path") cfg.datagen.glyph_path = val;
            else throw unknown();
        } else if (section == "experiment") {
            if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(val, key));
            else throw unknown();
        } else {
            throw ConfigError(where + ": key '" + key + "' outside any section");
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_text(ss.str(), path);
}

}  // namespace prednet
