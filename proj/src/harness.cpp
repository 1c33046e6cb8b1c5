#include "prednet/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include "prednet/errors.hpp"
#include "prednet/image_io.hpp"

namespace prednet {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void fisher_yates(std::vector<int>& order, std::uint64_t seed) {
    std::uint64_t s = splitmix64(seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        s = splitmix64(s);
        std::swap(order[i - 1], order[s % i]);
    }
}

// Either the plain hierarchy or the multi-task variant behind one surface.
struct Bundle {
    bool plus_mode = false;
    Model vanilla;
    PlusModel plus;

    static Bundle make(const ExperimentConfig& cfg) {
        Bundle b;
        b.plus_mode = cfg.classifier_enabled;
        if (b.plus_mode)
            b.plus = init_plus_model(cfg.model, cfg.classifier, cfg.seed);
        else
            b.vanilla = init_model(cfg.model, cfg.seed);
        return b;
    }

    std::map<std::string, TensorPtr>& params() { return plus_mode ? plus.params : vanilla.params; }

    void save(const std::string& path) const {
        write_pnck(plus_mode ? export_params(plus) : export_params(vanilla), path);
    }
    void load(const std::string& path) {
        ArrayMap arrays = read_pnck(path);
        if (plus_mode)
            import_params(plus, arrays);
        else
            import_params(vanilla, arrays);
    }

    // total training loss and the open-loop predictions for one sequence
    struct SeqLoss {
        TensorPtr total;
        RolloutTrace trace;
    };
    SeqLoss sequence_loss(const std::vector<TensorPtr>& frames, int label) const {
        if (plus_mode) {
            PlusRollout pr = rollout_plus(plus, frames, RolloutMode::open_loop);
            TensorPtr frame_loss = loss(pr.frame_trace, plus.core.cfg);
            TensorPtr total = multitask_loss(frame_loss, pr.class_trace.agg_logits, label, plus.ccfg);
            return {total, std::move(pr.frame_trace)};
        }
        RolloutTrace trace = rollout(vanilla, frames, RolloutMode::open_loop);
        return {loss(trace, vanilla.cfg), std::move(trace)};
    }

    RolloutTrace roll(const std::vector<TensorPtr>& frames, RolloutMode mode, int t_start) const {
        if (plus_mode) return rollout_plus(plus, frames, mode, t_start).frame_trace;
        return rollout(vanilla, frames, mode, t_start);
    }

    const PredNetConfig& model_cfg() const { return plus_mode ? plus.core.cfg : vanilla.cfg; }
};

struct Adam {
    float lr;
    float beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f;
    long t = 0;
    std::map<std::string, std::pair<std::vector<float>, std::vector<float>>> state;

    explicit Adam(float lr_) : lr(lr_) {}

    void step(std::map<std::string, TensorPtr>& params, float grad_scale) {
        ++t;
        const double bc1 = 1.0 - std::pow(static_cast<double>(beta1), static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(static_cast<double>(beta2), static_cast<double>(t));
        const float corr = static_cast<float>(std::sqrt(bc2) / bc1);
        for (auto& [name, p] : params) {
            if (!p->requires_grad || p->grad.empty()) continue;
            auto& [m, v] = state[name];
            if (m.size() != p->size()) {
                m.assign(p->size(), 0.0f);
                v.assign(p->size(), 0.0f);
            }
            const float a = lr * corr;
            for (std::size_t i = 0; i < p->size(); ++i) {
                const float g = p->grad[i] * grad_scale;
                m[i] = beta1 * m[i] + (1.0f - beta1) * g;
                v[i] = beta2 * v[i] + (1.0f - beta2) * g * g;
                p->data[i] -= a * m[i] / (std::sqrt(v[i]) + eps);
            }
        }
    }
};

void zero_grads(std::map<std::string, TensorPtr>& params) {
    for (auto& [name, p] : params)
        if (p->requires_grad) p->zero_grad();
}

std::vector<LabeledSequence> load_dataset(const std::string& path, int fps_factor) {
    std::vector<LabeledSequence> seqs = read_vseq(path);
    if (fps_factor > 1)
        for (auto& s : seqs) s = subsample_fps(s, fps_factor);
    return seqs;
}

double sequence_mae(const LabeledSequence& seq, const RolloutTrace& trace) {
    double acc = 0.0;
    for (int t = 1; t < seq.t; ++t) acc += mae(image_of(trace.predictions[t]), image_of_frame(seq, t));
    return acc / static_cast<double>(seq.t - 1);
}

void dump_diagnostic(const std::string& out_dir, const std::string& what, const Bundle& bundle, int epoch,
                     int seq_index) {
    std::ofstream os(fs::path(out_dir) / "diagnostic.txt", std::ios::trunc);
    os << "aborted: " << what << "\n";
    os << "epoch " << epoch << " sequence " << seq_index << "\n";
    os << "parameter max-abs values:\n";
    for (const auto& [name, p] : const_cast<Bundle&>(bundle).params()) {
        float mx = 0.0f;
        for (float x : p->data) mx = std::max(mx, std::abs(x));
        os << "  " << name << " " << fmt(mx) << "\n";
    }
}

}  // namespace

LabeledSequence subsample_fps(const LabeledSequence& seq, int factor) {
    if (factor < 1) throw ContractError("subsample_fps: factor must be >= 1");
    if (factor > seq.t) throw ContractError("subsample_fps: factor exceeds sequence length");
    if (factor == 1) return seq;
    LabeledSequence out;
    out.c = seq.c;
    out.h = seq.h;
    out.w = seq.w;
    out.seed = seq.seed;
    out.spec_hash = seq.spec_hash;
    for (int t = 0; t < seq.t; t += factor) {
        out.frames.insert(out.frames.end(), seq.frame(t), seq.frame(t) + seq.frame_size());
        out.labels.push_back(seq.labels[t]);
        ++out.t;
    }
    return out;
}

std::vector<TensorPtr> frames_of(const LabeledSequence& seq) {
    std::vector<TensorPtr> frames;
    frames.reserve(seq.t);
    for (int t = 0; t < seq.t; ++t)
        frames.push_back(make_tensor<float>({seq.c, seq.h, seq.w},
                                            std::vector<float>(seq.frame(t), seq.frame(t) + seq.frame_size())));
    return frames;
}

Image image_of(const TensorPtr& frame) {
    if (frame->shape.size() != 3) throw DimensionError("image_of: expects [C,H,W]");
    Image img;
    img.c = frame->shape[0];
    img.h = frame->shape[1];
    img.w = frame->shape[2];
    img.v.assign(frame->data.begin(), frame->data.end());
    return img;
}

Image image_of_frame(const LabeledSequence& seq, int t) {
    Image img;
    img.c = seq.c;
    img.h = seq.h;
    img.w = seq.w;
    img.v.assign(seq.frame(t), seq.frame(t) + seq.frame_size());
    return img;
}

TrainResult train(const ExperimentConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);
    std::vector<LabeledSequence> train_set = load_dataset(cfg.train_path, cfg.fps_factor);
    if (train_set.empty()) throw ContractError("train: empty training set");
    std::vector<LabeledSequence> val_set;
    if (!cfg.val_path.empty()) {
        val_set = load_dataset(cfg.val_path, cfg.fps_factor);
    } else {
        const std::size_t n_val = std::max<std::size_t>(1, train_set.size() / 10);
        if (train_set.size() <= n_val) throw ContractError("train: not enough sequences to split validation");
        val_set.assign(train_set.end() - n_val, train_set.end());
        train_set.erase(train_set.end() - n_val, train_set.end());
    }

    Bundle bundle = Bundle::make(cfg);
    Adam adam(cfg.optimizer.learning_rate);
    const int n_train = static_cast<int>(train_set.size());
    const int batch = std::min(cfg.optimizer.batch_size, n_train);

    TrainResult result;
    auto eval_pass = [&](const std::vector<LabeledSequence>& set, double* out_loss, double* out_mae) {
        NoGradGuard ng;
        double loss_acc = 0.0, mae_acc = 0.0;
        for (const auto& seq : set) {
            auto sl = bundle.sequence_loss(frames_of(seq), seq.labels.back());
            loss_acc += sl.total->scalar();
            if (out_mae) mae_acc += sequence_mae(seq, sl.trace);
        }
        if (out_loss) *out_loss = loss_acc / static_cast<double>(set.size());
        if (out_mae) *out_mae = mae_acc / static_cast<double>(set.size());
    };

    int epoch = 0, seq_index = -1;
    try {
        TrainLogRow row0;
        eval_pass(train_set, &row0.train_loss, nullptr);
        eval_pass(val_set, &row0.val_loss, &row0.val_mae);
        result.log.push_back(row0);
        std::cerr << "epoch 0 train_loss " << fmt(row0.train_loss) << " val_loss " << fmt(row0.val_loss)
                  << " val_mae " << fmt(row0.val_mae) << "\n";

        double best_val = row0.val_loss;
        int stall = 0;
        std::vector<int> order(n_train);
        std::iota(order.begin(), order.end(), 0);
        for (epoch = 1; epoch <= cfg.optimizer.epochs; ++epoch) {
            fisher_yates(order, splitmix64(cfg.seed ^ 0x5eedb00c) + static_cast<std::uint64_t>(epoch));
            double loss_acc = 0.0;
            for (int start = 0; start < n_train; start += batch) {
                const int stop = std::min(n_train, start + batch);
                zero_grads(bundle.params());
                for (int j = start; j < stop; ++j) {
                    seq_index = order[j];
                    const LabeledSequence& seq = train_set[seq_index];
                    auto sl = bundle.sequence_loss(frames_of(seq), seq.labels.back());
                    backward(sl.total);
                    loss_acc += sl.total->scalar();
                }
                adam.step(bundle.params(), 1.0f / static_cast<float>(stop - start));
            }
            TrainLogRow row;
            row.epoch = epoch;
            row.train_loss = loss_acc / static_cast<double>(n_train);
            eval_pass(val_set, &row.val_loss, &row.val_mae);
            result.log.push_back(row);
            std::cerr << "epoch " << epoch << " train_loss " << fmt(row.train_loss) << " val_loss "
                      << fmt(row.val_loss) << " val_mae " << fmt(row.val_mae) << " lr " << fmt(adam.lr) << "\n";
            if (!std::isfinite(row.train_loss) || !std::isfinite(row.val_loss))
                throw NumericError("non-finite epoch loss");
            if (row.val_loss < best_val) {
                best_val = row.val_loss;
                stall = 0;
            } else if (++stall >= cfg.optimizer.plateau_patience) {
                adam.lr = std::max(adam.lr * cfg.optimizer.lr_decay, cfg.optimizer.min_lr);
                stall = 0;
            }
        }
    } catch (const NumericError& e) {
        dump_diagnostic(out_dir, e.what(), bundle, epoch, seq_index);
        throw;
    }

    result.checkpoint_path = (fs::path(out_dir) / "model.pnck").string();
    bundle.save(result.checkpoint_path);
    result.log_path = (fs::path(out_dir) / "train_log.csv").string();
    std::ofstream os(result.log_path, std::ios::trunc);
    os << "epoch,train_loss,val_loss,val_mae\n";
    for (const auto& r : result.log)
        os << r.epoch << ',' << fmt(r.train_loss) << ',' << fmt(r.val_loss) << ',' << fmt(r.val_mae) << '\n';
    if (!os) throw FormatError("cannot write " + result.log_path);
    return result;
}

EvalOutputs evaluate(const ExperimentConfig& cfg, const std::string& checkpoint_path, const std::string& data_path,
                     const std::string& out_dir, bool copy_predictor) {
    cfg.validate();
    fs::create_directories(out_dir);
    std::vector<LabeledSequence> data = load_dataset(data_path, cfg.fps_factor);
    if (data.empty()) throw ContractError("evaluate: empty dataset");

    Bundle bundle = Bundle::make(cfg);
    if (!copy_predictor) bundle.load(checkpoint_path);

    NoGradGuard ng;
    std::vector<std::string> ids;
    std::vector<std::vector<Image>> actual, preds;
    long top1_hits = 0, top5_hits = 0, labeled = 0;
    std::ofstream classes;
    EvalOutputs out;
    const bool classify = bundle.plus_mode && !copy_predictor;
    if (classify) {
        out.classes_csv = (fs::path(out_dir) / "classes.csv").string();
        classes.open(out.classes_csv, std::ios::trunc);
        classes << "sequence_id,label,top1,top5,probabilities\n";
    }

    for (std::size_t i = 0; i < data.size(); ++i) {
        const LabeledSequence& seq = data[i];
        ids.push_back("seq" + std::to_string(i));
        std::vector<Image> frames_i;
        for (int t = 0; t < seq.t; ++t) frames_i.push_back(image_of_frame(seq, t));
        std::vector<Image> preds_i;
        if (copy_predictor) {
            for (int t = 1; t < seq.t; ++t) preds_i.push_back(frames_i[t - 1]);
        } else if (bundle.plus_mode) {
            PlusRollout pr = rollout_plus(bundle.plus, frames_of(seq), RolloutMode::open_loop);
            for (int t = 1; t < seq.t; ++t) preds_i.push_back(image_of(pr.frame_trace.predictions[t]));
            const auto& probs = pr.class_trace.aggregate_probs->data;
            std::vector<int> rank(probs.size());
            std::iota(rank.begin(), rank.end(), 0);
            std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) { return probs[a] > probs[b]; });
            const int label = seq.labels.back();
            ++labeled;
            if (rank[0] == label) ++top1_hits;
            for (int k = 0; k < std::min<int>(5, static_cast<int>(rank.size())); ++k)
                if (rank[k] == label) ++top5_hits;
            classes << ids.back() << ',' << label << ',' << rank[0] << ',';
            for (int k = 0; k < std::min<int>(5, static_cast<int>(rank.size())); ++k)
                classes << (k ? ";" : "") << rank[k];
            classes << ',';
            for (std::size_t k = 0; k < probs.size(); ++k) classes << (k ? ";" : "") << fmt(probs[k]);
            classes << '\n';
        } else {
            RolloutTrace trace = rollout(bundle.vanilla, frames_of(seq), RolloutMode::open_loop);
            for (int t = 1; t < seq.t; ++t) preds_i.push_back(image_of(trace.predictions[t]));
        }
        actual.push_back(std::move(frames_i));
        preds.push_back(std::move(preds_i));
    }
    out.report = build_report(ids, actual, preds, /*t_begin=*/1, cfg.eval.tau);
    out.metrics_csv = (fs::path(out_dir) / "metrics.csv").string();
    write_report_csv(out.report, out.metrics_csv);
    if (classify && labeled > 0) {
        out.top1_accuracy = static_cast<double>(top1_hits) / static_cast<double>(labeled);
        out.top5_accuracy = static_cast<double>(top5_hits) / static_cast<double>(labeled);
    }
    return out;
}

std::vector<ExtrapRow> extrapolate(const ExperimentConfig& cfg, const std::string& checkpoint_path,
                                   const std::string& data_path, int t_start, int n, const std::string& out_dir,
                                   int dump_sequences) {
    cfg.validate();
    fs::create_directories(out_dir);
    std::vector<LabeledSequence> data = load_dataset(data_path, cfg.fps_factor);
    if (data.empty()) throw ContractError("extrapolate: empty dataset");
    const int T = data[0].t;
    if (t_start < 2 || t_start >= T) throw ContractError("extrapolate: need 2 <= t_start < T");
    if (n < 1 || t_start + n > T) throw ContractError("extrapolate: need 1 <= n and t_start + n <= T");

    Bundle bundle = Bundle::make(cfg);
    bundle.load(checkpoint_path);
    NoGradGuard ng;

    std::vector<ExtrapRow> rows(n);
    for (int k = 0; k < n; ++k) {
        rows[k].t_start = t_start;
        rows[k].step = k + 1;
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        const LabeledSequence& seq = data[i];
        RolloutTrace trace = bundle.roll(frames_of(seq), RolloutMode::closed_loop, t_start);
        for (int k = 1; k <= n; ++k) {
            const int t = t_start + k - 1;
            Image pred = image_of(trace.predictions[t]);
            Image act = image_of_frame(seq, t);
            rows[k - 1].mae += mae(act, pred);
            rows[k - 1].psnr += psnr(act, pred);
            rows[k - 1].ssim += ssim(act, pred);
            rows[k - 1].sharpness += sharpness(pred);
            if (static_cast<int>(i) < dump_sequences) {
                const std::string tag = "seq" + std::to_string(i) + "_start" + std::to_string(t_start) + "_k" +
                                        std::to_string(k);
                write_pnm((fs::path(out_dir) / ("extrap_pred_" + tag + ".pgm")).string(),
                          trace.predictions[t]->data.data(), seq.c, seq.h, seq.w);
                write_pnm((fs::path(out_dir) / ("extrap_actual_" + tag + ".pgm")).string(), seq.frame(t), seq.c,
                          seq.h, seq.w);
            }
        }
    }
    const double n_seq = static_cast<double>(data.size());
    for (auto& r : rows) {
        r.mae /= n_seq;
        r.psnr /= n_seq;
        r.ssim /= n_seq;
        r.sharpness /= n_seq;
    }
    std::ofstream os(fs::path(out_dir) / ("extrap_start" + std::to_string(t_start) + ".csv"), std::ios::trunc);
    os << "t_start,step,mae,psnr,ssim,sharpness\n";
    for (const auto& r : rows)
        os << r.t_start << ',' << r.step << ',' << fmt(r.mae) << ',' << fmt(r.psnr) << ',' << fmt(r.ssim) << ','
           << fmt(r.sharpness) << '\n';
    return rows;
}

ProbeSummary probe(const ExperimentConfig& cfg, const std::string& checkpoint_path, const std::string& data_path,
                   int sequence_index, const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);
    std::vector<LabeledSequence> data = load_dataset(data_path, cfg.fps_factor);
    if (sequence_index < 0 || sequence_index >= static_cast<int>(data.size()))
        throw ContractError("probe: sequence index out of range");
    const LabeledSequence& seq = data[sequence_index];

    Bundle bundle = Bundle::make(cfg);
    bundle.load(checkpoint_path);
    NoGradGuard ng;
    RolloutTrace trace = bundle.roll(frames_of(seq), RolloutMode::open_loop, -1);

    const int L = bundle.model_cfg().num_layers;
    ProbeSummary summary;
    summary.trace_csv = (std::filesystem::path(out_dir) / "probe_trace.csv").string();
    std::ofstream os(summary.trace_csv, std::ios::trunc);
    os << "t,layer,mean_abs_E,mean_abs_R\n";
    for (int t = 0; t < seq.t; ++t)
        for (int l = 0; l < L; ++l)
            os << t << ',' << l << ',' << fmt(trace.mean_abs_e[t][l]) << ',' << fmt(trace.mean_abs_r[t][l]) << '\n';

    // channel-averaged activation images and predictions
    for (int t = 0; t < seq.t; ++t) {
        write_pnm((std::filesystem::path(out_dir) / ("probe_pred_t" + std::to_string(t) + ".pgm")).string(),
                  trace.predictions[t]->data.data(), seq.c, seq.h, seq.w);
        for (int l = 0; l < L; ++l) {
            const auto& st = trace.states[t][l];
            write_pnm((std::filesystem::path(out_dir) /
                       ("probe_E_t" + std::to_string(t) + "_l" + std::to_string(l) + ".pgm"))
                          .string(),
                      st.e->data.data(), st.e->shape[0], st.e->shape[1], st.e->shape[2]);
            write_pnm((std::filesystem::path(out_dir) /
                       ("probe_R_t" + std::to_string(t) + "_l" + std::to_string(l) + ".pgm"))
                          .string(),
                      st.r->data.data(), st.r->shape[0], st.r->shape[1], st.r->shape[2]);
        }
    }

    // time-averaged mean |E| per layer, checked for monotonicity in l
    std::vector<double> e_avg(L, 0.0);
    for (int t = 0; t < seq.t; ++t)
        for (int l = 0; l < L; ++l) e_avg[l] += trace.mean_abs_e[t][l];
    for (double& v : e_avg) v /= static_cast<double>(seq.t);
    summary.e_nondecreasing_in_layer = true;
    for (int l = 1; l < L; ++l)
        if (e_avg[l] < e_avg[l - 1]) summary.e_nondecreasing_in_layer = false;

    // correlation of the lowest layer's R trajectory with each higher layer
    auto corr = [&](int la, int lb) {
        double ma = 0, mb = 0;
        for (int t = 0; t < seq.t; ++t) {
            ma += trace.mean_abs_r[t][la];
            mb += trace.mean_abs_r[t][lb];
        }
        ma /= seq.t;
        mb /= seq.t;
        double num = 0, va = 0, vb = 0;
        for (int t = 0; t < seq.t; ++t) {
            const double da = trace.mean_abs_r[t][la] - ma;
            const double db = trace.mean_abs_r[t][lb] - mb;
            num += da * db;
            va += da * da;
            vb += db * db;
        }
        const double den = std::sqrt(va * vb);
        return den > 0 ? num / den : 0.0;
    };
    for (int l = 1; l < L; ++l) summary.r0_trajectory_corr.push_back(corr(0, l));

    std::ofstream sm(std::filesystem::path(out_dir) / "probe_summary.csv", std::ios::trunc);
    sm << "e_nondecreasing_in_layer";
    for (int l = 1; l < L; ++l) sm << ",corr_R0_R" << l;
    sm << '\n' << (summary.e_nondecreasing_in_layer ? 1 : 0);
    for (double c : summary.r0_trajectory_corr) sm << ',' << fmt(c);
    sm << '\n';
    return summary;
}

}  // namespace prednet
