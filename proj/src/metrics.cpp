#include "prednet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "prednet/errors.hpp"

namespace prednet {

namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;
constexpr double kC1 = (kK1 * 1.0) * (kK1 * 1.0);
constexpr double kC2 = (kK2 * 1.0) * (kK2 * 1.0);

void check_same(const Image& a, const Image& b, const char* who) {
    if (a.c != b.c || a.h != b.h || a.w != b.w)
        throw DimensionError(std::string(who) + ": image shapes differ");
    if (a.c <= 0 || a.h <= 0 || a.w <= 0) throw DimensionError(std::string(who) + ": empty image");
}

const std::vector<double>& gaussian_window() {
    static const std::vector<double> win = [] {
        std::vector<double> w(kWin);
        double sum = 0.0;
        for (int i = 0; i < kWin; ++i) {
            double d = i - (kWin - 1) / 2.0;
            w[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
            sum += w[i];
        }
        for (double& x : w) x /= sum;
        return w;
    }();
    return win;
}

// separable valid-region filter: rows then columns
void filter_valid(const double* src, int h, int w, std::vector<double>& tmp, std::vector<double>& dst) {
    const auto& win = gaussian_window();
    const int wo = w - kWin + 1, ho = h - kWin + 1;
    tmp.assign(static_cast<std::size_t>(h) * wo, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < wo; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWin; ++i) acc += win[i] * src[y * w + x + i];
            tmp[y * wo + x] = acc;
        }
    dst.assign(static_cast<std::size_t>(ho) * wo, 0.0);
    for (int y = 0; y < ho; ++y)
        for (int x = 0; x < wo; ++x) {
            double acc = 0.0;
            for (int i = 0; i < kWin; ++i) acc += win[i] * tmp[(y + i) * wo + x];
            dst[y * wo + x] = acc;
        }
}

}  // namespace

double mae(const Image& a, const Image& b) {
    check_same(a, b, "mae");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a.v[i] - b.v[i]);
    return acc / static_cast<double>(a.size());
}

double psnr(const Image& a, const Image& b) {
    check_same(a, b, "psnr");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a.v[i] - b.v[i];
        acc += d * d;
    }
    double mse = acc / static_cast<double>(a.size());
    if (mse < 1e-10) return 100.0;
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const Image& a, const Image& b) {
    check_same(a, b, "ssim");
    if (a.h < kWin || a.w < kWin)
        throw DimensionError("ssim: image smaller than the 11x11 window");
    const std::size_t plane = static_cast<std::size_t>(a.h) * a.w;
    std::vector<double> tmp, mu_a, mu_b, m_aa, m_bb, m_ab;
    std::vector<double> sq(plane);
    double total = 0.0;
    for (int c = 0; c < a.c; ++c) {
        const double* pa = a.v.data() + c * plane;
        const double* pb = b.v.data() + c * plane;
        filter_valid(pa, a.h, a.w, tmp, mu_a);
        filter_valid(pb, a.h, a.w, tmp, mu_b);
        for (std::size_t i = 0; i < plane; ++i) sq[i] = pa[i] * pa[i];
        filter_valid(sq.data(), a.h, a.w, tmp, m_aa);
        for (std::size_t i = 0; i < plane; ++i) sq[i] = pb[i] * pb[i];
        filter_valid(sq.data(), a.h, a.w, tmp, m_bb);
        for (std::size_t i = 0; i < plane; ++i) sq[i] = pa[i] * pb[i];
        filter_valid(sq.data(), a.h, a.w, tmp, m_ab);
        double acc = 0.0;
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            const double ma = mu_a[i], mb = mu_b[i];
            const double va = m_aa[i] - ma * ma;
            const double vb = m_bb[i] - mb * mb;
            const double cov = m_ab[i] - ma * mb;
            acc += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
        }
        total += acc / static_cast<double>(mu_a.size());
    }
    return total / a.c;
}

double conditioned_ssim(const Image& actual_prev, const Image& actual_t, const Image& pred_t) {
    return conditioned_ssim_from(ssim(actual_prev, pred_t), ssim(actual_t, pred_t));
}

std::vector<int> movement_mask(const std::vector<Image>& sequence, double tau) {
    if (sequence.size() < 2) throw ContractError("movement_mask: need at least two frames");
    if (!(tau > 0.0)) throw ContractError("movement_mask: tau must be positive");
    std::vector<int> mask;
    for (std::size_t t = 1; t < sequence.size(); ++t)
        if (mae(sequence[t], sequence[t - 1]) > tau) mask.push_back(static_cast<int>(t));
    return mask;
}

double sharpness(const Image& img) {
    if (img.h < 3 || img.w < 3) return 0.0;
    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    const std::size_t plane = static_cast<std::size_t>(img.h) * img.w;
    for (int c = 0; c < img.c; ++c) {
        const double* p = img.v.data() + c * plane;
        for (int y = 1; y + 1 < img.h; ++y)
            for (int x = 1; x + 1 < img.w; ++x) {
                const double r = p[(y - 1) * img.w + x] + p[(y + 1) * img.w + x] + p[y * img.w + x - 1] +
                                 p[y * img.w + x + 1] - 4.0 * p[y * img.w + x];
                sum += r;
                sum2 += r * r;
                ++n;
            }
    }
    if (n == 0) return 0.0;
    const double mean = sum / static_cast<double>(n);
    return sum2 / static_cast<double>(n) - mean * mean;
}

std::vector<Image> baseline_copy(const std::vector<Image>& sequence) {
    if (sequence.size() < 2) throw ContractError("baseline_copy: need at least two frames");
    std::vector<Image> preds(sequence.size());
    for (std::size_t t = 1; t < sequence.size(); ++t) preds[t] = sequence[t - 1];
    return preds;
}

SequenceMetrics score_sequence(const std::vector<Image>& actual, const std::vector<Image>& preds, int t_begin,
                               double tau) {
    if (t_begin < 1 || t_begin + preds.size() > actual.size())
        throw ContractError("score_sequence: prediction window out of range");
    const std::vector<int> moving = movement_mask(actual, tau);
    SequenceMetrics m;
    double n = 0, n_mov = 0, n_still = 0;
    double psnr_mov = 0, ssim_mov = 0, cond_mov = 0, cond_still = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const int t = t_begin + static_cast<int>(i);
        const Image& p = preds[i];
        const Image& a = actual[t];
        m.mae += mae(a, p);
        m.psnr += psnr(a, p);
        const double s = ssim(a, p);
        m.ssim += s;
        const double cond = conditioned_ssim_from(ssim(actual[t - 1], p), s);
        m.ssim_cond += cond;
        m.sharpness += sharpness(p);
        n += 1;
        if (std::binary_search(moving.begin(), moving.end(), t)) {
            psnr_mov += psnr(a, p);
            ssim_mov += s;
            cond_mov += cond;
            n_mov += 1;
        } else {
            cond_still += cond;
            n_still += 1;
        }
    }
    if (n > 0) {
        m.mae /= n;
        m.psnr /= n;
        m.ssim /= n;
        m.ssim_cond /= n;
        m.sharpness /= n;
    }
    if (n_mov > 0) {
        m.psnr_movement = psnr_mov / n_mov;
        m.ssim_movement = ssim_mov / n_mov;
        m.ssim_cond_movement = cond_mov / n_mov;
    }
    if (n_still > 0) m.ssim_cond_still = cond_still / n_still;
    return m;
}

namespace {

std::optional<double> opt_sub(const std::optional<double>& a, const std::optional<double>& b) {
    if (a && b) return *a - *b;
    return std::nullopt;
}

SequenceMetrics metrics_sub(const SequenceMetrics& a, const SequenceMetrics& b) {
    SequenceMetrics d;
    d.mae = a.mae - b.mae;
    d.psnr = a.psnr - b.psnr;
    d.ssim = a.ssim - b.ssim;
    d.ssim_cond = a.ssim_cond - b.ssim_cond;
    d.sharpness = a.sharpness - b.sharpness;
    d.psnr_movement = opt_sub(a.psnr_movement, b.psnr_movement);
    d.ssim_movement = opt_sub(a.ssim_movement, b.ssim_movement);
    d.ssim_cond_movement = opt_sub(a.ssim_cond_movement, b.ssim_cond_movement);
    d.ssim_cond_still = opt_sub(a.ssim_cond_still, b.ssim_cond_still);
    return d;
}

// Mean over sequences; optional fields average over the sequences where they
// are present and stay absent when no sequence contributes.
SequenceMetrics metrics_mean(const std::vector<SequenceMetrics>& rows) {
    SequenceMetrics agg;
    if (rows.empty()) return agg;
    double n = static_cast<double>(rows.size());
    double pm = 0, sm = 0, cm = 0, cs = 0;
    double n_pm = 0, n_sm = 0, n_cm = 0, n_cs = 0;
    for (const auto& r : rows) {
        agg.mae += r.mae;
        agg.psnr += r.psnr;
        agg.ssim += r.ssim;
        agg.ssim_cond += r.ssim_cond;
        agg.sharpness += r.sharpness;
        if (r.psnr_movement) {
            pm += *r.psnr_movement;
            n_pm += 1;
        }
        if (r.ssim_movement) {
            sm += *r.ssim_movement;
            n_sm += 1;
        }
        if (r.ssim_cond_movement) {
            cm += *r.ssim_cond_movement;
            n_cm += 1;
        }
        if (r.ssim_cond_still) {
            cs += *r.ssim_cond_still;
            n_cs += 1;
        }
    }
    agg.mae /= n;
    agg.psnr /= n;
    agg.ssim /= n;
    agg.ssim_cond /= n;
    agg.sharpness /= n;
    if (n_pm > 0) agg.psnr_movement = pm / n_pm;
    if (n_sm > 0) agg.ssim_movement = sm / n_sm;
    if (n_cm > 0) agg.ssim_cond_movement = cm / n_cm;
    if (n_cs > 0) agg.ssim_cond_still = cs / n_cs;
    return agg;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

void write_row(std::ostream& os, const std::string& id, const SequenceMetrics& m, const SequenceMetrics& c,
               const SequenceMetrics& d) {
    os << id;
    for (const SequenceMetrics* s : {&m, &c, &d}) {
        os << ',' << fmt(s->mae) << ',' << fmt(s->psnr) << ',' << fmt(s->ssim) << ',' << fmt_opt(s->psnr_movement)
           << ',' << fmt_opt(s->ssim_movement) << ',' << fmt(s->ssim_cond) << ',' << fmt_opt(s->ssim_cond_movement)
           << ',' << fmt_opt(s->ssim_cond_still) << ',' << fmt(s->sharpness);
    }
    os << '\n';
}

}  // namespace

MetricsReport build_report(const std::vector<std::string>& ids, const std::vector<std::vector<Image>>& actual,
                           const std::vector<std::vector<Image>>& preds, int t_begin, double tau) {
    if (ids.size() != actual.size() || ids.size() != preds.size())
        throw ContractError("build_report: ragged inputs");
    MetricsReport rep;
    rep.sequence_ids = ids;
    for (std::size_t s = 0; s < actual.size(); ++s) {
        rep.model.push_back(score_sequence(actual[s], preds[s], t_begin, tau));
        std::vector<Image> copy_preds(actual[s].begin() + (t_begin - 1),
                                      actual[s].begin() + (t_begin - 1) + preds[s].size());
        rep.copy.push_back(score_sequence(actual[s], copy_preds, t_begin, tau));
        rep.delta.push_back(metrics_sub(rep.model.back(), rep.copy.back()));
    }
    rep.agg_model = metrics_mean(rep.model);
    rep.agg_copy = metrics_mean(rep.copy);
    rep.agg_delta = metrics_mean(rep.delta);
    return rep;
}

void write_report_csv(const MetricsReport& report, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw FormatError("cannot open for writing: " + path);
    os << "sequence_id";
    for (const char* side : {"model", "copy", "delta"})
        for (const char* metric : {"mae", "psnr", "ssim", "psnr_movement", "ssim_movement", "ssim_cond",
                                   "ssim_cond_movement", "ssim_cond_still", "sharpness"})
            os << ',' << side << '_' << metric;
    os << '\n';
    for (std::size_t i = 0; i < report.sequence_ids.size(); ++i)
        write_row(os, report.sequence_ids[i], report.model[i], report.copy[i], report.delta[i]);
    write_row(os, "aggregate", report.agg_model, report.agg_copy, report.agg_delta);
    if (!os) throw FormatError("write failed: " + path);
}

}  // namespace prednet
