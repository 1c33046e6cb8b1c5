#pragma once

#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "prednet/tensor.hpp"

namespace prednet {

// ---------------------------------------------------------------------------
// Structured kernels: 2-d convolution (cross-correlation, "same" padding),
// strided transposed convolution (exact adjoint of the strided convolution),
// 2x2 max pooling, nearest-neighbor upsampling, ConvLSTM cell, softmax.
// All differentiable through the tape.
// ---------------------------------------------------------------------------

struct ConvSpec {
    int in_channels = 0;
    int out_channels = 0;
    int kernel = 3;  // odd, square
    int stride = 1;
};

namespace kern {

// Deterministic row dot product: fixed accumulation pattern, wide enough for
// the vectorizer.
template <class Real>
inline Real dot_row(const Real* a, const Real* b, int n) {
    Real acc[8] = {Real(0), Real(0), Real(0), Real(0), Real(0), Real(0), Real(0), Real(0)};
    int i = 0;
    for (; i + 8 <= n; i += 8)
        for (int j = 0; j < 8; ++j) acc[j] += a[i + j] * b[i + j];
    for (int j = 0; i < n; ++i, ++j) acc[j] += a[i] * b[i];
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

template <class Real>
inline Real sum_row(const Real* a, int n) {
    Real acc[8] = {Real(0), Real(0), Real(0), Real(0), Real(0), Real(0), Real(0), Real(0)};
    int i = 0;
    for (; i + 8 <= n; i += 8)
        for (int j = 0; j < 8; ++j) acc[j] += a[i + j];
    for (int j = 0; i < n; ++i, ++j) acc[j] += a[i];
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

// y[Co,Ho,Wo] += cross-correlation of x[Ci,H,W] with w[Co,Ci,k,k], stride s,
// pad k/2. Callers pre-fill y with the bias.
template <class Real>
void conv_accum(Real* y, const Real* x, const Real* w, int ci_n, int h, int w_in, int co_n, int k, int s) {
    const int p = k / 2;
    const int ho = h / s, wo = w_in / s;
    const std::size_t x_plane = static_cast<std::size_t>(h) * w_in;
    const std::size_t y_plane = static_cast<std::size_t>(ho) * wo;
    for (int co = 0; co < co_n; ++co) {
        for (int ci = 0; ci < ci_n; ++ci) {
            const Real* xc = x + ci * x_plane;
            const Real* wk = w + (static_cast<std::size_t>(co) * ci_n + ci) * k * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const Real wv = wk[ky * k + kx];
                    if (wv == Real(0)) continue;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * s + ky - p;
                        if (iy < 0 || iy >= h) continue;
                        Real* yr = y + co * y_plane + static_cast<std::size_t>(oy) * wo;
                        const Real* xr = xc + static_cast<std::size_t>(iy) * w_in;
                        if (s == 1) {
                            const int off = kx - p;
                            const int x0 = std::max(0, -off);
                            const int x1 = std::min(wo, w_in - off);
                            for (int ox = x0; ox < x1; ++ox) yr[ox] += wv * xr[ox + off];
                        } else {
                            for (int ox = 0; ox < wo; ++ox) {
                                const int ix = ox * s + kx - p;
                                if (ix < 0 || ix >= w_in) continue;
                                yr[ox] += wv * xr[ix];
                            }
                        }
                    }
                }
            }
        }
    }
}

// dx[Ci,H,W] += adjoint of conv_accum applied to dy[Co,Ho,Wo]: the scatter
// that makes <conv(x), y> == <x, conv_adjoint(y)> exact.
template <class Real>
void conv_adjoint_accum(Real* dx, const Real* dy, const Real* w, int ci_n, int h, int w_in, int co_n, int k, int s) {
    const int p = k / 2;
    const int ho = h / s, wo = w_in / s;
    const std::size_t x_plane = static_cast<std::size_t>(h) * w_in;
    const std::size_t y_plane = static_cast<std::size_t>(ho) * wo;
    for (int co = 0; co < co_n; ++co) {
        for (int ci = 0; ci < ci_n; ++ci) {
            Real* xc = dx + ci * x_plane;
            const Real* wk = w + (static_cast<std::size_t>(co) * ci_n + ci) * k * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const Real wv = wk[ky * k + kx];
                    if (wv == Real(0)) continue;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * s + ky - p;
                        if (iy < 0 || iy >= h) continue;
                        const Real* yr = dy + co * y_plane + static_cast<std::size_t>(oy) * wo;
                        Real* xr = xc + static_cast<std::size_t>(iy) * w_in;
                        if (s == 1) {
                            const int off = kx - p;
                            const int x0 = std::max(0, -off);
                            const int x1 = std::min(wo, w_in - off);
                            for (int ox = x0; ox < x1; ++ox) xr[ox + off] += wv * yr[ox];
                        } else {
                            for (int ox = 0; ox < wo; ++ox) {
                                const int ix = ox * s + kx - p;
                                if (ix < 0 || ix >= w_in) continue;
                                xr[ix] += wv * yr[ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

// dw[Co,Ci,k,k] += weight gradient: correlate x against dy.
template <class Real>
void conv_weight_grad_accum(Real* dw, const Real* x, const Real* dy, int ci_n, int h, int w_in, int co_n, int k,
                            int s) {
    const int p = k / 2;
    const int ho = h / s, wo = w_in / s;
    const std::size_t x_plane = static_cast<std::size_t>(h) * w_in;
    const std::size_t y_plane = static_cast<std::size_t>(ho) * wo;
    for (int co = 0; co < co_n; ++co) {
        for (int ci = 0; ci < ci_n; ++ci) {
            const Real* xc = x + ci * x_plane;
            Real* wk = dw + (static_cast<std::size_t>(co) * ci_n + ci) * k * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    Real acc = Real(0);
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * s + ky - p;
                        if (iy < 0 || iy >= h) continue;
                        const Real* yr = dy + co * y_plane + static_cast<std::size_t>(oy) * wo;
                        const Real* xr = xc + static_cast<std::size_t>(iy) * w_in;
                        if (s == 1) {
                            const int off = kx - p;
                            const int x0 = std::max(0, -off);
                            const int x1 = std::min(wo, w_in - off);
                            acc += dot_row(xr + (off + x0), yr + x0, x1 - x0);
                        } else {
                            Real a = Real(0);
                            for (int ox = 0; ox < wo; ++ox) {
                                const int ix = ox * s + kx - p;
                                if (ix < 0 || ix >= w_in) continue;
                                a += xr[ix] * yr[ox];
                            }
                            acc += a;
                        }
                    }
                    wk[ky * k + kx] += acc;
                }
            }
        }
    }
}

}  // namespace kern

namespace detail {

inline void check_conv_args(const Shape& xs, const Shape& ws, int k, int s, const char* who) {
    if (xs.size() != 3) throw DimensionError(std::string(who) + ": input must be [C,H,W], got " + shape_str(xs));
    if (ws.size() != 4 || ws[2] != k || ws[3] != k)
        throw DimensionError(std::string(who) + ": weights must be [Co,Ci,k,k], got " + shape_str(ws));
    if (k % 2 == 0) throw DimensionError(std::string(who) + ": kernel must be odd");
    if (s != 1 && s != 2) throw DimensionError(std::string(who) + ": stride must be 1 or 2");
}

}  // namespace detail

// Cross-correlation with "same" padding. x[Ci,H,W], w[Co,Ci,k,k], optional
// b[Co]; stride 1 preserves extents, stride 2 halves them (H, W even).
template <class Real>
TensorPtrT<Real> conv2d(const TensorPtrT<Real>& x, const TensorPtrT<Real>& w, const TensorPtrT<Real>& b = nullptr,
                        int stride = 1) {
    const int k = w->shape.size() == 4 ? w->shape[2] : 0;
    detail::check_conv_args(x->shape, w->shape, k, stride, "conv2d");
    const int ci = x->shape[0], h = x->shape[1], wd = x->shape[2];
    const int co = w->shape[0];
    if (w->shape[1] != ci)
        throw DimensionError("conv2d: input has " + std::to_string(ci) + " channels, weights expect " +
                             std::to_string(w->shape[1]));
    if (h % stride != 0 || wd % stride != 0) throw DimensionError("conv2d: extents must be divisible by stride");
    if (b && (b->shape.size() != 1 || b->shape[0] != co))
        throw DimensionError("conv2d: bias must be [Co], got " + shape_str(b->shape));
    const int ho = h / stride, wo = wd / stride;
    std::vector<Real> out(static_cast<std::size_t>(co) * ho * wo, Real(0));
    if (b) {
        const std::size_t plane = static_cast<std::size_t>(ho) * wo;
        for (int c = 0; c < co; ++c) std::fill_n(out.data() + c * plane, plane, b->data[c]);
    }
    kern::conv_accum(out.data(), x->data.data(), w->data.data(), ci, h, wd, co, k, stride);

    TensorT<Real>*px = x.get(), *pw = w.get(), *pb = b.get();
    std::vector<TensorPtrT<Real>> parents = b ? std::vector<TensorPtrT<Real>>{x, w, b}
                                              : std::vector<TensorPtrT<Real>>{x, w};
    return detail::make_node<Real>(
        Shape{co, ho, wo}, std::move(out), std::move(parents),
        [px, pw, pb, ci, h, wd, co, k, stride](TensorT<Real>& self) {
            if (px->requires_grad) {
                px->ensure_grad();
                kern::conv_adjoint_accum(px->grad.data(), self.grad.data(), pw->data.data(), ci, h, wd, co, k, stride);
            }
            if (pw->requires_grad) {
                pw->ensure_grad();
                kern::conv_weight_grad_accum(pw->grad.data(), px->data.data(), self.grad.data(), ci, h, wd, co, k,
                                             stride);
            }
            if (pb && pb->requires_grad) {
                pb->ensure_grad();
                const int ho2 = h / stride, wo2 = wd / stride;
                const std::size_t plane = static_cast<std::size_t>(ho2) * wo2;
                for (int c = 0; c < co; ++c)
                    pb->grad[c] += kern::sum_row(self.grad.data() + c * plane, static_cast<int>(plane));
            }
        },
        "conv2d");
}

// Transposed convolution: the exact adjoint of conv2d with the same weights
// and stride. x[Co,H,W] (conv-output space), w[Co,Ci,k,k], optional b[Ci];
// output [Ci, s*H, s*W]. Zero insertion with "same" kernel padding.
template <class Real>
TensorPtrT<Real> conv2d_transpose(const TensorPtrT<Real>& x, const TensorPtrT<Real>& w,
                                  const TensorPtrT<Real>& b = nullptr, int stride = 2) {
    const int k = w->shape.size() == 4 ? w->shape[2] : 0;
    detail::check_conv_args(x->shape, w->shape, k, stride, "conv2d_transpose");
    const int co = x->shape[0], ho = x->shape[1], wo = x->shape[2];
    const int ci = w->shape[1];
    if (w->shape[0] != co)
        throw DimensionError("conv2d_transpose: input has " + std::to_string(co) + " channels, weights expect " +
                             std::to_string(w->shape[0]));
    if (b && (b->shape.size() != 1 || b->shape[0] != ci))
        throw DimensionError("conv2d_transpose: bias must be [Ci], got " + shape_str(b->shape));
    const int h = ho * stride, wd = wo * stride;
    std::vector<Real> out(static_cast<std::size_t>(ci) * h * wd, Real(0));
    if (b) {
        const std::size_t plane = static_cast<std::size_t>(h) * wd;
        for (int c = 0; c < ci; ++c) std::fill_n(out.data() + c * plane, plane, b->data[c]);
    }
    kern::conv_adjoint_accum(out.data(), x->data.data(), w->data.data(), ci, h, wd, co, k, stride);

    TensorT<Real>*px = x.get(), *pw = w.get(), *pb = b.get();
    std::vector<TensorPtrT<Real>> parents = b ? std::vector<TensorPtrT<Real>>{x, w, b}
                                              : std::vector<TensorPtrT<Real>>{x, w};
    return detail::make_node<Real>(
        Shape{ci, h, wd}, std::move(out), std::move(parents),
        [px, pw, pb, ci, h, wd, co, k, stride](TensorT<Real>& self) {
            if (px->requires_grad) {
                px->ensure_grad();
                kern::conv_accum(px->grad.data(), self.grad.data(), pw->data.data(), ci, h, wd, co, k, stride);
            }
            if (pw->requires_grad) {
                pw->ensure_grad();
                kern::conv_weight_grad_accum(pw->grad.data(), self.grad.data(), px->data.data(), ci, h, wd, co, k,
                                             stride);
            }
            if (pb && pb->requires_grad) {
                pb->ensure_grad();
                const std::size_t plane = static_cast<std::size_t>(h) * wd;
                for (int c = 0; c < ci; ++c)
                    pb->grad[c] += kern::sum_row(self.grad.data() + c * plane, static_cast<int>(plane));
            }
        },
        "conv2d_transpose");
}

// 2x2 max pooling, stride 2. Gradient routes to the argmax; ties go to the
// first element in row-major scan order.
template <class Real>
TensorPtrT<Real> maxpool2(const TensorPtrT<Real>& x) {
    if (x->shape.size() != 3) throw DimensionError("maxpool2: expects [C,H,W]");
    const int c = x->shape[0], h = x->shape[1], w = x->shape[2];
    if (h % 2 != 0 || w % 2 != 0) throw DimensionError("maxpool2: extents must be even, got " + shape_str(x->shape));
    const int ho = h / 2, wo = w / 2;
    std::vector<Real> out(static_cast<std::size_t>(c) * ho * wo);
    auto argmax = std::make_shared<std::vector<std::int32_t>>(out.size());
    const std::size_t in_plane = static_cast<std::size_t>(h) * w;
    const std::size_t out_plane = static_cast<std::size_t>(ho) * wo;
    for (int cc = 0; cc < c; ++cc) {
        const Real* xp = x->data.data() + cc * in_plane;
        for (int oy = 0; oy < ho; ++oy) {
            for (int ox = 0; ox < wo; ++ox) {
                const std::size_t base = static_cast<std::size_t>(2 * oy) * w + 2 * ox;
                const std::size_t cand[4] = {base, base + 1, base + w, base + w + 1};
                std::size_t best = cand[0];
                Real bv = xp[best];
                for (int j = 1; j < 4; ++j)
                    if (xp[cand[j]] > bv) {
                        bv = xp[cand[j]];
                        best = cand[j];
                    }
                const std::size_t oi = cc * out_plane + static_cast<std::size_t>(oy) * wo + ox;
                out[oi] = bv;
                (*argmax)[oi] = static_cast<std::int32_t>(cc * in_plane + best);
            }
        }
    }
    if (detail::pattern_active()) {
        std::uint64_t bits = 0;
        for (std::int32_t v : *argmax) bits = bits * 1315423911u + static_cast<std::uint64_t>(v);
        detail::pattern_feed(bits);
    }
    TensorT<Real>* px = x.get();
    return detail::make_node<Real>(
        Shape{c, ho, wo}, std::move(out), {x},
        [px, argmax](TensorT<Real>& self) {
            if (!px->requires_grad) return;
            px->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) px->grad[(*argmax)[i]] += self.grad[i];
        },
        "maxpool2");
}

// Nearest-neighbor 2x upsampling; gradient sums over each 2x2 block.
template <class Real>
TensorPtrT<Real> upsample_nearest2(const TensorPtrT<Real>& x) {
    if (x->shape.size() != 3) throw DimensionError("upsample_nearest2: expects [C,H,W]");
    const int c = x->shape[0], h = x->shape[1], w = x->shape[2];
    const int ho = 2 * h, wo = 2 * w;
    std::vector<Real> out(static_cast<std::size_t>(c) * ho * wo);
    const std::size_t in_plane = static_cast<std::size_t>(h) * w;
    const std::size_t out_plane = static_cast<std::size_t>(ho) * wo;
    for (int cc = 0; cc < c; ++cc)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                const Real v = x->data[cc * in_plane + static_cast<std::size_t>(y) * w + xx];
                Real* o = out.data() + cc * out_plane + static_cast<std::size_t>(2 * y) * wo + 2 * xx;
                o[0] = v;
                o[1] = v;
                o[wo] = v;
                o[wo + 1] = v;
            }
    TensorT<Real>* px = x.get();
    return detail::make_node<Real>(
        Shape{c, ho, wo}, std::move(out), {x},
        [px, c, h, w](TensorT<Real>& self) {
            if (!px->requires_grad) return;
            px->ensure_grad();
            const std::size_t in_plane = static_cast<std::size_t>(h) * w;
            const int wo = 2 * w;
            const std::size_t out_plane = static_cast<std::size_t>(2 * h) * wo;
            for (int cc = 0; cc < c; ++cc)
                for (int y = 0; y < h; ++y)
                    for (int xx = 0; xx < w; ++xx) {
                        const Real* g = self.grad.data() + cc * out_plane + static_cast<std::size_t>(2 * y) * wo +
                                        2 * xx;
                        px->grad[cc * in_plane + static_cast<std::size_t>(y) * w + xx] +=
                            (g[0] + g[1]) + (g[wo] + g[wo + 1]);
                    }
        },
        "upsample_nearest2");
}

// Per-channel spatial mean: [C,H,W] -> [C].
template <class Real>
TensorPtrT<Real> global_avg_pool(const TensorPtrT<Real>& x) {
    if (x->shape.size() != 3) throw DimensionError("global_avg_pool: expects [C,H,W]");
    const int c = x->shape[0];
    const std::size_t plane = static_cast<std::size_t>(x->shape[1]) * x->shape[2];
    std::vector<Real> out(c);
    for (int cc = 0; cc < c; ++cc) {
        double acc = 0.0;
        const Real* p = x->data.data() + cc * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += static_cast<double>(p[i]);
        out[cc] = static_cast<Real>(acc / static_cast<double>(plane));
    }
    TensorT<Real>* px = x.get();
    return detail::make_node<Real>(
        Shape{c}, std::move(out), {x},
        [px, c, plane](TensorT<Real>& self) {
            if (!px->requires_grad) return;
            px->ensure_grad();
            for (int cc = 0; cc < c; ++cc) {
                const Real g = self.grad[cc] / static_cast<Real>(plane);
                Real* p = px->grad.data() + cc * plane;
                for (std::size_t i = 0; i < plane; ++i) p[i] += g;
            }
        },
        "global_avg_pool");
}

// y = W x + b with x[N], W[M,N], b[M].
template <class Real>
TensorPtrT<Real> affine(const TensorPtrT<Real>& x, const TensorPtrT<Real>& w, const TensorPtrT<Real>& b) {
    if (x->shape.size() != 1 || w->shape.size() != 2 || b->shape.size() != 1)
        throw DimensionError("affine: expects x[N], W[M,N], b[M]");
    const int n = x->shape[0], m = w->shape[0];
    if (w->shape[1] != n || b->shape[0] != m)
        throw DimensionError("affine: inconsistent shapes " + shape_str(x->shape) + " " + shape_str(w->shape));
    std::vector<Real> out(m);
    for (int i = 0; i < m; ++i) out[i] = b->data[i] + kern::dot_row(w->data.data() + i * n, x->data.data(), n);
    TensorT<Real>*px = x.get(), *pw = w.get(), *pb = b.get();
    return detail::make_node<Real>(
        Shape{m}, std::move(out), {x, w, b},
        [px, pw, pb, n, m](TensorT<Real>& self) {
            if (px->requires_grad) {
                px->ensure_grad();
                for (int i = 0; i < m; ++i) {
                    const Real g = self.grad[i];
                    const Real* wr = pw->data.data() + i * n;
                    for (int j = 0; j < n; ++j) px->grad[j] += g * wr[j];
                }
            }
            if (pw->requires_grad) {
                pw->ensure_grad();
                for (int i = 0; i < m; ++i) {
                    const Real g = self.grad[i];
                    Real* wr = pw->grad.data() + i * n;
                    for (int j = 0; j < n; ++j) wr[j] += g * px->data[j];
                }
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (int i = 0; i < m; ++i) pb->grad[i] += self.grad[i];
            }
        },
        "affine");
}

// Stabilized softmax over a vector of logits.
template <class Real>
TensorPtrT<Real> softmax(const TensorPtrT<Real>& logits) {
    if (logits->shape.size() != 1 || logits->shape[0] < 1) throw DimensionError("softmax: expects a vector");
    const int n = logits->shape[0];
    Real m = logits->data[0];
    for (int i = 1; i < n; ++i) m = std::max(m, logits->data[i]);
    std::vector<Real> e(n);
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
        e[i] = std::exp(logits->data[i] - m);
        z += static_cast<double>(e[i]);
    }
    std::vector<Real> out(n);
    for (int i = 0; i < n; ++i) out[i] = static_cast<Real>(e[i] / z);
    TensorT<Real>* px = logits.get();
    return detail::make_node<Real>(
        Shape{n}, std::move(out), {logits},
        [px, n](TensorT<Real>& self) {
            if (!px->requires_grad) return;
            px->ensure_grad();
            double dot = 0.0;
            for (int i = 0; i < n; ++i) dot += static_cast<double>(self.grad[i]) * self.data[i];
            for (int i = 0; i < n; ++i)
                px->grad[i] += self.data[i] * (self.grad[i] - static_cast<Real>(dot));
        },
        "softmax");
}

// -log softmax(logits)[label], computed via log-sum-exp.
template <class Real>
TensorPtrT<Real> cross_entropy_with_logits(const TensorPtrT<Real>& logits, int label) {
    if (logits->shape.size() != 1) throw DimensionError("cross_entropy_with_logits: expects a vector");
    const int n = logits->shape[0];
    if (label < 0 || label >= n) throw ContractError("cross_entropy_with_logits: label out of range");
    Real m = logits->data[0];
    for (int i = 1; i < n; ++i) m = std::max(m, logits->data[i]);
    double z = 0.0;
    for (int i = 0; i < n; ++i) z += std::exp(static_cast<double>(logits->data[i]) - static_cast<double>(m));
    const double loss = std::log(z) + static_cast<double>(m) - static_cast<double>(logits->data[label]);
    TensorT<Real>* px = logits.get();
    auto node = detail::make_node<Real>(
        Shape{1}, {static_cast<Real>(loss)}, {logits},
        [px, n, label, m, z](TensorT<Real>& self) {
            if (!px->requires_grad) return;
            px->ensure_grad();
            const Real g = self.grad[0];
            for (int i = 0; i < n; ++i) {
                const Real p = static_cast<Real>(std::exp(static_cast<double>(px->data[i]) -
                                                          static_cast<double>(m)) / z);
                px->grad[i] += g * (p - (i == label ? Real(1) : Real(0)));
            }
        },
        "cross_entropy_with_logits");
    node->hi = loss;
    return node;
}

// --- ConvLSTM ---------------------------------------------------------------

template <class Real>
struct ConvLstmStateT {
    TensorPtrT<Real> hidden;
    TensorPtrT<Real> cell;
};

// Gate-packed weights. Each input group has its own [4r, ch_g, k, k] tensor;
// summing the per-group convolutions is identical to convolving the channel
// concatenation. Gate order along the 4r axis: input, forget, candidate,
// output. The bias rides on the hidden-path convolution.
template <class Real>
struct ConvLstmWeightsT {
    std::vector<TensorPtrT<Real>> w_in;
    TensorPtrT<Real> w_h;
    TensorPtrT<Real> b;
};

template <class Real>
std::pair<TensorPtrT<Real>, ConvLstmStateT<Real>> convlstm_step(const std::vector<TensorPtrT<Real>>& inputs,
                                                                const ConvLstmStateT<Real>& state,
                                                                const ConvLstmWeightsT<Real>& weights) {
    if (inputs.size() != weights.w_in.size())
        throw DimensionError("convlstm_step: " + std::to_string(inputs.size()) + " inputs vs " +
                             std::to_string(weights.w_in.size()) + " weight groups");
    const int h = state.hidden->shape[1], w = state.hidden->shape[2];
    const int r = state.hidden->shape[0];
    for (const auto& in : inputs)
        if (in->shape[1] != h || in->shape[2] != w)
            throw DimensionError("convlstm_step: input extents " + shape_str(in->shape) +
                                 " do not match state " + shape_str(state.hidden->shape));
    TensorPtrT<Real> acts = conv2d(state.hidden, weights.w_h, weights.b);
    for (std::size_t g = 0; g < inputs.size(); ++g) acts = add(acts, conv2d(inputs[g], weights.w_in[g]));
    if (acts->shape[0] != 4 * r) throw DimensionError("convlstm_step: gate tensor must have 4r channels");
    auto gi = sigmoid(slice_channels(acts, 0, r));
    auto gf = sigmoid(slice_channels(acts, r, 2 * r));
    auto gc = tanh_op(slice_channels(acts, 2 * r, 3 * r));
    auto go = sigmoid(slice_channels(acts, 3 * r, 4 * r));
    auto cell = add(mul(gf, state.cell), mul(gi, gc));
    auto hidden = mul(go, tanh_op(cell));
    return {hidden, ConvLstmStateT<Real>{hidden, cell}};
}

template <class Real>
ConvLstmStateT<Real> convlstm_zero_state(int channels, int h, int w) {
    return {zeros<Real>({channels, h, w}), zeros<Real>({channels, h, w})};
}

}  // namespace prednet
