#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "prednet/errors.hpp"

namespace prednet {

// ---------------------------------------------------------------------------
// Reverse-mode autodiff over dense n-d arrays.
//
// Storage is templated on the scalar type: production code runs float with
// double accumulation in reductions, oracle tests instantiate double.
// Tensors are immutable after creation except for gradient accumulation.
// ---------------------------------------------------------------------------

using Shape = std::vector<int>;

inline std::size_t numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) n *= static_cast<std::size_t>(d);
    return n;
}

inline bool same_shape(const Shape& a, const Shape& b) { return a == b; }

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

// Seed-splitting helpers; every derived RNG stream comes from these so that
// per-name parameter init is independent of parameter creation order.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// --- grad mode -------------------------------------------------------------

namespace detail {
inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

// Activation-pattern fingerprint. Non-smooth ops (relu, clamp, maxpool) feed
// their branch decisions here while a finite-difference probe is active, so
// the prober can detect when a perturbation crossed a kink and the central
// difference stopped estimating a derivative of anything.
struct PatternTracker {
    bool active = false;
    std::uint64_t hash = 0xcbf29ce484222325ull;
};

inline PatternTracker& pattern_tracker() {
    thread_local PatternTracker t;
    return t;
}

inline void pattern_feed(std::uint64_t bits) {
    PatternTracker& t = pattern_tracker();
    t.hash ^= bits;
    t.hash *= 0x100000001b3ull;
}

inline bool pattern_active() { return pattern_tracker().active; }
}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

struct NoGradGuard {
    NoGradGuard() : prev_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
    ~NoGradGuard() { detail::grad_mode_flag() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool prev_;
};

// --- tensor node -------------------------------------------------------------

template <class Real>
struct TensorT {
    Shape shape;
    std::vector<Real> data;
    std::vector<Real> grad;  // same length as data whenever requires_grad
    bool requires_grad = false;

    // Exact double value for scalar reductions; NaN when not applicable.
    // Finite-difference oracles read this instead of the rounded storage.
    double hi = std::numeric_limits<double>::quiet_NaN();

    // Graph edges. parents keep upstream nodes alive; backward_fn reads
    // this->grad and accumulates into the parents' grad buffers.
    std::vector<std::shared_ptr<TensorT>> parents;
    std::function<void(TensorT&)> backward_fn;

    std::size_t size() const { return data.size(); }
    bool is_leaf() const { return parents.empty(); }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), Real(0));
    }
    void zero_grad() { grad.assign(data.size(), Real(0)); }

    double scalar() const { return std::isnan(hi) ? static_cast<double>(data[0]) : hi; }
};

template <class Real>
using TensorPtrT = std::shared_ptr<TensorT<Real>>;

namespace detail {

template <class Real>
void check_finite(const std::vector<Real>& v, const char* where) {
    const Real limit = std::numeric_limits<Real>::max();
    bool ok = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
        Real a = v[i] < Real(0) ? -v[i] : v[i];
        ok &= (a <= limit);  // false for NaN and +-Inf
    }
    if (!ok) throw NumericError(std::string("non-finite value in ") + where);
}

template <class Real>
TensorPtrT<Real> make_node(Shape shape, std::vector<Real> data, std::vector<TensorPtrT<Real>> parents,
                           std::function<void(TensorT<Real>&)> backward_fn, const char* where) {
    if (numel(shape) != data.size())
        throw DimensionError(std::string(where) + ": shape " + shape_str(shape) + " does not match data length " +
                             std::to_string(data.size()));
    check_finite(data, where);
    auto t = std::make_shared<TensorT<Real>>();
    t->shape = std::move(shape);
    t->data = std::move(data);
    bool track = grad_enabled();
    bool needs = false;
    if (track)
        for (const auto& p : parents) needs = needs || p->requires_grad;
    if (needs) {
        t->requires_grad = true;
        t->ensure_grad();
        t->parents = std::move(parents);
        t->backward_fn = std::move(backward_fn);
    }
    return t;
}

}  // namespace detail

// --- leaf construction -------------------------------------------------------

template <class Real>
TensorPtrT<Real> make_tensor(Shape shape, std::vector<Real> data, bool requires_grad = false) {
    if (numel(shape) != data.size())
        throw DimensionError("make_tensor: shape " + shape_str(shape) + " does not match data length " +
                             std::to_string(data.size()));
    detail::check_finite(data, "make_tensor");
    auto t = std::make_shared<TensorT<Real>>();
    t->shape = std::move(shape);
    t->data = std::move(data);
    t->requires_grad = requires_grad;
    if (requires_grad) t->ensure_grad();
    return t;
}

template <class Real>
TensorPtrT<Real> full(const Shape& shape, Real value, bool requires_grad = false) {
    return make_tensor<Real>(shape, std::vector<Real>(numel(shape), value), requires_grad);
}

template <class Real>
TensorPtrT<Real> zeros(const Shape& shape, bool requires_grad = false) {
    return full<Real>(shape, Real(0), requires_grad);
}

template <class Real>
TensorPtrT<Real> uniform_tensor(const Shape& shape, Real lo, Real hi, std::mt19937& rng, bool requires_grad = false) {
    std::uniform_real_distribution<double> dist(static_cast<double>(lo), static_cast<double>(hi));
    std::vector<Real> v(numel(shape));
    for (auto& x : v) x = static_cast<Real>(dist(rng));
    return make_tensor<Real>(shape, std::move(v), requires_grad);
}

// --- elementwise ops ---------------------------------------------------------

enum class EwKind { add, sub, mul, relu, sigmoid, tanh, scale };

namespace detail {

template <class Real>
Real sigmoid_val(Real x) {
    if (x >= Real(0)) {
        Real e = std::exp(-x);
        return Real(1) / (Real(1) + e);
    }
    Real e = std::exp(x);
    return e / (Real(1) + e);
}

// scalar `hi` propagation for shape-{1} arithmetic, so composite losses keep
// a double-precision value alongside the rounded storage
inline double hi_of(double a, double b, EwKind k) {
    switch (k) {
        case EwKind::add: return a + b;
        case EwKind::sub: return a - b;
        case EwKind::mul: return a * b;
        default: return std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace detail

template <class Real>
TensorPtrT<Real> add(const TensorPtrT<Real>& a, const TensorPtrT<Real>& b) {
    if (!same_shape(a->shape, b->shape))
        throw DimensionError("add: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    std::vector<Real> out(a->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] + b->data[i];
    TensorT<Real>*pa = a.get(), *pb = b.get();
    auto node = detail::make_node<Real>(
        a->shape, std::move(out), {a, b},
        [pa, pb](TensorT<Real>& self) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < self.size(); ++i) pa->grad[i] += self.grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < self.size(); ++i) pb->grad[i] += self.grad[i];
            }
        },
        "add");
    if (a->size() == 1 && !std::isnan(a->hi) && !std::isnan(b->hi)) node->hi = a->hi + b->hi;
    return node;
}

template <class Real>
TensorPtrT<Real> sub(const TensorPtrT<Real>& a, const TensorPtrT<Real>& b) {
    if (!same_shape(a->shape, b->shape))
        throw DimensionError("sub: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    std::vector<Real> out(a->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] - b->data[i];
    TensorT<Real>*pa = a.get(), *pb = b.get();
    auto node = detail::make_node<Real>(
        a->shape, std::move(out), {a, b},
        [pa, pb](TensorT<Real>& self) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < self.size(); ++i) pa->grad[i] += self.grad[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < self.size(); ++i) pb->grad[i] -= self.grad[i];
            }
        },
        "sub");
    if (a->size() == 1 && !std::isnan(a->hi) && !std::isnan(b->hi)) node->hi = a->hi - b->hi;
    return node;
}

template <class Real>
TensorPtrT<Real> mul(const TensorPtrT<Real>& a, const TensorPtrT<Real>& b) {
    if (!same_shape(a->shape, b->shape))
        throw DimensionError("mul: " + shape_str(a->shape) + " vs " + shape_str(b->shape));
    std::vector<Real> out(a->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] * b->data[i];
    TensorT<Real>*pa = a.get(), *pb = b.get();
    auto node = detail::make_node<Real>(
        a->shape, std::move(out), {a, b},
        [pa, pb](TensorT<Real>& self) {
            if (pa->requires_grad) {
                pa->ensure_grad();
                for (std::size_t i = 0; i < self.size(); ++i) pa->grad[i] += self.grad[i] * pb->data[i];
            }
            if (pb->requires_grad) {
                pb->ensure_grad();
                for (std::size_t i = 0; i < self.size(); ++i) pb->grad[i] += self.grad[i] * pa->data[i];
            }
        },
        "mul");
    if (a->size() == 1 && !std::isnan(a->hi) && !std::isnan(b->hi)) node->hi = a->hi * b->hi;
    return node;
}

template <class Real>
TensorPtrT<Real> scale(const TensorPtrT<Real>& a, Real c) {
    std::vector<Real> out(a->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] * c;
    TensorT<Real>* pa = a.get();
    auto node = detail::make_node<Real>(
        a->shape, std::move(out), {a},
        [pa, c](TensorT<Real>& self) {
            if (!pa->requires_grad) return;
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) pa->grad[i] += self.grad[i] * c;
        },
        "scale");
    if (a->size() == 1 && !std::isnan(a->hi)) node->hi = a->hi * static_cast<double>(c);
    return node;
}

// Subgradient at 0 is 0.
template <class Real>
TensorPtrT<Real> relu(const TensorPtrT<Real>& a) {
    std::vector<Real> out(a->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] > Real(0) ? a->data[i] : Real(0);
    if (detail::pattern_active()) {
        std::uint64_t bits = 0;
        for (std::size_t i = 0; i < a->size(); ++i) bits = bits * 3 + (a->data[i] > Real(0) ? 1 : 0);
        detail::pattern_feed(bits);
    }
    TensorT<Real>* pa = a.get();
    return detail::make_node<Real>(
        a->shape, std::move(out), {a},
        [pa](TensorT<Real>& self) {
            if (!pa->requires_grad) return;
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i)
                if (pa->data[i] > Real(0)) pa->grad[i] += self.grad[i];
        },
        "relu");
}

template <class Real>
TensorPtrT<Real> sigmoid(const TensorPtrT<Real>& a) {
    std::vector<Real> out(a->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = detail::sigmoid_val(a->data[i]);
    TensorT<Real>* pa = a.get();
    return detail::make_node<Real>(
        a->shape, std::move(out), {a},
        [pa](TensorT<Real>& self) {
            if (!pa->requires_grad) return;
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) {
                Real s = self.data[i];
                pa->grad[i] += self.grad[i] * s * (Real(1) - s);
            }
        },
        "sigmoid");
}

template <class Real>
TensorPtrT<Real> tanh_op(const TensorPtrT<Real>& a) {
    std::vector<Real> out(a->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(a->data[i]);
    TensorT<Real>* pa = a.get();
    return detail::make_node<Real>(
        a->shape, std::move(out), {a},
        [pa](TensorT<Real>& self) {
            if (!pa->requires_grad) return;
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) {
                Real t = self.data[i];
                pa->grad[i] += self.grad[i] * (Real(1) - t * t);
            }
        },
        "tanh");
}

// min(x, cap). Gradient passes only strictly inside the cap, mirroring the
// relu convention at the boundary.
template <class Real>
TensorPtrT<Real> clamp_max(const TensorPtrT<Real>& a, Real cap) {
    std::vector<Real> out(a->size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] < cap ? a->data[i] : cap;
    if (detail::pattern_active()) {
        std::uint64_t bits = 0;
        for (std::size_t i = 0; i < a->size(); ++i) bits = bits * 3 + (a->data[i] < cap ? 1 : 0);
        detail::pattern_feed(bits);
    }
    TensorT<Real>* pa = a.get();
    return detail::make_node<Real>(
        a->shape, std::move(out), {a},
        [pa, cap](TensorT<Real>& self) {
            if (!pa->requires_grad) return;
            pa->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i)
                if (pa->data[i] < cap) pa->grad[i] += self.grad[i];
        },
        "clamp_max");
}

template <class Real>
TensorPtrT<Real> elementwise(EwKind kind, const TensorPtrT<Real>& a, const TensorPtrT<Real>& b = nullptr,
                             Real c = Real(1)) {
    if ((kind == EwKind::add || kind == EwKind::sub || kind == EwKind::mul) && !b)
        throw ContractError("elementwise: binary kind needs two operands");
    switch (kind) {
        case EwKind::add: return add(a, b);
        case EwKind::sub: return sub(a, b);
        case EwKind::mul: return mul(a, b);
        case EwKind::relu: return relu(a);
        case EwKind::sigmoid: return sigmoid(a);
        case EwKind::tanh: return tanh_op(a);
        case EwKind::scale: return scale(a, c);
    }
    throw ContractError("elementwise: unknown kind");
}

// --- structure ops -----------------------------------------------------------

// Concatenate [C,H,W] tensors along the channel axis.
template <class Real>
TensorPtrT<Real> concat_channels(const std::vector<TensorPtrT<Real>>& parts) {
    if (parts.empty()) throw ContractError("concat_channels: no inputs");
    if (parts[0]->shape.size() != 3) throw DimensionError("concat_channels: expects [C,H,W] tensors");
    int h = parts[0]->shape[1], w = parts[0]->shape[2];
    int c_total = 0;
    for (const auto& p : parts) {
        if (p->shape.size() != 3 || p->shape[1] != h || p->shape[2] != w)
            throw DimensionError("concat_channels: spatial extents differ");
        c_total += p->shape[0];
    }
    std::vector<Real> out;
    out.reserve(static_cast<std::size_t>(c_total) * h * w);
    for (const auto& p : parts) out.insert(out.end(), p->data.begin(), p->data.end());
    std::vector<TensorT<Real>*> raw;
    for (const auto& p : parts) raw.push_back(p.get());
    return detail::make_node<Real>(
        Shape{c_total, h, w}, std::move(out), parts,
        [raw](TensorT<Real>& self) {
            std::size_t off = 0;
            for (TensorT<Real>* p : raw) {
                if (p->requires_grad) {
                    p->ensure_grad();
                    for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += self.grad[off + i];
                }
                off += p->size();
            }
        },
        "concat_channels");
}

// Channel slice [c0,c1) of a [C,H,W] tensor.
template <class Real>
TensorPtrT<Real> slice_channels(const TensorPtrT<Real>& a, int c0, int c1) {
    if (a->shape.size() != 3) throw DimensionError("slice_channels: expects [C,H,W]");
    int c = a->shape[0], h = a->shape[1], w = a->shape[2];
    if (c0 < 0 || c1 > c || c0 >= c1) throw ContractError("slice_channels: bad range");
    std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<Real> out(a->data.begin() + c0 * plane, a->data.begin() + c1 * plane);
    TensorT<Real>* pa = a.get();
    return detail::make_node<Real>(
        Shape{c1 - c0, h, w}, std::move(out), {a},
        [pa, c0, plane](TensorT<Real>& self) {
            if (!pa->requires_grad) return;
            pa->ensure_grad();
            std::size_t off = static_cast<std::size_t>(c0) * plane;
            for (std::size_t i = 0; i < self.size(); ++i) pa->grad[off + i] += self.grad[i];
        },
        "slice_channels");
}

// --- reductions (double accumulation) ---------------------------------------

template <class Real>
TensorPtrT<Real> sum_all(const TensorPtrT<Real>& a) {
    double acc = 0.0;
    for (Real v : a->data) acc += static_cast<double>(v);
    TensorT<Real>* pa = a.get();
    auto node = detail::make_node<Real>(
        Shape{1}, {static_cast<Real>(acc)}, {a},
        [pa](TensorT<Real>& self) {
            if (!pa->requires_grad) return;
            pa->ensure_grad();
            Real g = self.grad[0];
            for (std::size_t i = 0; i < pa->size(); ++i) pa->grad[i] += g;
        },
        "sum_all");
    node->hi = acc;
    return node;
}

template <class Real>
TensorPtrT<Real> mean_all(const TensorPtrT<Real>& a) {
    if (a->size() == 0) throw ContractError("mean_all: empty tensor");
    double acc = 0.0;
    for (Real v : a->data) acc += static_cast<double>(v);
    double m = acc / static_cast<double>(a->size());
    TensorT<Real>* pa = a.get();
    auto node = detail::make_node<Real>(
        Shape{1}, {static_cast<Real>(m)}, {a},
        [pa](TensorT<Real>& self) {
            if (!pa->requires_grad) return;
            pa->ensure_grad();
            Real g = self.grad[0] / static_cast<Real>(pa->size());
            for (std::size_t i = 0; i < pa->size(); ++i) pa->grad[i] += g;
        },
        "mean_all");
    node->hi = m;
    return node;
}

// --- tape and backward --------------------------------------------------------

// Topologically ordered record of the operations reachable from a root.
// Creation order is not stored globally; the order is reconstructed from the
// graph edges, so it is identical for identical graphs.
template <class Real>
struct TapeT {
    std::vector<TensorT<Real>*> nodes;  // topological order, root last
};

template <class Real>
TapeT<Real> build_tape(const TensorPtrT<Real>& root) {
    TapeT<Real> tape;
    std::unordered_set<TensorT<Real>*> seen;
    // iterative post-order DFS over parents
    std::vector<std::pair<TensorT<Real>*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    seen.insert(root.get());
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            TensorT<Real>* p = node->parents[idx].get();
            ++idx;
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            tape.nodes.push_back(node);
            stack.pop_back();
        }
    }
    return tape;
}

// Populates grads of every requires_grad tensor reachable from `loss`.
// Leaf gradients accumulate (callers zero them between steps); interior
// gradients are scratch and reset here so repeated calls are reproducible.
template <class Real>
void backward(const TensorPtrT<Real>& loss) {
    if (loss->size() != 1) throw ContractError("backward: loss must be scalar, got shape " + shape_str(loss->shape));
    if (!loss->requires_grad)
        throw ContractError("backward: loss does not require grad (no differentiable path)");
    TapeT<Real> tape = build_tape(loss);
    for (TensorT<Real>* n : tape.nodes) {
        if (!n->is_leaf()) n->zero_grad();
        n->ensure_grad();
    }
    loss->grad[0] = Real(1);
    for (auto it = tape.nodes.rbegin(); it != tape.nodes.rend(); ++it) {
        TensorT<Real>* n = *it;
        if (n->backward_fn) n->backward_fn(*n);
    }
}

// --- gradient checking ---------------------------------------------------------

template <class Real>
using ScalarFn = std::function<TensorPtrT<Real>(const std::vector<TensorPtrT<Real>>&)>;

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // coordinates where the probe crossed a kink
};

namespace detail {

template <class Real>
double eval_scalar(const ScalarFn<Real>& f, const std::vector<TensorPtrT<Real>>& inputs, std::uint64_t* pattern) {
    PatternTracker& t = pattern_tracker();
    bool was = t.active;
    t.active = (pattern != nullptr);
    t.hash = 0xcbf29ce484222325ull;
    TensorPtrT<Real> out;
    {
        NoGradGuard ng;
        out = f(inputs);
    }
    if (pattern) *pattern = t.hash;
    t.active = was;
    if (out->size() != 1) throw ContractError("grad_check: f must return a scalar");
    return out->scalar();
}

template <class Real>
GradCheckReport grad_check_impl(const ScalarFn<Real>& f, const std::vector<TensorPtrT<Real>>& inputs, Real eps,
                                bool mask_kink_crossings) {
    if (!(eps > Real(0))) throw ContractError("grad_check: eps must be positive");
    // analytic gradients
    for (const auto& in : inputs) in->zero_grad();
    TensorPtrT<Real> out = f(inputs);
    if (out->size() != 1) throw ContractError("grad_check: f must return a scalar");
    std::vector<std::vector<Real>> analytic;
    if (out->requires_grad) {
        backward(out);
        for (const auto& in : inputs) analytic.push_back(in->grad);
    } else {
        // constant function: all-zero gradient
        for (const auto& in : inputs) analytic.emplace_back(in->size(), Real(0));
    }

    GradCheckReport rep;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        auto& x = inputs[k]->data;
        for (std::size_t i = 0; i < x.size(); ++i) {
            Real saved = x[i];
            x[i] = saved + eps;
            Real xp = x[i];
            std::uint64_t pat_p = 0;
            double fp = eval_scalar(f, inputs, mask_kink_crossings ? &pat_p : nullptr);
            x[i] = saved - eps;
            Real xm = x[i];
            std::uint64_t pat_m = 0;
            double fm = eval_scalar(f, inputs, mask_kink_crossings ? &pat_m : nullptr);
            x[i] = saved;
            if (mask_kink_crossings && pat_p != pat_m) {
                ++rep.skipped;
                continue;
            }
            double h = static_cast<double>(xp) - static_cast<double>(xm);  // achieved step
            double numeric = (fp - fm) / h;
            double a = static_cast<double>(analytic[k][i]);
            double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
            rep.max_rel_err = std::max(rep.max_rel_err, err);
            ++rep.checked;
        }
    }
    return rep;
}

}  // namespace detail

// Max over all input coordinates of the relative disagreement between the
// analytic gradient and a central finite difference.
template <class Real>
double grad_check(const ScalarFn<Real>& f, const std::vector<TensorPtrT<Real>>& inputs, Real eps) {
    return detail::grad_check_impl(f, inputs, eps, /*mask_kink_crossings=*/false).max_rel_err;
}

// Variant for functions with kinks (relu / clamp / maxpool): coordinates whose
// probe evaluations disagree on any branch decision are excluded, since the
// central difference spans a non-differentiable point there. The report says
// how many coordinates were skipped so callers can bound the loss of coverage.
template <class Real>
GradCheckReport grad_check_masked(const ScalarFn<Real>& f, const std::vector<TensorPtrT<Real>>& inputs, Real eps) {
    return detail::grad_check_impl(f, inputs, eps, /*mask_kink_crossings=*/true);
}

using Tensor = TensorT<float>;
using TensorPtr = TensorPtrT<float>;
using Tape = TapeT<float>;

}  // namespace prednet
