#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "nt/kernels.hpp"
#include "nt/rng.hpp"

namespace nt {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
    int64_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ']';
    return os.str();
}

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

inline void check(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

// One recorded value in the backward graph. Nodes are linked by shared
// ownership from child to parents; backward() walks them in reverse
// creation order.
template <typename T>
struct TapeNode {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad;  // allocated on first use, accumulates across backward calls
    bool needs_grad = false;
    uint64_t seq = 0;
    std::vector<std::shared_ptr<TapeNode<T>>> parents;
    std::function<void()> backprop;

    void ensure_grad() {
        if (grad.empty()) grad.assign(value.size(), T(0));
    }
};

inline uint64_t next_tape_seq() {
    static std::atomic<uint64_t> counter{0};
    return ++counter;
}

template <typename T>
class TensorT {
public:
    TensorT() = default;

    static TensorT zeros(Shape shape) {
        return from_vector(std::move(shape), {}, false);
    }

    static TensorT full(Shape shape, T fill) {
        TensorT t = zeros(std::move(shape));
        std::fill(t.node_->value.begin(), t.node_->value.end(), fill);
        return t;
    }

    static TensorT from_vector(Shape shape, std::vector<T> data, bool needs_grad = false) {
        auto n = std::make_shared<TapeNode<T>>();
        n->shape = std::move(shape);
        int64_t count = shape_numel(n->shape);
        if (data.empty()) data.assign(count, T(0));
        check((int64_t)data.size() == count,
              "tensor data length " + std::to_string(data.size()) + " does not match shape " +
                  shape_str(n->shape));
        n->value = std::move(data);
        n->needs_grad = needs_grad;
        n->seq = next_tape_seq();
        TensorT t;
        t.node_ = std::move(n);
        return t;
    }

    static TensorT param(Shape shape, std::vector<T> data) {
        return from_vector(std::move(shape), std::move(data), true);
    }

    static TensorT gaussian(Shape shape, RngStream& rng, T scale = T(1)) {
        TensorT t = zeros(std::move(shape));
        for (auto& v : t.node_->value) v = T(rng.next_gaussian()) * scale;
        return t;
    }

    // Uniform in [-bound, bound]; the init used by every trainable matrix.
    static TensorT uniform_signed(Shape shape, RngStream& rng, T bound, bool needs_grad = true) {
        TensorT t = zeros(std::move(shape));
        for (auto& v : t.node_->value) v = T((rng.next_uniform() * 2.0 - 1.0)) * bound;
        t.node_->needs_grad = needs_grad;
        return t;
    }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int rank() const { return (int)node_->shape.size(); }
    int64_t dim(int i) const { return node_->shape[i]; }
    int64_t numel() const { return (int64_t)node_->value.size(); }
    int64_t width() const { return node_->shape.empty() ? 1 : node_->shape.back(); }
    int64_t rows() const { return numel() / std::max<int64_t>(1, width()); }

    std::vector<T>& value() { return node_->value; }
    const std::vector<T>& value() const { return node_->value; }
    T item() const {
        check(numel() == 1, "item() on non-scalar tensor " + shape_str(shape()));
        return node_->value[0];
    }

    bool needs_grad() const { return node_->needs_grad; }
    void set_needs_grad(bool b) { node_->needs_grad = b; }
    bool has_grad() const { return !node_->grad.empty(); }
    const std::vector<T>& grad() const { return node_->grad; }
    std::vector<T>& grad_mut() {
        node_->ensure_grad();
        return node_->grad;
    }
    void zero_grad() {
        if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }

    std::shared_ptr<TapeNode<T>> node() const { return node_; }

private:
    std::shared_ptr<TapeNode<T>> node_;
};

namespace detail {

template <typename T>
TensorT<T> make_result(Shape shape, std::vector<T> value,
                       std::vector<TensorT<T>> parents) {
    auto out = TensorT<T>::from_vector(std::move(shape), std::move(value), false);
    auto n = out.node();
    bool needs = false;
    for (auto& p : parents) {
        needs = needs || p.needs_grad();
        n->parents.push_back(p.node());
    }
    n->needs_grad = needs;
    return out;
}

template <typename T>
void set_backprop(TensorT<T>& out, std::function<void()> fn) {
    if (out.needs_grad()) out.node()->backprop = std::move(fn);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise and broadcast arithmetic

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    check(a.shape() == b.shape(),
          "add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<T> v(a.numel());
    const auto &av = a.value(), &bv = b.value();
    kernels::par_for(a.numel(), 8192, [&](int64_t i) { v[i] = av[i] + bv[i]; });
    auto out = detail::make_result<T>(a.shape(), std::move(v), {a, b});
    auto* on = out.node().get();
    auto an = a.node(), bn = b.node();
    detail::set_backprop(out, [on, an, bn] {
        if (an->needs_grad) {
            an->ensure_grad();
            for (size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i];
        }
        if (bn->needs_grad) {
            bn->ensure_grad();
            for (size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += on->grad[i];
        }
    });
    return out;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T c) {
    std::vector<T> v(a.numel());
    const auto& av = a.value();
    kernels::par_for(a.numel(), 8192, [&](int64_t i) { v[i] = av[i] * c; });
    auto out = detail::make_result<T>(a.shape(), std::move(v), {a});
    auto* on = out.node().get();
    auto an = a.node();
    detail::set_backprop(out, [on, an, c] {
        an->ensure_grad();
        for (size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] * c;
    });
    return out;
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
    return add(a, scale(b, T(-1)));
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    check(a.shape() == b.shape(),
          "mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    std::vector<T> v(a.numel());
    const auto &av = a.value(), &bv = b.value();
    kernels::par_for(a.numel(), 8192, [&](int64_t i) { v[i] = av[i] * bv[i]; });
    auto out = detail::make_result<T>(a.shape(), std::move(v), {a, b});
    auto* on = out.node().get();
    auto an = a.node(), bn = b.node();
    detail::set_backprop(out, [on, an, bn] {
        if (an->needs_grad) {
            an->ensure_grad();
            for (size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += on->grad[i] * bn->value[i];
        }
        if (bn->needs_grad) {
            bn->ensure_grad();
            for (size_t i = 0; i < on->grad.size(); ++i) bn->grad[i] += on->grad[i] * an->value[i];
        }
    });
    return out;
}

// x (rows x h) + coeff * s (rows x 1), s broadcast across the last axis.
template <typename T>
TensorT<T> add_rowscalar(const TensorT<T>& x, const TensorT<T>& s, T coeff = T(1)) {
    check(s.width() == 1 && s.rows() == x.rows(),
          "add_rowscalar: scalar column " + shape_str(s.shape()) + " does not match " +
              shape_str(x.shape()));
    int64_t h = x.width(), r = x.rows();
    std::vector<T> v(x.numel());
    const auto &xv = x.value(), &sv = s.value();
    kernels::par_for(r, 1024, [&](int64_t i) {
        for (int64_t j = 0; j < h; ++j) v[i * h + j] = xv[i * h + j] + coeff * sv[i];
    });
    auto out = detail::make_result<T>(x.shape(), std::move(v), {x, s});
    auto* on = out.node().get();
    auto xn = x.node(), sn = s.node();
    detail::set_backprop(out, [on, xn, sn, coeff, r, h] {
        if (xn->needs_grad) {
            xn->ensure_grad();
            for (size_t i = 0; i < on->grad.size(); ++i) xn->grad[i] += on->grad[i];
        }
        if (sn->needs_grad) {
            sn->ensure_grad();
            for (int64_t i = 0; i < r; ++i) {
                T acc = T(0);
                for (int64_t j = 0; j < h; ++j) acc += on->grad[i * h + j];
                sn->grad[i] += coeff * acc;
            }
        }
    });
    return out;
}

template <typename T>
TensorT<T> mul_rowscalar(const TensorT<T>& x, const TensorT<T>& s) {
    check(s.width() == 1 && s.rows() == x.rows(),
          "mul_rowscalar: scalar column " + shape_str(s.shape()) + " does not match " +
              shape_str(x.shape()));
    int64_t h = x.width(), r = x.rows();
    std::vector<T> v(x.numel());
    const auto &xv = x.value(), &sv = s.value();
    kernels::par_for(r, 1024, [&](int64_t i) {
        for (int64_t j = 0; j < h; ++j) v[i * h + j] = xv[i * h + j] * sv[i];
    });
    auto out = detail::make_result<T>(x.shape(), std::move(v), {x, s});
    auto* on = out.node().get();
    auto xn = x.node(), sn = s.node();
    detail::set_backprop(out, [on, xn, sn, r, h] {
        if (xn->needs_grad) {
            xn->ensure_grad();
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < h; ++j) xn->grad[i * h + j] += on->grad[i * h + j] * sn->value[i];
        }
        if (sn->needs_grad) {
            sn->ensure_grad();
            for (int64_t i = 0; i < r; ++i) {
                T acc = T(0);
                for (int64_t j = 0; j < h; ++j) acc += on->grad[i * h + j] * xn->value[i * h + j];
                sn->grad[i] += acc;
            }
        }
    });
    return out;
}

// x / max(s, floor) rowwise. Rows whose denominator was clamped are counted
// through `degenerate` and get zero gradient w.r.t. the denominator.
template <typename T>
TensorT<T> div_rowscalar_clamped(const TensorT<T>& x, const TensorT<T>& s, T floor,
                                 int64_t* degenerate = nullptr) {
    check(s.width() == 1 && s.rows() == x.rows(),
          "div_rowscalar: scalar column " + shape_str(s.shape()) + " does not match " +
              shape_str(x.shape()));
    int64_t h = x.width(), r = x.rows();
    std::vector<T> v(x.numel());
    auto clamped = std::make_shared<std::vector<uint8_t>>(r, 0);
    auto denom = std::make_shared<std::vector<T>>(r);
    const auto &xv = x.value(), &sv = s.value();
    int64_t clamp_count = 0;
    for (int64_t i = 0; i < r; ++i) {
        T d = sv[i];
        if (d < floor) {
            d = floor;
            (*clamped)[i] = 1;
            ++clamp_count;
        }
        (*denom)[i] = d;
    }
    if (degenerate) *degenerate += clamp_count;
    kernels::par_for(r, 1024, [&](int64_t i) {
        for (int64_t j = 0; j < h; ++j) v[i * h + j] = xv[i * h + j] / (*denom)[i];
    });
    auto out = detail::make_result<T>(x.shape(), std::move(v), {x, s});
    auto* on = out.node().get();
    auto xn = x.node(), sn = s.node();
    detail::set_backprop(out, [on, xn, sn, denom, clamped, r, h] {
        if (xn->needs_grad) {
            xn->ensure_grad();
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < h; ++j) xn->grad[i * h + j] += on->grad[i * h + j] / (*denom)[i];
        }
        if (sn->needs_grad) {
            sn->ensure_grad();
            for (int64_t i = 0; i < r; ++i) {
                if ((*clamped)[i]) continue;
                T acc = T(0);
                for (int64_t j = 0; j < h; ++j) acc += on->grad[i * h + j] * on->value[i * h + j];
                sn->grad[i] -= acc / (*denom)[i];
            }
        }
    });
    return out;
}

// Zero out whole rows; mask has one entry per row (true = keep).
template <typename T>
TensorT<T> mul_rowmask(const TensorT<T>& x, std::vector<uint8_t> rowmask) {
    check((int64_t)rowmask.size() == x.rows(),
          "mul_rowmask: mask length " + std::to_string(rowmask.size()) + " vs rows " +
              std::to_string(x.rows()));
    int64_t h = x.width(), r = x.rows();
    std::vector<T> v(x.numel());
    auto mask = std::make_shared<std::vector<uint8_t>>(std::move(rowmask));
    const auto& xv = x.value();
    kernels::par_for(r, 1024, [&](int64_t i) {
        for (int64_t j = 0; j < h; ++j) v[i * h + j] = (*mask)[i] ? xv[i * h + j] : T(0);
    });
    auto out = detail::make_result<T>(x.shape(), std::move(v), {x});
    auto* on = out.node().get();
    auto xn = x.node();
    detail::set_backprop(out, [on, xn, mask, r, h] {
        xn->ensure_grad();
        for (int64_t i = 0; i < r; ++i) {
            if (!(*mask)[i]) continue;
            for (int64_t j = 0; j < h; ++j) xn->grad[i * h + j] += on->grad[i * h + j];
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// unary maps

namespace detail {

template <typename T, typename FwdF, typename GradF>
TensorT<T> unary_map(const TensorT<T>& x, FwdF fwd, GradF grad_from_input) {
    std::vector<T> v(x.numel());
    const auto& xv = x.value();
    kernels::par_for(x.numel(), 4096, [&](int64_t i) { v[i] = fwd(xv[i]); });
    auto out = make_result<T>(x.shape(), std::move(v), {x});
    auto* on = out.node().get();
    auto xn = x.node();
    set_backprop(out, [on, xn, grad_from_input] {
        xn->ensure_grad();
        for (size_t i = 0; i < on->grad.size(); ++i)
            xn->grad[i] += on->grad[i] * grad_from_input(xn->value[i], on->value[i]);
    });
    return out;
}

}  // namespace detail

template <typename T>
TensorT<T> exp_op(const TensorT<T>& x) {
    return detail::unary_map(
        x, [](T v) { return T(std::exp(double(v))); }, [](T, T y) { return y; });
}

// exp with the argument clamped to [lo, hi]; gradient is zero where clamped.
template <typename T>
TensorT<T> exp_clamped(const TensorT<T>& x, T lo = T(-60), T hi = T(60)) {
    return detail::unary_map(
        x,
        [lo, hi](T v) { return T(std::exp(double(std::min(std::max(v, lo), hi)))); },
        [lo, hi](T v, T y) { return (v > lo && v < hi) ? y : T(0); });
}

template <typename T>
TensorT<T> sigmoid(const TensorT<T>& x) {
    return detail::unary_map(
        x, [](T v) { return kernels::sigmoid_val(v); }, [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
TensorT<T> gelu(const TensorT<T>& x) {
    return detail::unary_map(
        x, [](T v) { return kernels::gelu_val(v); },
        [](T v, T) { return kernels::gelu_grad(v); });
}

// ---------------------------------------------------------------------------
// matmul / transpose

template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
    int ra = a.rank(), rb = b.rank();
    check((ra == 2 && rb == 2) || (ra == 3 && (rb == 2 || rb == 3)),
          "matmul: unsupported ranks " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    int64_t batch = ra == 3 ? a.dim(0) : 1;
    int64_t m = a.dim(ra - 2), k = a.dim(ra - 1);
    int64_t kb = b.dim(rb - 2), n = b.dim(rb - 1);
    check(k == kb, "matmul: inner dims differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    if (rb == 3)
        check(b.dim(0) == batch, "matmul: batch dims differ " + shape_str(a.shape()) + " x " +
                                     shape_str(b.shape()));
    Shape oshape = ra == 3 ? Shape{batch, m, n} : Shape{m, n};
    std::vector<T> v(batch * m * n);
    const auto &av = a.value(), &bv = b.value();
    bool shared_b = (rb == 2);
    for (int64_t g = 0; g < batch; ++g)
        kernels::gemm_nn(av.data() + g * m * k, bv.data() + (shared_b ? 0 : g * k * n),
                         v.data() + g * m * n, m, k, n, false);
    auto out = detail::make_result<T>(oshape, std::move(v), {a, b});
    auto* on = out.node().get();
    auto an = a.node(), bn = b.node();
    detail::set_backprop(out, [on, an, bn, batch, m, k, n, shared_b] {
        if (an->needs_grad) {
            an->ensure_grad();
            for (int64_t g = 0; g < batch; ++g)
                kernels::gemm_nt(on->grad.data() + g * m * n,
                                 bn->value.data() + (shared_b ? 0 : g * k * n),
                                 an->grad.data() + g * m * k, m, n, k, true);
        }
        if (bn->needs_grad) {
            bn->ensure_grad();
            for (int64_t g = 0; g < batch; ++g)
                kernels::gemm_tn(an->value.data() + g * m * k, on->grad.data() + g * m * n,
                                 bn->grad.data() + (shared_b ? 0 : g * k * n), m, k, n, true);
        }
    });
    return out;
}

template <typename T>
TensorT<T> transpose_last(const TensorT<T>& a) {
    int r = a.rank();
    check(r == 2 || r == 3, "transpose: rank must be 2 or 3, got " + shape_str(a.shape()));
    int64_t batch = r == 3 ? a.dim(0) : 1;
    int64_t m = a.dim(r - 2), n = a.dim(r - 1);
    Shape oshape = r == 3 ? Shape{batch, n, m} : Shape{n, m};
    std::vector<T> v(a.numel());
    const auto& av = a.value();
    for (int64_t g = 0; g < batch; ++g)
        kernels::transpose(av.data() + g * m * n, v.data() + g * m * n, m, n);
    auto out = detail::make_result<T>(oshape, std::move(v), {a});
    auto* on = out.node().get();
    auto an = a.node();
    detail::set_backprop(out, [on, an, batch, m, n] {
        an->ensure_grad();
        for (int64_t g = 0; g < batch; ++g) {
            const T* gsrc = on->grad.data() + g * m * n;  // n x m layout
            T* gdst = an->grad.data() + g * m * n;
            for (int64_t j = 0; j < n; ++j)
                for (int64_t i = 0; i < m; ++i) gdst[i * n + j] += gsrc[j * m + i];
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// concat / slice

template <typename T>
TensorT<T> concat_last(const TensorT<T>& a, const TensorT<T>& b) {
    check(a.rank() == b.rank() && a.rows() == b.rows(),
          "concat_last: incompatible " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    for (int i = 0; i + 1 < a.rank(); ++i)
        check(a.dim(i) == b.dim(i), "concat_last: leading dims differ");
    int64_t r = a.rows(), wa = a.width(), wb = b.width();
    Shape oshape = a.shape();
    oshape.back() = wa + wb;
    std::vector<T> v(r * (wa + wb));
    const auto &av = a.value(), &bv = b.value();
    kernels::par_for(r, 1024, [&](int64_t i) {
        std::copy(av.begin() + i * wa, av.begin() + (i + 1) * wa, v.begin() + i * (wa + wb));
        std::copy(bv.begin() + i * wb, bv.begin() + (i + 1) * wb, v.begin() + i * (wa + wb) + wa);
    });
    auto out = detail::make_result<T>(oshape, std::move(v), {a, b});
    auto* on = out.node().get();
    auto an = a.node(), bn = b.node();
    detail::set_backprop(out, [on, an, bn, r, wa, wb] {
        int64_t w = wa + wb;
        if (an->needs_grad) {
            an->ensure_grad();
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < wa; ++j) an->grad[i * wa + j] += on->grad[i * w + j];
        }
        if (bn->needs_grad) {
            bn->ensure_grad();
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < wb; ++j) bn->grad[i * wb + j] += on->grad[i * w + wa + j];
        }
    });
    return out;
}

template <typename T>
TensorT<T> slice_last(const TensorT<T>& a, int64_t begin, int64_t end) {
    int64_t w = a.width();
    check(0 <= begin && begin < end && end <= w, "slice_last: bad range");
    int64_t r = a.rows(), ow = end - begin;
    Shape oshape = a.shape();
    oshape.back() = ow;
    std::vector<T> v(r * ow);
    const auto& av = a.value();
    kernels::par_for(r, 2048, [&](int64_t i) {
        std::copy(av.begin() + i * w + begin, av.begin() + i * w + end, v.begin() + i * ow);
    });
    auto out = detail::make_result<T>(oshape, std::move(v), {a});
    auto* on = out.node().get();
    auto an = a.node();
    detail::set_backprop(out, [on, an, r, w, ow, begin] {
        an->ensure_grad();
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < ow; ++j) an->grad[i * w + begin + j] += on->grad[i * ow + j];
    });
    return out;
}

template <typename T>
TensorT<T> concat_rows(const std::vector<TensorT<T>>& parts) {
    check(!parts.empty(), "concat_rows: empty input list");
    int64_t w = parts[0].width();
    int64_t total = 0;
    for (auto& p : parts) {
        check(p.rank() == 2 && p.width() == w, "concat_rows: all parts must be 2-d with equal width");
        total += p.dim(0);
    }
    std::vector<T> v(total * w);
    int64_t off = 0;
    for (auto& p : parts) {
        std::copy(p.value().begin(), p.value().end(), v.begin() + off);
        off += p.numel();
    }
    auto out = detail::make_result<T>({total, w}, std::move(v), parts);
    auto* on = out.node().get();
    std::vector<std::shared_ptr<TapeNode<T>>> pnodes;
    for (auto& p : parts) pnodes.push_back(p.node());
    detail::set_backprop(out, [on, pnodes] {
        int64_t off = 0;
        for (auto& pn : pnodes) {
            if (pn->needs_grad) {
                pn->ensure_grad();
                for (size_t i = 0; i < pn->value.size(); ++i) pn->grad[i] += on->grad[off + i];
            }
            off += (int64_t)pn->value.size();
        }
    });
    return out;
}

template <typename T>
TensorT<T> slice_rows(const TensorT<T>& a, int64_t begin, int64_t end) {
    check(a.rank() == 2, "slice_rows: rank-2 only");
    check(0 <= begin && begin <= end && end <= a.dim(0), "slice_rows: bad range");
    int64_t w = a.width(), r = end - begin;
    std::vector<T> v(a.value().begin() + begin * w, a.value().begin() + end * w);
    auto out = detail::make_result<T>({r, w}, std::move(v), {a});
    auto* on = out.node().get();
    auto an = a.node();
    detail::set_backprop(out, [on, an, begin, w] {
        an->ensure_grad();
        for (size_t i = 0; i < on->grad.size(); ++i) an->grad[begin * w + i] += on->grad[i];
    });
    return out;
}

// ---------------------------------------------------------------------------
// gather / pad

template <typename T>
TensorT<T> gather_rows(const TensorT<T>& x, std::vector<int64_t> idx) {
    check(x.rank() == 2, "gather_rows: rank-2 only");
    int64_t w = x.width(), n = x.dim(0);
    for (auto i : idx)
        check(0 <= i && i < n, "gather_rows: index " + std::to_string(i) + " out of range [0," +
                                   std::to_string(n) + ")");
    auto ids = std::make_shared<std::vector<int64_t>>(std::move(idx));
    int64_t m = (int64_t)ids->size();
    std::vector<T> v(m * w);
    const auto& xv = x.value();
    kernels::par_for(m, 2048, [&](int64_t r) {
        std::copy(xv.begin() + (*ids)[r] * w, xv.begin() + ((*ids)[r] + 1) * w, v.begin() + r * w);
    });
    auto out = detail::make_result<T>({m, w}, std::move(v), {x});
    auto* on = out.node().get();
    auto xn = x.node();
    detail::set_backprop(out, [on, xn, ids, w] {
        xn->ensure_grad();
        // scatter-add kept serial: ascending r gives a fixed accumulation order
        for (size_t r = 0; r < ids->size(); ++r) {
            int64_t dst = (*ids)[r] * w;
            for (int64_t j = 0; j < w; ++j) xn->grad[dst + j] += on->grad[r * w + j];
        }
    });
    return out;
}

// Stack consecutive row-runs of x (run g has sizes[g] rows) into a padded
// (G x D x w) tensor, left-aligned, zero padded.
template <typename T>
TensorT<T> pad_segments(const TensorT<T>& x, const std::vector<int64_t>& sizes, int64_t D) {
    check(x.rank() == 2, "pad_segments: rank-2 only");
    int64_t w = x.width(), G = (int64_t)sizes.size(), total = 0;
    for (auto s : sizes) {
        check(s >= 0 && s <= D, "pad_segments: segment size exceeds padded width");
        total += s;
    }
    check(total == x.dim(0), "pad_segments: sizes sum " + std::to_string(total) +
                                 " != rows " + std::to_string(x.dim(0)));
    std::vector<int64_t> offs(G + 1, 0);
    for (int64_t g = 0; g < G; ++g) offs[g + 1] = offs[g] + sizes[g];
    auto offsets = std::make_shared<std::vector<int64_t>>(std::move(offs));
    std::vector<T> v(G * D * w, T(0));
    const auto& xv = x.value();
    kernels::par_for(G, 64, [&](int64_t g) {
        int64_t cnt = (*offsets)[g + 1] - (*offsets)[g];
        std::copy(xv.begin() + (*offsets)[g] * w, xv.begin() + ((*offsets)[g] + cnt) * w,
                  v.begin() + g * D * w);
    });
    auto out = detail::make_result<T>({G, D, w}, std::move(v), {x});
    auto* on = out.node().get();
    auto xn = x.node();
    detail::set_backprop(out, [on, xn, offsets, D, w, G] {
        xn->ensure_grad();
        for (int64_t g = 0; g < G; ++g) {
            int64_t cnt = (*offsets)[g + 1] - (*offsets)[g];
            for (int64_t i = 0; i < cnt; ++i)
                for (int64_t j = 0; j < w; ++j)
                    xn->grad[((*offsets)[g] + i) * w + j] += on->grad[(g * D + i) * w + j];
        }
    });
    return out;
}

template <typename T>
TensorT<T> unpack_segments(const TensorT<T>& xp, const std::vector<int64_t>& sizes) {
    check(xp.rank() == 3, "unpack_segments: rank-3 only");
    int64_t G = xp.dim(0), D = xp.dim(1), w = xp.dim(2);
    check((int64_t)sizes.size() == G, "unpack_segments: group count mismatch");
    std::vector<int64_t> offs(G + 1, 0);
    for (int64_t g = 0; g < G; ++g) {
        check(sizes[g] <= D, "unpack_segments: size exceeds padded width");
        offs[g + 1] = offs[g] + sizes[g];
    }
    auto offsets = std::make_shared<std::vector<int64_t>>(std::move(offs));
    int64_t total = offsets->back();
    std::vector<T> v(total * w);
    const auto& xv = xp.value();
    kernels::par_for(G, 64, [&](int64_t g) {
        int64_t cnt = (*offsets)[g + 1] - (*offsets)[g];
        std::copy(xv.begin() + g * D * w, xv.begin() + g * D * w + cnt * w,
                  v.begin() + (*offsets)[g] * w);
    });
    auto out = detail::make_result<T>({total, w}, std::move(v), {xp});
    auto* on = out.node().get();
    auto xn = xp.node();
    detail::set_backprop(out, [on, xn, offsets, D, w, G] {
        xn->ensure_grad();
        for (int64_t g = 0; g < G; ++g) {
            int64_t cnt = (*offsets)[g + 1] - (*offsets)[g];
            for (int64_t i = 0; i < cnt; ++i)
                for (int64_t j = 0; j < w; ++j)
                    xn->grad[(g * D + i) * w + j] += on->grad[((*offsets)[g] + i) * w + j];
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// row reductions

template <typename T>
TensorT<T> row_sum(const TensorT<T>& x) {
    int64_t r = x.rows(), w = x.width();
    Shape oshape = x.shape();
    oshape.back() = 1;
    std::vector<T> v(r);
    const auto& xv = x.value();
    kernels::par_for(r, 1024, [&](int64_t i) {
        T acc = T(0);
        for (int64_t j = 0; j < w; ++j) acc += xv[i * w + j];
        v[i] = acc;
    });
    auto out = detail::make_result<T>(oshape, std::move(v), {x});
    auto* on = out.node().get();
    auto xn = x.node();
    detail::set_backprop(out, [on, xn, r, w] {
        xn->ensure_grad();
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < w; ++j) xn->grad[i * w + j] += on->grad[i];
    });
    return out;
}

// Squared L2 norm of each row (last axis).
template <typename T>
TensorT<T> row_norm2(const TensorT<T>& x) {
    int64_t r = x.rows(), w = x.width();
    Shape oshape = x.shape();
    oshape.back() = 1;
    std::vector<T> v(r);
    const auto& xv = x.value();
    kernels::par_for(r, 1024, [&](int64_t i) {
        T acc = T(0);
        for (int64_t j = 0; j < w; ++j) acc += xv[i * w + j] * xv[i * w + j];
        v[i] = acc;
    });
    auto out = detail::make_result<T>(oshape, std::move(v), {x});
    auto* on = out.node().get();
    auto xn = x.node();
    detail::set_backprop(out, [on, xn, r, w] {
        xn->ensure_grad();
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < w; ++j) xn->grad[i * w + j] += T(2) * xn->value[i * w + j] * on->grad[i];
    });
    return out;
}

template <typename T>
TensorT<T> reduce_sum(const TensorT<T>& x) {
    T acc = T(0);
    for (auto v : x.value()) acc += v;
    auto out = detail::make_result<T>({1}, {acc}, {x});
    auto* on = out.node().get();
    auto xn = x.node();
    detail::set_backprop(out, [on, xn] {
        xn->ensure_grad();
        for (auto& g : xn->grad) g += on->grad[0];
    });
    return out;
}

template <typename T>
TensorT<T> reduce_mean(const TensorT<T>& x) {
    return scale(reduce_sum(x), T(1) / T(x.numel()));
}

// ---------------------------------------------------------------------------
// softmax / layer norm

// Softmax over the last axis. The optional mask marks valid key positions:
// size == width        -> one mask shared by every row,
// size == rows*width   -> a full per-element mask,
// size == batch*width  -> rank-3 input, one key mask per batch entry.
// Masked positions are exactly zero; fully masked rows become zero rows.
template <typename T>
TensorT<T> row_softmax(const TensorT<T>& x, std::vector<uint8_t> mask_bits = {}) {
    int64_t r = x.rows(), w = x.width();
    int64_t batch = x.rank() == 3 ? x.dim(0) : 1;
    int64_t per_batch_rows = r / std::max<int64_t>(1, batch);
    enum class MaskKind { none, shared, full, per_batch } kind = MaskKind::none;
    if (!mask_bits.empty()) {
        if ((int64_t)mask_bits.size() == r * w)
            kind = MaskKind::full;
        else if ((int64_t)mask_bits.size() == batch * w && x.rank() == 3)
            kind = MaskKind::per_batch;
        else if ((int64_t)mask_bits.size() == w)
            kind = MaskKind::shared;
        else
            throw ShapeError("row_softmax: mask size " + std::to_string(mask_bits.size()) +
                             " incompatible with " + shape_str(x.shape()));
    }
    auto mask = std::make_shared<std::vector<uint8_t>>(std::move(mask_bits));
    auto mask_row = [mask, kind, w, per_batch_rows](int64_t row) -> const uint8_t* {
        switch (kind) {
            case MaskKind::none: return nullptr;
            case MaskKind::shared: return mask->data();
            case MaskKind::full: return mask->data() + row * w;
            case MaskKind::per_batch: return mask->data() + (row / per_batch_rows) * w;
        }
        return nullptr;
    };
    std::vector<T> v(x.numel());
    const auto& xv = x.value();
    kernels::par_for(r, 64, [&](int64_t i) {
        kernels::softmax_row(xv.data() + i * w, mask_row(i), v.data() + i * w, w);
    });
    auto out = detail::make_result<T>(x.shape(), std::move(v), {x});
    auto* on = out.node().get();
    auto xn = x.node();
    detail::set_backprop(out, [on, xn, r, w] {
        xn->ensure_grad();
        for (int64_t i = 0; i < r; ++i) {
            const T* y = on->value.data() + i * w;
            const T* dy = on->grad.data() + i * w;
            T dot = T(0);
            for (int64_t j = 0; j < w; ++j) dot += y[j] * dy[j];
            for (int64_t j = 0; j < w; ++j) xn->grad[i * w + j] += y[j] * (dy[j] - dot);
        }
    });
    return out;
}

template <typename T>
TensorT<T> layer_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                      T eps = T(1e-5)) {
    int64_t r = x.rows(), w = x.width();
    check(gamma.numel() == w && beta.numel() == w,
          "layer_norm: gamma/beta must have width " + std::to_string(w));
    std::vector<T> v(x.numel());
    auto inv_std = std::make_shared<std::vector<T>>(r);
    auto xhat = std::make_shared<std::vector<T>>(x.numel());
    const auto &xv = x.value(), &gv = gamma.value(), &bv = beta.value();
    kernels::par_for(r, 256, [&](int64_t i) {
        T mean = T(0);
        for (int64_t j = 0; j < w; ++j) mean += xv[i * w + j];
        mean /= T(w);
        T var = T(0);
        for (int64_t j = 0; j < w; ++j) {
            T d = xv[i * w + j] - mean;
            var += d * d;
        }
        var /= T(w);
        T inv = T(1) / T(std::sqrt(double(var + eps)));
        (*inv_std)[i] = inv;
        for (int64_t j = 0; j < w; ++j) {
            T xh = (xv[i * w + j] - mean) * inv;
            (*xhat)[i * w + j] = xh;
            v[i * w + j] = xh * gv[j] + bv[j];
        }
    });
    auto out = detail::make_result<T>(x.shape(), std::move(v), {x, gamma, beta});
    auto* on = out.node().get();
    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    detail::set_backprop(out, [on, xn, gn, bn, inv_std, xhat, r, w] {
        if (gn->needs_grad) gn->ensure_grad();
        if (bn->needs_grad) bn->ensure_grad();
        if (xn->needs_grad) xn->ensure_grad();
        for (int64_t i = 0; i < r; ++i) {
            const T* dy = on->grad.data() + i * w;
            const T* xh = xhat->data() + i * w;
            if (gn->needs_grad || bn->needs_grad) {
                for (int64_t j = 0; j < w; ++j) {
                    if (gn->needs_grad) gn->grad[j] += dy[j] * xh[j];
                    if (bn->needs_grad) bn->grad[j] += dy[j];
                }
            }
            if (xn->needs_grad) {
                T mean_g = T(0), mean_gx = T(0);
                for (int64_t j = 0; j < w; ++j) {
                    T gj = dy[j] * gn->value[j];
                    mean_g += gj;
                    mean_gx += gj * xh[j];
                }
                mean_g /= T(w);
                mean_gx /= T(w);
                for (int64_t j = 0; j < w; ++j) {
                    T gj = dy[j] * gn->value[j];
                    xn->grad[i * w + j] += (*inv_std)[i] * (gj - mean_g - xh[j] * mean_gx);
                }
            }
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// segment operations (index array over rows)

namespace detail {

inline void check_segments(const std::vector<int64_t>& seg, int64_t rows, int64_t num_segments) {
    check((int64_t)seg.size() == rows, "segment op: index array length " +
                                           std::to_string(seg.size()) + " != rows " +
                                           std::to_string(rows));
    for (auto s : seg)
        check(0 <= s && s < num_segments, "segment op: segment id " + std::to_string(s) +
                                              " out of range [0," + std::to_string(num_segments) + ")");
}

}  // namespace detail

// Accumulation runs in ascending row order within each segment, which keeps
// results identical for sorted and unsorted index arrays.
template <typename T>
TensorT<T> segment_sum(const TensorT<T>& x, std::vector<int64_t> seg_ids, int64_t num_segments) {
    check(x.rank() == 2, "segment_sum: rank-2 only");
    int64_t m = x.dim(0), w = x.width();
    detail::check_segments(seg_ids, m, num_segments);
    auto seg = std::make_shared<std::vector<int64_t>>(std::move(seg_ids));
    std::vector<T> v(num_segments * w, T(0));
    const auto& xv = x.value();
    bool sorted = std::is_sorted(seg->begin(), seg->end());
    if (sorted) {
        std::vector<int64_t> starts(num_segments + 1, 0);
        for (auto s : *seg) starts[s + 1]++;
        for (int64_t s = 0; s < num_segments; ++s) starts[s + 1] += starts[s];
        kernels::par_for(num_segments, 64, [&](int64_t s) {
            for (int64_t r = starts[s]; r < starts[s + 1]; ++r)
                for (int64_t j = 0; j < w; ++j) v[s * w + j] += xv[r * w + j];
        });
    } else {
        for (int64_t r = 0; r < m; ++r)
            for (int64_t j = 0; j < w; ++j) v[(*seg)[r] * w + j] += xv[r * w + j];
    }
    auto out = detail::make_result<T>({num_segments, w}, std::move(v), {x});
    auto* on = out.node().get();
    auto xn = x.node();
    detail::set_backprop(out, [on, xn, seg, m, w] {
        xn->ensure_grad();
        kernels::par_for(m, 2048, [&](int64_t r) {
            for (int64_t j = 0; j < w; ++j) xn->grad[r * w + j] += on->grad[(*seg)[r] * w + j];
        });
    });
    return out;
}

// Columnwise max per segment; empty segments produce zero rows. Gradient is
// routed to the first maximal row of each (segment, column).
template <typename T>
TensorT<T> segment_max(const TensorT<T>& x, std::vector<int64_t> seg_ids, int64_t num_segments) {
    check(x.rank() == 2, "segment_max: rank-2 only");
    int64_t m = x.dim(0), w = x.width();
    detail::check_segments(seg_ids, m, num_segments);
    auto seg = std::make_shared<std::vector<int64_t>>(std::move(seg_ids));
    std::vector<T> v(num_segments * w, T(0));
    auto argmax = std::make_shared<std::vector<int64_t>>(num_segments * w, int64_t(-1));
    const auto& xv = x.value();
    for (int64_t r = 0; r < m; ++r) {
        int64_t s = (*seg)[r];
        for (int64_t j = 0; j < w; ++j) {
            int64_t slot = s * w + j;
            if ((*argmax)[slot] < 0 || xv[r * w + j] > v[slot]) {
                v[slot] = xv[r * w + j];
                (*argmax)[slot] = r;
            }
        }
    }
    for (int64_t slot = 0; slot < num_segments * w; ++slot)
        if ((*argmax)[slot] < 0) v[slot] = T(0);
    auto out = detail::make_result<T>({num_segments, w}, std::move(v), {x});
    auto* on = out.node().get();
    auto xn = x.node();
    detail::set_backprop(out, [on, xn, argmax, w, num_segments] {
        xn->ensure_grad();
        for (int64_t slot = 0; slot < num_segments * w; ++slot) {
            int64_t r = (*argmax)[slot];
            if (r >= 0) xn->grad[r * w + slot % w] += on->grad[slot];
        }
    });
    return out;
}

// Columnwise softmax across the rows of each segment.
template <typename T>
TensorT<T> segment_softmax(const TensorT<T>& x, std::vector<int64_t> seg_ids,
                           int64_t num_segments) {
    check(x.rank() == 2, "segment_softmax: rank-2 only");
    int64_t m = x.dim(0), w = x.width();
    detail::check_segments(seg_ids, m, num_segments);
    auto seg = std::make_shared<std::vector<int64_t>>(std::move(seg_ids));
    const auto& xv = x.value();
    std::vector<T> mx(num_segments * w, -std::numeric_limits<T>::infinity());
    for (int64_t r = 0; r < m; ++r)
        for (int64_t j = 0; j < w; ++j)
            mx[(*seg)[r] * w + j] = std::max(mx[(*seg)[r] * w + j], xv[r * w + j]);
    std::vector<T> v(m * w);
    std::vector<T> denom(num_segments * w, T(0));
    for (int64_t r = 0; r < m; ++r)
        for (int64_t j = 0; j < w; ++j) {
            T e = T(std::exp(double(xv[r * w + j] - mx[(*seg)[r] * w + j])));
            v[r * w + j] = e;
            denom[(*seg)[r] * w + j] += e;
        }
    for (int64_t r = 0; r < m; ++r)
        for (int64_t j = 0; j < w; ++j) v[r * w + j] /= denom[(*seg)[r] * w + j];
    auto out = detail::make_result<T>({m, w}, std::move(v), {x});
    auto* on = out.node().get();
    auto xn = x.node();
    detail::set_backprop(out, [on, xn, seg, m, w, num_segments] {
        xn->ensure_grad();
        std::vector<T> dot(num_segments * w, T(0));
        for (int64_t r = 0; r < m; ++r)
            for (int64_t j = 0; j < w; ++j)
                dot[(*seg)[r] * w + j] += on->value[r * w + j] * on->grad[r * w + j];
        for (int64_t r = 0; r < m; ++r)
            for (int64_t j = 0; j < w; ++j)
                xn->grad[r * w + j] +=
                    on->value[r * w + j] * (on->grad[r * w + j] - dot[(*seg)[r] * w + j]);
    });
    return out;
}

// ---------------------------------------------------------------------------
// dropout / loss

// Inverted dropout driven by an explicit stream; eval mode returns the input
// tensor unchanged.
template <typename T>
TensorT<T> dropout(const TensorT<T>& x, double rate, RngStream& stream, bool training) {
    check(rate >= 0.0 && rate < 1.0, "dropout: rate must be in [0,1)");
    if (!training || rate == 0.0) return x;
    auto keep = std::make_shared<std::vector<uint8_t>>(x.numel());
    T inv = T(1.0 / (1.0 - rate));
    std::vector<T> v(x.numel());
    const auto& xv = x.value();
    for (int64_t i = 0; i < x.numel(); ++i) {
        (*keep)[i] = stream.next_uniform() >= rate ? 1 : 0;
        v[i] = (*keep)[i] ? xv[i] * inv : T(0);
    }
    auto out = detail::make_result<T>(x.shape(), std::move(v), {x});
    auto* on = out.node().get();
    auto xn = x.node();
    detail::set_backprop(out, [on, xn, keep, inv] {
        xn->ensure_grad();
        for (size_t i = 0; i < on->grad.size(); ++i)
            if ((*keep)[i]) xn->grad[i] += on->grad[i] * inv;
    });
    return out;
}

// Mean cross-entropy over rows of logits against integer class labels.
template <typename T>
TensorT<T> cross_entropy_mean(const TensorT<T>& logits, std::vector<int64_t> labels) {
    check(logits.rank() == 2, "cross_entropy: logits must be rank-2");
    int64_t n = logits.dim(0), c = logits.dim(1);
    check((int64_t)labels.size() == n, "cross_entropy: labels length " +
                                           std::to_string(labels.size()) + " != rows " +
                                           std::to_string(n));
    check(n > 0, "cross_entropy: empty batch");
    for (auto l : labels) check(0 <= l && l < c, "cross_entropy: label out of range");
    auto lab = std::make_shared<std::vector<int64_t>>(std::move(labels));
    auto probs = std::make_shared<std::vector<T>>(n * c);
    const auto& lv = logits.value();
    std::vector<T> per_row(n);
    kernels::par_for(n, 256, [&](int64_t i) {
        kernels::softmax_row<T>(lv.data() + i * c, nullptr, probs->data() + i * c, c);
        T mx = lv[i * c];
        for (int64_t j = 1; j < c; ++j) mx = std::max(mx, lv[i * c + j]);
        T lse = T(0);
        for (int64_t j = 0; j < c; ++j) lse += T(std::exp(double(lv[i * c + j] - mx)));
        per_row[i] = T(std::log(double(lse))) + mx - lv[i * c + (*lab)[i]];
    });
    T total = T(0);
    for (auto v : per_row) total += v;
    auto out = detail::make_result<T>({1}, {total / T(n)}, {logits});
    auto* on = out.node().get();
    auto ln = logits.node();
    detail::set_backprop(out, [on, ln, lab, probs, n, c] {
        ln->ensure_grad();
        T g = on->grad[0] / T(n);
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < c; ++j)
                ln->grad[i * c + j] += g * ((*probs)[i * c + j] - T(j == (*lab)[i] ? 1 : 0));
    });
    return out;
}

// ---------------------------------------------------------------------------
// backward

template <typename T>
void backward(const TensorT<T>& loss) {
    check(loss.numel() == 1, "backward: loss must be scalar, got " + shape_str(loss.shape()));
    auto root = loss.node();
    if (!root->needs_grad) return;
    // collect reachable grad-requiring nodes
    std::vector<TapeNode<T>*> order;
    std::vector<TapeNode<T>*> stack{root.get()};
    std::unordered_set<TapeNode<T>*> seen{root.get()};
    while (!stack.empty()) {
        TapeNode<T>* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (auto& p : n->parents)
            if (p->needs_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(),
              [](const TapeNode<T>* a, const TapeNode<T>* b) { return a->seq > b->seq; });
    root->ensure_grad();
    root->grad[0] += T(1);
    for (auto* n : order)
        if (n->backprop) n->backprop();
}

// ---------------------------------------------------------------------------
// gradient verification

// Central-difference check of autodiff gradients; returns the max over
// coordinates of |a - n| / max(|a|, |n|, 1e-8).
template <typename T, typename F>
double finite_diff_check(F&& f, TensorT<T> x, double eps = 1e-5) {
    check(eps > 0 && eps <= 1e-2, "finite_diff_check: eps out of (0, 1e-2]");
    x.set_needs_grad(true);
    x.zero_grad();
    TensorT<T> loss = f(x);
    check(loss.numel() == 1, "finite_diff_check: f must be scalar-valued");
    backward(loss);
    std::vector<T> analytic = x.grad();
    if (analytic.empty()) analytic.assign(x.numel(), T(0));
    double worst = 0.0;
    auto& xv = x.value();
    for (int64_t i = 0; i < x.numel(); ++i) {
        T orig = xv[i];
        xv[i] = orig + T(eps);
        double fp = double(f(x).item());
        xv[i] = orig - T(eps);
        double fm = double(f(x).item());
        xv[i] = orig;
        double numeric = (fp - fm) / (2.0 * eps);
        double a = double(analytic[i]);
        double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        worst = std::max(worst, rel);
    }
    return worst;
}

// ---------------------------------------------------------------------------
// optimizer

template <typename T>
struct AdamStateT {
    int64_t step = 0;
    T lr = T(1e-3);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
    std::vector<std::vector<T>> m, v;
};

// Standard Adam with bias correction; gradients are zeroed after the update.
template <typename T>
void adam_step(std::vector<TensorT<T>>& params, AdamStateT<T>& state) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].numel(), T(0));
            state.v[i].assign(params[i].numel(), T(0));
        }
    }
    check(state.m.size() == params.size(), "adam: state/parameter count mismatch");
    ++state.step;
    double bc1 = 1.0 - std::pow(double(state.beta1), double(state.step));
    double bc2 = 1.0 - std::pow(double(state.beta2), double(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        if (!p.has_grad())
            throw std::runtime_error("adam: missing gradient for parameter " + std::to_string(i));
        check((int64_t)state.m[i].size() == p.numel(), "adam: moment shape mismatch");
        auto& val = p.value();
        auto& g = p.grad_mut();
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (int64_t j = 0; j < p.numel(); ++j) {
            m[j] = state.beta1 * m[j] + (T(1) - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (T(1) - state.beta2) * g[j] * g[j];
            T mhat = T(double(m[j]) / bc1);
            T vhat = T(double(v[j]) / bc2);
            val[j] -= state.lr * mhat / (T(std::sqrt(double(vhat))) + state.eps);
        }
        p.zero_grad();
    }
}

using Tensor = TensorT<double>;
using AdamState = AdamStateT<double>;

}  // namespace nt
