#pragma once

#include <algorithm>
#include <cmath>

#include "rt/autodiff.hpp"
#include "rt/kernels.hpp"
#include "rt/tensor.hpp"

// Differentiable op vocabulary. Elementwise binaries broadcast numpy-style;
// their backward reduces over the broadcast dimensions.
namespace rt::ag {

// ---------- raw tensor helpers ----------

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
    size_t r = std::max(a.size(), b.size());
    Shape out(r);
    for (size_t i = 0; i < r; ++i) {
        int da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        int db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da != db && da != 1 && db != 1)
            throw std::invalid_argument("broadcast mismatch " + shape_str(a) + " vs " + shape_str(b));
        out[i] = std::max(da, db);
    }
    return out;
}

namespace detail {

inline std::vector<int64_t> bcast_strides(const Shape& shape, const Shape& out) {
    size_t r = out.size();
    std::vector<int64_t> strides(r, 0);
    int64_t s = 1;
    size_t off = r - shape.size();
    for (size_t i = r; i-- > off;) {
        int d = shape[i - off];
        strides[i] = (d == 1) ? 0 : s;
        s *= d;
    }
    return strides;
}

template <class T, class F>
Tensor<T> binary_bcast(const Tensor<T>& a, const Tensor<T>& b, F f) {
    Shape os = broadcast_shape(a.shape(), b.shape());
    Tensor<T> out(os);
    size_t r = os.size();
    auto sa = bcast_strides(a.shape(), os);
    auto sb = bcast_strides(b.shape(), os);
    std::vector<int> idx(r, 0);
    const T* pa = a.data();
    const T* pb = b.data();
    T* po = out.data();
    int64_t n = out.numel();
    int64_t ia = 0, ib = 0;
    for (int64_t i = 0; i < n; ++i) {
        po[i] = f(pa[ia], pb[ib]);
        for (size_t d = r; d-- > 0;) {
            if (++idx[d] < os[d]) {
                ia += sa[d];
                ib += sb[d];
                break;
            }
            idx[d] = 0;
            ia -= sa[d] * (os[d] - 1);
            ib -= sb[d] * (os[d] - 1);
        }
    }
    return out;
}

}  // namespace detail

// Sum `t` down to `target` shape (inverse of broadcasting).
template <class T>
Tensor<T> reduce_to_tensor(const Tensor<T>& t, const Shape& target) {
    if (t.shape() == target) return t;
    Tensor<T> out(target);
    size_t r = t.shape().size();
    auto st = detail::bcast_strides(target, t.shape());
    std::vector<int> idx(r, 0);
    const T* pt = t.data();
    T* po = out.data();
    int64_t n = t.numel();
    int64_t io = 0;
    const Shape& os = t.shape();
    for (int64_t i = 0; i < n; ++i) {
        po[io] += pt[i];
        for (size_t d = r; d-- > 0;) {
            if (++idx[d] < os[d]) {
                io += st[d];
                break;
            }
            idx[d] = 0;
            io -= st[d] * (os[d] - 1);
        }
    }
    return out;
}

// ---------- forward declarations ----------

template <class T> Var<T> add(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> sub(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> mul(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> divide(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> scale(const Var<T>& a, T s);
template <class T> Var<T> reshape(const Var<T>& a, Shape s);
template <class T> Var<T> sum_axes(const Var<T>& a, std::vector<int> axes, bool keepdim);
template <class T> Var<T> reduce_to_var(const Var<T>& g, const Shape& target);
template <class T> Var<T> conv2d(const Var<T>& x, const Var<T>& w, int stride, int pad);
template <class T> Var<T> conv2d_input_grad(const Var<T>& w, const Var<T>& gy, Shape xshape, int stride, int pad);
template <class T> Var<T> conv2d_weight_grad(const Var<T>& x, const Var<T>& gy, Shape wshape, int stride, int pad);
template <class T> Var<T> upsample2x(const Var<T>& x);
template <class T> Var<T> downsample_sum2x(const Var<T>& x);
template <class T> Var<T> transpose2d(const Var<T>& a);
template <class T> Var<T> matmul(const Var<T>& a, const Var<T>& b);
template <class T> Var<T> slice(const Var<T>& v, int axis, int start, int len);
template <class T> Var<T> pad_slice(const Var<T>& g, int axis, int start, const Shape& full);

template <class T>
void accumulate_grad(const Var<T>& target, const Var<T>& g) {
    if (!target || !target->requires_grad) return;
    target->grad = target->grad ? add(target->grad, g) : g;
}

// ---------- elementwise binaries ----------

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
    Tensor<T> v = a->value.same_shape(b->value)
                      ? [&] {
                            Tensor<T> t(a->value.shape());
                            kernels::vadd(a->value.data(), b->value.data(), t.data(),
                                          static_cast<size_t>(t.numel()));
                            return t;
                        }()
                      : detail::binary_bcast(a->value, b->value, [](T x, T y) { return x + y; });
    return make_node<T>(std::move(v), {a, b}, [a, b](Node<T>* n) {
        accumulate_grad(a, reduce_to_var(n->grad, a->value.shape()));
        accumulate_grad(b, reduce_to_var(n->grad, b->value.shape()));
    });
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
    Tensor<T> v = a->value.same_shape(b->value)
                      ? [&] {
                            Tensor<T> t(a->value.shape());
                            kernels::vsub(a->value.data(), b->value.data(), t.data(),
                                          static_cast<size_t>(t.numel()));
                            return t;
                        }()
                      : detail::binary_bcast(a->value, b->value, [](T x, T y) { return x - y; });
    return make_node<T>(std::move(v), {a, b}, [a, b](Node<T>* n) {
        accumulate_grad(a, reduce_to_var(n->grad, a->value.shape()));
        accumulate_grad(b, reduce_to_var(scale(n->grad, T(-1)), b->value.shape()));
    });
}

template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
    Tensor<T> v = a->value.same_shape(b->value)
                      ? [&] {
                            Tensor<T> t(a->value.shape());
                            kernels::vmul(a->value.data(), b->value.data(), t.data(),
                                          static_cast<size_t>(t.numel()));
                            return t;
                        }()
                      : detail::binary_bcast(a->value, b->value, [](T x, T y) { return x * y; });
    return make_node<T>(std::move(v), {a, b}, [a, b](Node<T>* n) {
        accumulate_grad(a, reduce_to_var(mul(n->grad, b), a->value.shape()));
        accumulate_grad(b, reduce_to_var(mul(n->grad, a), b->value.shape()));
    });
}

template <class T>
Var<T> divide(const Var<T>& a, const Var<T>& b) {
    Tensor<T> v = detail::binary_bcast(a->value, b->value, [](T x, T y) { return x / y; });
    return make_node<T>(std::move(v), {a, b}, [a, b](Node<T>* n) {
        accumulate_grad(a, reduce_to_var(divide(n->grad, b), a->value.shape()));
        accumulate_grad(
            b, reduce_to_var(scale(divide(mul(n->grad, a), mul(b, b)), T(-1)), b->value.shape()));
    });
}

// ---------- elementwise unaries ----------

template <class T>
Var<T> neg(const Var<T>& a) { return scale(a, T(-1)); }

template <class T>
Var<T> scale(const Var<T>& a, T s) {
    Tensor<T> v(a->value.shape());
    kernels::vscale(a->value.data(), s, v.data(), static_cast<size_t>(v.numel()));
    return make_node<T>(std::move(v), {a}, [a, s](Node<T>* n) {
        accumulate_grad(a, scale(n->grad, s));
    });
}

template <class T>
Var<T> offset(const Var<T>& a, T c) {
    Tensor<T> v = a->value;
    for (int64_t i = 0; i < v.numel(); ++i) v[i] += c;
    return make_node<T>(std::move(v), {a}, [a](Node<T>* n) { accumulate_grad(a, n->grad); });
}

template <class T>
Var<T> exp_(const Var<T>& a) {
    Tensor<T> v = a->value;
    for (int64_t i = 0; i < v.numel(); ++i) v[i] = std::exp(v[i]);
    auto node = make_node<T>(std::move(v), {a}, nullptr);
    if (node->requires_grad) {
        std::weak_ptr<Node<T>> self = node;
        node->backprop = [a, self](Node<T>* n) {
            accumulate_grad(a, mul(n->grad, Var<T>(self.lock())));
        };
    }
    return node;
}

template <class T>
Var<T> log_(const Var<T>& a) {
    Tensor<T> v = a->value;
    for (int64_t i = 0; i < v.numel(); ++i) v[i] = std::log(v[i]);
    return make_node<T>(std::move(v), {a}, [a](Node<T>* n) {
        accumulate_grad(a, divide(n->grad, a));
    });
}

template <class T>
Var<T> sqrt_(const Var<T>& a) {
    Tensor<T> v = a->value;
    for (int64_t i = 0; i < v.numel(); ++i) v[i] = std::sqrt(v[i]);
    auto node = make_node<T>(std::move(v), {a}, nullptr);
    if (node->requires_grad) {
        std::weak_ptr<Node<T>> self = node;
        node->backprop = [a, self](Node<T>* n) {
            accumulate_grad(a, divide(scale(n->grad, T(0.5)), Var<T>(self.lock())));
        };
    }
    return node;
}

template <class T>
Var<T> square(const Var<T>& a) { return mul(a, a); }

template <class T>
Var<T> abs_(const Var<T>& a) {
    Tensor<T> v = a->value;
    Tensor<T> sign(a->value.shape());
    for (int64_t i = 0; i < v.numel(); ++i) {
        sign[i] = v[i] > T(0) ? T(1) : (v[i] < T(0) ? T(-1) : T(0));
        v[i] = std::abs(v[i]);
    }
    auto sgn = constant(std::move(sign));
    return make_node<T>(std::move(v), {a}, [a, sgn](Node<T>* n) {
        accumulate_grad(a, mul(n->grad, sgn));
    });
}

template <class T>
Var<T> leaky_relu(const Var<T>& a, T slope) {
    Tensor<T> v(a->value.shape());
    kernels::vleaky_relu(a->value.data(), slope, v.data(), static_cast<size_t>(v.numel()));
    auto node = make_node<T>(std::move(v), {a}, nullptr);
    if (node->requires_grad) {
        Tensor<T> m(a->value.shape());
        for (int64_t i = 0; i < m.numel(); ++i) m[i] = a->value[i] > T(0) ? T(1) : slope;
        auto mask = constant(std::move(m));
        node->backprop = [a, mask](Node<T>* n) { accumulate_grad(a, mul(n->grad, mask)); };
    }
    return node;
}

template <class T>
T stable_sigmoid(T x) {
    if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
    T e = std::exp(x);
    return e / (T(1) + e);
}

template <class T>
Var<T> sigmoid(const Var<T>& a) {
    Tensor<T> v = a->value;
    for (int64_t i = 0; i < v.numel(); ++i) v[i] = stable_sigmoid(v[i]);
    auto node = make_node<T>(std::move(v), {a}, nullptr);
    if (node->requires_grad) {
        std::weak_ptr<Node<T>> self = node;
        node->backprop = [a, self](Node<T>* n) {
            Var<T> s(self.lock());
            accumulate_grad(a, mul(n->grad, mul(s, offset(scale(s, T(-1)), T(1)))));
        };
    }
    return node;
}

template <class T>
Var<T> softplus(const Var<T>& a) {
    Tensor<T> v = a->value;
    for (int64_t i = 0; i < v.numel(); ++i) {
        T x = v[i];
        v[i] = std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
    }
    return make_node<T>(std::move(v), {a}, [a](Node<T>* n) {
        accumulate_grad(a, mul(n->grad, sigmoid(a)));
    });
}

template <class T>
Var<T> clamp(const Var<T>& a, T lo, T hi) {
    Tensor<T> v = a->value;
    Tensor<T> m(a->value.shape());
    for (int64_t i = 0; i < v.numel(); ++i) {
        m[i] = (v[i] > lo && v[i] < hi) ? T(1) : T(0);
        v[i] = std::min(hi, std::max(lo, v[i]));
    }
    auto mask = constant(std::move(m));
    return make_node<T>(std::move(v), {a}, [a, mask](Node<T>* n) {
        accumulate_grad(a, mul(n->grad, mask));
    });
}

// ---------- reductions / shape ----------

template <class T>
Var<T> sum_all(const Var<T>& a) {
    Tensor<T> v = Tensor<T>::scalar(kernels::vsum(a->value.data(), static_cast<size_t>(a->value.numel())));
    return make_node<T>(std::move(v), {a}, [a](Node<T>* n) {
        auto ones = constant(Tensor<T>::full(a->value.shape(), T(1)));
        accumulate_grad(a, mul(ones, n->grad));
    });
}

template <class T>
Var<T> mean_all(const Var<T>& a) {
    return scale(sum_all(a), T(1) / static_cast<T>(a->value.numel()));
}

template <class T>
Var<T> sum_axes(const Var<T>& a, std::vector<int> axes, bool keepdim) {
    Shape keep = a->value.shape();
    for (int ax : axes) keep[static_cast<size_t>(ax)] = 1;
    Tensor<T> v = reduce_to_tensor(a->value, keep);
    Shape out = keep;
    if (!keepdim) {
        out.clear();
        for (size_t i = 0; i < keep.size(); ++i)
            if (std::find(axes.begin(), axes.end(), static_cast<int>(i)) == axes.end())
                out.push_back(keep[i]);
        if (out.empty()) out.push_back(1);
        v = v.reshaped(out);
    }
    return make_node<T>(std::move(v), {a}, [a, keep](Node<T>* n) {
        auto g = reshape(n->grad, keep);
        auto ones = constant(Tensor<T>::full(a->value.shape(), T(1)));
        accumulate_grad(a, mul(ones, g));
    });
}

template <class T>
Var<T> mean_axes(const Var<T>& a, std::vector<int> axes, bool keepdim) {
    int64_t n = 1;
    for (int ax : axes) n *= a->value.dim(ax);
    return scale(sum_axes(a, std::move(axes), keepdim), T(1) / static_cast<T>(n));
}

template <class T>
Var<T> reshape(const Var<T>& a, Shape s) {
    Shape orig = a->value.shape();
    return make_node<T>(a->value.reshaped(std::move(s)), {a}, [a, orig](Node<T>* n) {
        accumulate_grad(a, reshape(n->grad, orig));
    });
}

// Inverse of broadcasting, as a differentiable op.
template <class T>
Var<T> reduce_to_var(const Var<T>& g, const Shape& target) {
    if (g->value.shape() == target) return g;
    Shape gs = g->value.shape();
    size_t extra = gs.size() - target.size();
    std::vector<int> axes;
    Shape keep = gs;
    for (size_t i = 0; i < gs.size(); ++i) {
        int td = i < extra ? 1 : target[i - extra];
        if (td == 1 && gs[i] != 1) axes.push_back(static_cast<int>(i));
    }
    Var<T> r = axes.empty() ? g : sum_axes(g, axes, true);
    return reshape(r, target);
}

// ---------- linear algebra ----------

template <class T>
Var<T> transpose2d(const Var<T>& a) {
    int m = a->value.dim(0), n = a->value.dim(1);
    Tensor<T> v({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) v.at2(j, i) = a->value.at2(i, j);
    return make_node<T>(std::move(v), {a}, [a](Node<T>* n_) {
        accumulate_grad(a, transpose2d(n_->grad));
    });
}

template <class T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
    int m = a->value.dim(0), k = a->value.dim(1), n = b->value.dim(1);
    if (b->value.dim(0) != k)
        throw std::invalid_argument("matmul shape mismatch " + shape_str(a->value.shape()) + " x " +
                                    shape_str(b->value.shape()));
    Tensor<T> v({m, n});
    kernels::gemm_nn(a->value.data(), b->value.data(), v.data(), m, k, n, false);
    return make_node<T>(std::move(v), {a, b}, [a, b](Node<T>* nd) {
        accumulate_grad(a, matmul(nd->grad, transpose2d(b)));
        accumulate_grad(b, matmul(transpose2d(a), nd->grad));
    });
}

// ---------- slicing / concatenation ----------

template <class T>
Var<T> slice(const Var<T>& v, int axis, int start, int len) {
    const Shape& s = v->value.shape();
    Shape os = s;
    os[static_cast<size_t>(axis)] = len;
    Tensor<T> out(os);
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= s[static_cast<size_t>(i)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < s.size(); ++i) inner *= s[i];
    int d = s[static_cast<size_t>(axis)];
    for (int64_t o = 0; o < outer; ++o)
        std::copy(v->value.data() + (o * d + start) * inner,
                  v->value.data() + (o * d + start + len) * inner,
                  out.data() + o * len * inner);
    Shape full = s;
    return make_node<T>(std::move(out), {v}, [v, axis, start, full](Node<T>* n) {
        accumulate_grad(v, pad_slice(n->grad, axis, start, full));
    });
}

// Embeds g into a zero tensor of shape `full` at offset `start` along `axis`.
template <class T>
Var<T> pad_slice(const Var<T>& g, int axis, int start, const Shape& full) {
    const Shape& gs = g->value.shape();
    Tensor<T> out(full);
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= full[static_cast<size_t>(i)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < full.size(); ++i) inner *= full[i];
    int d = full[static_cast<size_t>(axis)];
    int len = gs[static_cast<size_t>(axis)];
    for (int64_t o = 0; o < outer; ++o)
        std::copy(g->value.data() + o * len * inner, g->value.data() + (o + 1) * len * inner,
                  out.data() + (o * d + start) * inner);
    int len_c = len;
    return make_node<T>(std::move(out), {g}, [g, axis, start, len_c](Node<T>* n) {
        accumulate_grad(g, slice(n->grad, axis, start, len_c));
    });
}

template <class T>
Var<T> concat(const Var<T>& a, const Var<T>& b, int axis) {
    const Shape& sa = a->value.shape();
    const Shape& sb = b->value.shape();
    Shape os = sa;
    os[static_cast<size_t>(axis)] += sb[static_cast<size_t>(axis)];
    Tensor<T> out(os);
    int64_t outer = 1, inner = 1;
    for (int i = 0; i < axis; ++i) outer *= os[static_cast<size_t>(i)];
    for (size_t i = static_cast<size_t>(axis) + 1; i < os.size(); ++i) inner *= os[i];
    int da = sa[static_cast<size_t>(axis)], db = sb[static_cast<size_t>(axis)];
    for (int64_t o = 0; o < outer; ++o) {
        std::copy(a->value.data() + o * da * inner, a->value.data() + (o + 1) * da * inner,
                  out.data() + o * (da + db) * inner);
        std::copy(b->value.data() + o * db * inner, b->value.data() + (o + 1) * db * inner,
                  out.data() + (o * (da + db) + da) * inner);
    }
    int da_c = da, db_c = db;
    return make_node<T>(std::move(out), {a, b}, [a, b, axis, da_c, db_c](Node<T>* n) {
        accumulate_grad(a, slice(n->grad, axis, 0, da_c));
        accumulate_grad(b, slice(n->grad, axis, da_c, db_c));
    });
}

// ---------- convolution ----------

namespace detail {

template <class T>
Tensor<T> conv2d_fwd(const Tensor<T>& x, const Tensor<T>& w, int stride, int pad) {
    int b = x.dim(0), c = x.dim(1), h = x.dim(2), ww = x.dim(3);
    int o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != c)
        throw std::invalid_argument("conv2d channel mismatch x=" + shape_str(x.shape()) +
                                    " w=" + shape_str(w.shape()));
    int oh = kernels::conv_out_dim(h, kh, stride, pad);
    int ow = kernels::conv_out_dim(ww, kw, stride, pad);
    Tensor<T> y({b, o, oh, ow});
    int ckk = c * kh * kw;
    std::vector<T> cols(static_cast<size_t>(ckk) * oh * ow);
    for (int bi = 0; bi < b; ++bi) {
        kernels::im2col(x.data() + static_cast<size_t>(bi) * c * h * ww, c, h, ww, kh, kw, stride,
                        pad, cols.data());
        kernels::gemm_nn(w.data(), cols.data(), y.data() + static_cast<size_t>(bi) * o * oh * ow, o,
                         ckk, oh * ow, false);
    }
    return y;
}

template <class T>
Tensor<T> conv2d_igrad_fwd(const Tensor<T>& w, const Tensor<T>& gy, const Shape& xshape, int stride,
                           int pad) {
    int b = gy.dim(0), o = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
    int c = xshape[1], h = xshape[2], ww = xshape[3];
    int kh = w.dim(2), kw = w.dim(3);
    int ckk = c * kh * kw;
    Tensor<T> gx(xshape);
    std::vector<T> cols(static_cast<size_t>(ckk) * oh * ow);
    for (int bi = 0; bi < b; ++bi) {
        kernels::gemm_tn(w.data(), gy.data() + static_cast<size_t>(bi) * o * oh * ow, cols.data(),
                         ckk, o, oh * ow, false);
        kernels::col2im_add(cols.data(), c, h, ww, kh, kw, stride, pad,
                            gx.data() + static_cast<size_t>(bi) * c * h * ww);
    }
    return gx;
}

template <class T>
Tensor<T> conv2d_wgrad_fwd(const Tensor<T>& x, const Tensor<T>& gy, const Shape& wshape, int stride,
                           int pad) {
    int b = x.dim(0), c = x.dim(1), h = x.dim(2), ww = x.dim(3);
    int o = gy.dim(1), oh = gy.dim(2), ow = gy.dim(3);
    int kh = wshape[2], kw = wshape[3];
    int ckk = c * kh * kw;
    Tensor<T> gw(wshape);
    std::vector<T> cols(static_cast<size_t>(ckk) * oh * ow);
    for (int bi = 0; bi < b; ++bi) {
        kernels::im2col(x.data() + static_cast<size_t>(bi) * c * h * ww, c, h, ww, kh, kw, stride,
                        pad, cols.data());
        kernels::gemm_nt(gy.data() + static_cast<size_t>(bi) * o * oh * ow, cols.data(), gw.data(),
                         o, oh * ow, ckk, true);
    }
    return gw;
}

}  // namespace detail

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, int stride, int pad) {
    Tensor<T> y = detail::conv2d_fwd(x->value, w->value, stride, pad);
    return make_node<T>(std::move(y), {x, w}, [x, w, stride, pad](Node<T>* n) {
        accumulate_grad(x, conv2d_input_grad(w, n->grad, x->value.shape(), stride, pad));
        accumulate_grad(w, conv2d_weight_grad(x, n->grad, w->value.shape(), stride, pad));
    });
}

template <class T>
Var<T> conv2d_input_grad(const Var<T>& w, const Var<T>& gy, Shape xshape, int stride, int pad) {
    Tensor<T> gx = detail::conv2d_igrad_fwd(w->value, gy->value, xshape, stride, pad);
    return make_node<T>(std::move(gx), {w, gy}, [w, gy, stride, pad](Node<T>* n) {
        // n->grad has the shape of x; forward-mode through the two linear args.
        accumulate_grad(gy, conv2d(n->grad, w, stride, pad));
        accumulate_grad(w, conv2d_weight_grad(n->grad, gy, w->value.shape(), stride, pad));
    });
}

template <class T>
Var<T> conv2d_weight_grad(const Var<T>& x, const Var<T>& gy, Shape wshape, int stride, int pad) {
    Tensor<T> gw = detail::conv2d_wgrad_fwd(x->value, gy->value, wshape, stride, pad);
    return make_node<T>(std::move(gw), {x, gy}, [x, gy, stride, pad](Node<T>* n) {
        // n->grad has the shape of w.
        accumulate_grad(x, conv2d_input_grad(n->grad, gy, x->value.shape(), stride, pad));
        accumulate_grad(gy, conv2d(x, n->grad, stride, pad));
    });
}

// ---------- resampling ----------

template <class T>
Var<T> upsample2x(const Var<T>& x) {
    int b = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2), w = x->value.dim(3);
    Tensor<T> y({b, c, h * 2, w * 2});
    for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < c; ++ci)
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) {
                    T v = x->value.at4(bi, ci, i, j);
                    y.at4(bi, ci, 2 * i, 2 * j) = v;
                    y.at4(bi, ci, 2 * i, 2 * j + 1) = v;
                    y.at4(bi, ci, 2 * i + 1, 2 * j) = v;
                    y.at4(bi, ci, 2 * i + 1, 2 * j + 1) = v;
                }
    return make_node<T>(std::move(y), {x}, [x](Node<T>* n) {
        accumulate_grad(x, downsample_sum2x(n->grad));
    });
}

template <class T>
Var<T> downsample_sum2x(const Var<T>& x) {
    int b = x->value.dim(0), c = x->value.dim(1), h = x->value.dim(2), w = x->value.dim(3);
    Tensor<T> y({b, c, h / 2, w / 2});
    for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < c; ++ci)
            for (int i = 0; i < h / 2; ++i)
                for (int j = 0; j < w / 2; ++j)
                    y.at4(bi, ci, i, j) = x->value.at4(bi, ci, 2 * i, 2 * j) +
                                          x->value.at4(bi, ci, 2 * i, 2 * j + 1) +
                                          x->value.at4(bi, ci, 2 * i + 1, 2 * j) +
                                          x->value.at4(bi, ci, 2 * i + 1, 2 * j + 1);
    return make_node<T>(std::move(y), {x}, [x](Node<T>* n) {
        accumulate_grad(x, upsample2x(n->grad));
    });
}

// ---------- composites ----------

// x:[B,I] w:[O,I] b:[O] -> [B,O]
template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
    auto y = matmul(x, transpose2d(w));
    return add(y, reshape(b, {1, b->value.dim(0)}));
}

template <class T>
Var<T> bias_add(const Var<T>& x, const Var<T>& b) {
    return add(x, reshape(b, {1, b->value.dim(0), 1, 1}));
}

// Paired-logit softmax collapsed to one mask: (m, 1-m) with m = sigmoid(a - b).
template <class T>
Var<T> two_way_softmax(const Var<T>& logit_a, const Var<T>& logit_b) {
    return sigmoid(sub(logit_a, logit_b));
}

template <class T>
Var<T> one_minus(const Var<T>& a) {
    return offset(scale(a, T(-1)), T(1));
}

}  // namespace rt::ag
