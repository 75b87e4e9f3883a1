// SPDX-License-Identifier: Apache-2.0
//
// sblu: sparse Bayesian learning and its deep-unfolded variants for wideband
// hybrid mmWave massive MIMO channel estimation.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "sblu/autodiff/tensor.hpp"

#include <array>
#include <cmath>

namespace sblu::ad {

namespace detail {

using CRowMat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RRowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const CRowMat> cmap(const Tensor& t)
{
    return {reinterpret_cast<const cplx*>(t.data.data()), static_cast<Eigen::Index>(t.shape[0]),
            static_cast<Eigen::Index>(t.shape[1])};
}

inline Eigen::Map<CRowMat> cmap(Tensor& t)
{
    return {reinterpret_cast<cplx*>(t.data.data()), static_cast<Eigen::Index>(t.shape[0]),
            static_cast<Eigen::Index>(t.shape[1])};
}

inline Eigen::Map<const RRowMat> rmap(const Tensor& t)
{
    return {t.data.data(), static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1])};
}

inline Eigen::Map<RRowMat> rmap(Tensor& t)
{
    return {t.data.data(), static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1])};
}

inline void require_complex_matrix(const Tensor& t, const char* op)
{
    require_dims(t.rank() == 3 && t.shape[2] == 2, std::string(op) + ": expected (rows, cols, 2), got " + shape_str(t.shape));
}

inline void require_real_matrix(const Tensor& t, const char* op)
{
    require_dims(t.rank() == 2, std::string(op) + ": expected a rank-2 tensor, got " + shape_str(t.shape));
}

inline std::vector<std::size_t> strides_of(const Shape& s)
{
    std::vector<std::size_t> st(s.size(), 1);
    for (std::size_t i = s.size(); i-- > 1;)
        st[i - 1] = st[i] * s[i];
    return st;
}

// Calls f(out_flat, in_flat) for a permuted copy.
template <class F>
void for_each_permuted(const Shape& in_shape, const std::vector<std::size_t>& perm, F&& f)
{
    const auto in_st = strides_of(in_shape);
    const std::size_t r = in_shape.size();
    Shape out_shape(r);
    std::vector<std::size_t> st(r);
    for (std::size_t i = 0; i < r; ++i) {
        out_shape[i] = in_shape[perm[i]];
        st[i] = in_st[perm[i]];
    }
    const std::size_t n = shape_size(in_shape);
    std::vector<std::size_t> idx(r, 0);
    std::size_t src = 0;
    for (std::size_t o = 0; o < n; ++o) {
        f(o, src);
        for (std::size_t d = r; d-- > 0;) {
            if (++idx[d] < out_shape[d]) {
                src += st[d];
                break;
            }
            src -= st[d] * (out_shape[d] - 1);
            idx[d] = 0;
        }
    }
}

} // namespace detail

// ---- elementwise -------------------------------------------------------

inline Var add(const Var& a, const Var& b)
{
    require_same_shape(a.value(), b.value(), "add");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += b.value()[i];
    return detail::make_op("add", std::move(out), {a, b}, [](Node& n) {
        for (auto& p : n.parents)
            if (detail::wants(p)) {
                auto& g = p->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i)
                    g[i] += n.grad[i];
            }
    });
}

inline Var sub(const Var& a, const Var& b)
{
    require_same_shape(a.value(), b.value(), "sub");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] -= b.value()[i];
    return detail::make_op("sub", std::move(out), {a, b}, [](Node& n) {
        for (int s = 0; s < 2; ++s) {
            const auto& p = n.parents[s];
            if (!detail::wants(p))
                continue;
            auto& g = p->grad_buffer();
            const double sign = s == 0 ? 1.0 : -1.0;
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] += sign * n.grad[i];
        }
    });
}

/// Elementwise product of real tensors.
inline Var mul(const Var& a, const Var& b)
{
    require_same_shape(a.value(), b.value(), "mul");
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] *= b.value()[i];
    return detail::make_op("mul", std::move(out), {a, b}, [](Node& n) {
        const auto& pa = n.parents[0];
        const auto& pb = n.parents[1];
        if (detail::wants(pa)) {
            auto& g = pa->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] += n.grad[i] * pb->value[i];
        }
        if (detail::wants(pb)) {
            auto& g = pb->grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i)
                g[i] += n.grad[i] * pa->value[i];
        }
    });
}

inline Var scale(const Var& a, double s)
{
    Tensor out = a.value();
    for (auto& v : out.data)
        v *= s;
    return detail::make_op("scale", std::move(out), {a}, [s](Node& n) {
        auto& g = n.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += s * n.grad[i];
    });
}

inline Var relu(const Var& a)
{
    Tensor out = a.value();
    for (auto& v : out.data)
        v = v > 0.0 ? v : 0.0;
    return detail::make_op("relu", std::move(out), {a}, [](Node& n) {
        auto& g = n.parents[0]->grad_buffer();
        const auto& x = n.parents[0]->value;
        for (std::size_t i = 0; i < g.size(); ++i)
            if (x[i] > 0.0)
                g[i] += n.grad[i];
    });
}

inline Var sigmoid(const Var& a)
{
    Tensor out = a.value();
    for (auto& v : out.data)
        v = 1.0 / (1.0 + std::exp(-v));
    return detail::make_op("sigmoid", std::move(out), {a}, [](Node& n) {
        auto& g = n.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double s = n.value[i];
            g[i] += n.grad[i] * s * (1.0 - s);
        }
    });
}

/// Sum of all entries, as a scalar.
inline Var sum(const Var& a)
{
    double s = 0.0;
    for (double v : a.value().data)
        s += v;
    return detail::make_op("sum", Tensor::scalar(s), {a}, [](Node& n) {
        auto& g = n.parents[0]->grad_buffer();
        for (auto& v : g.data)
            v += n.grad[0];
    });
}

// ---- shape -------------------------------------------------------------

inline Var reshape(const Var& a, Shape shape)
{
    require_dims(shape_size(shape) == a.size(), "reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
    Tensor out(std::move(shape), a.value().data);
    return detail::make_op("reshape", std::move(out), {a}, [](Node& n) {
        auto& g = n.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += n.grad[i];
    });
}

/// out.shape[i] = in.shape[perm[i]].
inline Var permute(const Var& a, std::vector<std::size_t> perm)
{
    const Shape& in = a.shape();
    require_dims(perm.size() == in.size(), "permute: permutation rank does not match tensor rank");
    {
        auto sorted = perm;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < sorted.size(); ++i)
            require_dims(sorted[i] == i, "permute: not a permutation");
    }
    Shape os(in.size());
    for (std::size_t i = 0; i < in.size(); ++i)
        os[i] = in[perm[i]];
    Tensor out(os);
    const auto& src = a.value();
    detail::for_each_permuted(in, perm, [&](std::size_t o, std::size_t s) { out[o] = src[s]; });
    return detail::make_op("permute", std::move(out), {a}, [perm](Node& n) {
        auto& p = n.parents[0];
        auto& g = p->grad_buffer();
        detail::for_each_permuted(p->value.shape, perm, [&](std::size_t o, std::size_t s) { g[s] += n.grad[o]; });
    });
}

inline Var slice(const Var& a, std::size_t axis, std::size_t start, std::size_t len)
{
    const Shape& in = a.shape();
    require_dims(axis < in.size() && start + len <= in[axis], "slice: range out of bounds for " + shape_str(in));
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i)
        outer *= in[i];
    for (std::size_t i = axis + 1; i < in.size(); ++i)
        inner *= in[i];
    Shape os = in;
    os[axis] = len;
    Tensor out(os);
    const std::size_t n_ax = in[axis];
    for (std::size_t o = 0; o < outer; ++o)
        std::copy_n(a.value().data.begin() + (o * n_ax + start) * inner, len * inner,
                    out.data.begin() + o * len * inner);
    return detail::make_op("slice", std::move(out), {a}, [=](Node& n) {
        auto& g = n.parents[0]->grad_buffer();
        for (std::size_t o = 0; o < outer; ++o)
            for (std::size_t i = 0; i < len * inner; ++i)
                g[(o * n_ax + start) * inner + i] += n.grad[o * len * inner + i];
    });
}

inline Var concat(const std::vector<Var>& parts, std::size_t axis)
{
    require_dims(!parts.empty(), "concat: no inputs");
    const Shape& s0 = parts[0].shape();
    require_dims(axis < s0.size(), "concat: axis out of range");
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i)
        outer *= s0[i];
    for (std::size_t i = axis + 1; i < s0.size(); ++i)
        inner *= s0[i];
    std::vector<std::size_t> lens;
    std::size_t total = 0;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        require_dims(s.size() == s0.size(), "concat: rank mismatch");
        for (std::size_t i = 0; i < s.size(); ++i)
            require_dims(i == axis || s[i] == s0[i], "concat: shape mismatch " + shape_str(s) + " vs " + shape_str(s0));
        lens.push_back(s[axis]);
        total += s[axis];
    }
    Shape os = s0;
    os[axis] = total;
    Tensor out(os);
    for (std::size_t o = 0; o < outer; ++o) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < parts.size(); ++k) {
            std::copy_n(parts[k].value().data.begin() + o * lens[k] * inner, lens[k] * inner,
                        out.data.begin() + (o * total + off) * inner);
            off += lens[k];
        }
    }
    return detail::make_op("concat", std::move(out), parts, [=](Node& n) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < n.parents.size(); ++k) {
            const auto& p = n.parents[k];
            if (detail::wants(p)) {
                auto& g = p->grad_buffer();
                for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t i = 0; i < lens[k] * inner; ++i)
                        g[o * lens[k] * inner + i] += n.grad[(o * total + off) * inner + i];
            }
            off += lens[k];
        }
    });
}

/// Mean over the listed axes; those axes are removed from the shape.
inline Var mean_axes(const Var& a, std::vector<std::size_t> axes)
{
    const Shape& in = a.shape();
    std::vector<bool> drop(in.size(), false);
    std::size_t count = 1;
    for (auto ax : axes) {
        require_dims(ax < in.size() && !drop[ax], "mean_axes: bad axis list");
        drop[ax] = true;
        count *= in[ax];
    }
    Shape os;
    for (std::size_t i = 0; i < in.size(); ++i)
        if (!drop[i])
            os.push_back(in[i]);
    // map each input flat index to its output flat index
    std::vector<std::size_t> target(a.size());
    {
        const auto ost = detail::strides_of(os);
        std::vector<std::size_t> idx(in.size(), 0);
        for (std::size_t f = 0; f < a.size(); ++f) {
            std::size_t t = 0, k = 0;
            for (std::size_t d = 0; d < in.size(); ++d)
                if (!drop[d])
                    t += idx[d] * ost[k++];
            target[f] = t;
            for (std::size_t d = in.size(); d-- > 0;) {
                if (++idx[d] < in[d])
                    break;
                idx[d] = 0;
            }
        }
    }
    Tensor out(os);
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t f = 0; f < a.size(); ++f)
        out[target[f]] += a.value()[f] * inv;
    return detail::make_op("mean_axes", std::move(out), {a}, [target = std::move(target), inv](Node& n) {
        auto& g = n.parents[0]->grad_buffer();
        for (std::size_t f = 0; f < g.size(); ++f)
            g[f] += n.grad[target[f]] * inv;
    });
}

// ---- real linear algebra -----------------------------------------------

inline Var matmul(const Var& a, const Var& b)
{
    detail::require_real_matrix(a.value(), "matmul");
    detail::require_real_matrix(b.value(), "matmul");
    require_dims(a.dim(1) == b.dim(0), "matmul: inner dimensions differ");
    Tensor out({a.dim(0), b.dim(1)});
    detail::rmap(out).noalias() = detail::rmap(a.value()) * detail::rmap(b.value());
    return detail::make_op("matmul", std::move(out), {a, b}, [](Node& n) {
        const auto& pa = n.parents[0];
        const auto& pb = n.parents[1];
        const auto g = detail::rmap(n.grad);
        if (detail::wants(pa))
            detail::rmap(pa->grad_buffer()).noalias() += g * detail::rmap(pb->value).transpose();
        if (detail::wants(pb))
            detail::rmap(pb->grad_buffer()).noalias() += detail::rmap(pa->value).transpose() * g;
    });
}

// ---- complex (paired) --------------------------------------------------
// Gradients of complex entries are stored as (dL/dRe, dL/dIm), which behaves like
// the conjugate cogradient: for C = AB the rules are gA = gC B^H, gB = A^H gC.

inline Var cmatmul(const Var& a, const Var& b)
{
    detail::require_complex_matrix(a.value(), "cmatmul");
    detail::require_complex_matrix(b.value(), "cmatmul");
    require_dims(a.dim(1) == b.dim(0), "cmatmul: inner dimensions differ " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    Tensor out({a.dim(0), b.dim(1), 2});
    detail::cmap(out).noalias() = detail::cmap(a.value()) * detail::cmap(b.value());
    return detail::make_op("cmatmul", std::move(out), {a, b}, [](Node& n) {
        const auto& pa = n.parents[0];
        const auto& pb = n.parents[1];
        const auto g = detail::cmap(n.grad);
        if (detail::wants(pa))
            detail::cmap(pa->grad_buffer()).noalias() += g * detail::cmap(pb->value).adjoint();
        if (detail::wants(pb))
            detail::cmap(pb->grad_buffer()).noalias() += detail::cmap(pa->value).adjoint() * g;
    });
}

inline Var conj_transpose(const Var& a)
{
    detail::require_complex_matrix(a.value(), "conj_transpose");
    Tensor out({a.dim(1), a.dim(0), 2});
    detail::cmap(out) = detail::cmap(a.value()).adjoint();
    return detail::make_op("conj_transpose", std::move(out), {a}, [](Node& n) {
        detail::cmap(n.parents[0]->grad_buffer()) += detail::cmap(n.grad).adjoint();
    });
}

/// Complex conjugate of any paired tensor.
inline Var conj(const Var& a)
{
    require_dims(a.shape().size() >= 1 && a.shape().back() == 2, "conj: trailing axis must hold (re, im)");
    Tensor out = a.value();
    for (std::size_t i = 1; i < out.size(); i += 2)
        out[i] = -out[i];
    return detail::make_op("conj", std::move(out), {a}, [](Node& n) {
        auto& g = n.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += (i % 2 ? -1.0 : 1.0) * n.grad[i];
    });
}

/// A^{-1} B for complex A. Backward solves with A^H instead of forming an inverse.
inline Var linear_solve(const Var& a, const Var& b)
{
    detail::require_complex_matrix(a.value(), "linear_solve");
    detail::require_complex_matrix(b.value(), "linear_solve");
    require_dims(a.dim(0) == a.dim(1), "linear_solve: A must be square");
    require_dims(b.dim(0) == a.dim(0), "linear_solve: B rows must match A");
    auto lu = std::make_shared<Eigen::PartialPivLU<detail::CRowMat>>(detail::CRowMat(detail::cmap(a.value())));
    const double rc = lu->rcond();
    if (!(rc > 1e-14))
        throw DegenerateSystemError("linear_solve: matrix is singular to working precision (rcond " + std::to_string(rc) + ")");
    Tensor out(b.shape());
    detail::cmap(out) = lu->solve(detail::CRowMat(detail::cmap(b.value())));
    return detail::make_op("linear_solve", std::move(out), {a, b}, [lu](Node& n) {
        const auto& pa = n.parents[0];
        const auto& pb = n.parents[1];
        const detail::CRowMat gb = lu->adjoint().solve(detail::CRowMat(detail::cmap(n.grad)));
        if (detail::wants(pb))
            detail::cmap(pb->grad_buffer()) += gb;
        if (detail::wants(pa))
            detail::cmap(pa->grad_buffer()).noalias() -= gb * detail::cmap(n.value).adjoint();
    });
}

/// |z|^2 of a paired tensor; drops the trailing axis.
inline Var sq_modulus(const Var& z)
{
    require_dims(!z.shape().empty() && z.shape().back() == 2, "sq_modulus: trailing axis must hold (re, im)");
    Shape os(z.shape().begin(), z.shape().end() - 1);
    Tensor out(os);
    const auto& v = z.value();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = v[2 * i] * v[2 * i] + v[2 * i + 1] * v[2 * i + 1];
    return detail::make_op("sq_modulus", std::move(out), {z}, [](Node& n) {
        const auto& p = n.parents[0];
        auto& g = p->grad_buffer();
        for (std::size_t i = 0; i < n.value.size(); ++i) {
            g[2 * i] += 2.0 * p->value[2 * i] * n.grad[i];
            g[2 * i + 1] += 2.0 * p->value[2 * i + 1] * n.grad[i];
        }
    });
}

/// Elementwise complex times real, z.shape = r.shape + (2,).
inline Var cmul_real(const Var& z, const Var& r)
{
    require_dims(z.shape().size() == r.shape().size() + 1 && z.shape().back() == 2 &&
                     std::equal(r.shape().begin(), r.shape().end(), z.shape().begin()),
                 "cmul_real: shape mismatch " + shape_str(z.shape()) + " vs " + shape_str(r.shape()));
    Tensor out = z.value();
    for (std::size_t i = 0; i < r.size(); ++i) {
        out[2 * i] *= r.value()[i];
        out[2 * i + 1] *= r.value()[i];
    }
    return detail::make_op("cmul_real", std::move(out), {z, r}, [](Node& n) {
        const auto& pz = n.parents[0];
        const auto& pr = n.parents[1];
        const std::size_t m = pr->value.size();
        if (detail::wants(pz)) {
            auto& g = pz->grad_buffer();
            for (std::size_t i = 0; i < m; ++i) {
                g[2 * i] += n.grad[2 * i] * pr->value[i];
                g[2 * i + 1] += n.grad[2 * i + 1] * pr->value[i];
            }
        }
        if (detail::wants(pr)) {
            auto& g = pr->grad_buffer();
            for (std::size_t i = 0; i < m; ++i)
                g[i] += n.grad[2 * i] * pz->value[2 * i] + n.grad[2 * i + 1] * pz->value[2 * i + 1];
        }
    });
}

/// Z diag(r): column j of the complex matrix scaled by the real r[j].
inline Var scale_cols(const Var& z, const Var& r)
{
    detail::require_complex_matrix(z.value(), "scale_cols");
    require_dims(r.shape() == Shape{z.dim(1)}, "scale_cols: scale vector length must equal column count");
    const std::size_t rows = z.dim(0), cols = z.dim(1);
    Tensor out = z.value();
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            out[2 * (i * cols + j)] *= r.value()[j];
            out[2 * (i * cols + j) + 1] *= r.value()[j];
        }
    return detail::make_op("scale_cols", std::move(out), {z, r}, [rows, cols](Node& n) {
        const auto& pz = n.parents[0];
        const auto& pr = n.parents[1];
        const bool gz = detail::wants(pz), gr = detail::wants(pr);
        Tensor* bz = gz ? &pz->grad_buffer() : nullptr;
        Tensor* br = gr ? &pr->grad_buffer() : nullptr;
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j) {
                const std::size_t o = 2 * (i * cols + j);
                if (gz) {
                    (*bz)[o] += n.grad[o] * pr->value[j];
                    (*bz)[o + 1] += n.grad[o + 1] * pr->value[j];
                }
                if (gr)
                    (*br)[j] += n.grad[o] * pz->value[o] + n.grad[o + 1] * pz->value[o + 1];
            }
    });
}

/// Re(sum_i conj(a_ij) b_ij) per column j.
inline Var re_inner_cols(const Var& a, const Var& b)
{
    detail::require_complex_matrix(a.value(), "re_inner_cols");
    require_same_shape(a.value(), b.value(), "re_inner_cols");
    const std::size_t rows = a.dim(0), cols = a.dim(1);
    Tensor out({cols});
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            const std::size_t o = 2 * (i * cols + j);
            out[j] += a.value()[o] * b.value()[o] + a.value()[o + 1] * b.value()[o + 1];
        }
    return detail::make_op("re_inner_cols", std::move(out), {a, b}, [rows, cols](Node& n) {
        for (int s = 0; s < 2; ++s) {
            const auto& p = n.parents[s];
            if (!detail::wants(p))
                continue;
            const auto& other = n.parents[1 - s]->value;
            auto& g = p->grad_buffer();
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j) {
                    const std::size_t o = 2 * (i * cols + j);
                    g[o] += n.grad[j] * other[o];
                    g[o + 1] += n.grad[j] * other[o + 1];
                }
        }
    });
}

/// Kronecker product of complex matrices.
inline Var ckron(const Var& a, const Var& b)
{
    detail::require_complex_matrix(a.value(), "ckron");
    detail::require_complex_matrix(b.value(), "ckron");
    const std::size_t m = a.dim(0), n = a.dim(1), p = b.dim(0), q = b.dim(1);
    Tensor out({m * p, n * q, 2});
    {
        const auto A = detail::cmap(a.value());
        const auto B = detail::cmap(b.value());
        auto O = detail::cmap(out);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
                O.block(i * p, j * q, p, q) = A(i, j) * B;
    }
    return detail::make_op("ckron", std::move(out), {a, b}, [m, n, p, q](Node& nd) {
        const auto& pa = nd.parents[0];
        const auto& pb = nd.parents[1];
        const auto G = detail::cmap(nd.grad);
        const auto A = detail::cmap(pa->value);
        const auto B = detail::cmap(pb->value);
        if (detail::wants(pa)) {
            auto gA = detail::cmap(pa->grad_buffer());
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    gA(i, j) += (B.conjugate().cwiseProduct(G.block(i * p, j * q, p, q))).sum();
        }
        if (detail::wants(pb)) {
            auto gB = detail::cmap(pb->grad_buffer());
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j)
                    gB += std::conj(A(i, j)) * G.block(i * p, j * q, p, q);
        }
    });
}

/// I_reps (x) X for a square complex X.
inline Var kron_identity(const Var& x, std::size_t reps)
{
    detail::require_complex_matrix(x.value(), "kron_identity");
    require_dims(x.dim(0) == x.dim(1), "kron_identity: block must be square");
    const std::size_t b = x.dim(0);
    Tensor out({b * reps, b * reps, 2});
    {
        auto O = detail::cmap(out);
        for (std::size_t r = 0; r < reps; ++r)
            O.block(r * b, r * b, b, b) = detail::cmap(x.value());
    }
    return detail::make_op("kron_identity", std::move(out), {x}, [b, reps](Node& n) {
        auto g = detail::cmap(n.parents[0]->grad_buffer());
        const auto G = detail::cmap(n.grad);
        for (std::size_t r = 0; r < reps; ++r)
            g += G.block(r * b, r * b, b, b);
    });
}

/// theta -> (cos theta, sin theta) * amplitude, appending a trailing (re, im) axis.
inline Var phase_to_complex(const Var& theta, double amplitude)
{
    Shape os = theta.shape();
    os.push_back(2);
    Tensor out(os);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        out[2 * i] = amplitude * std::cos(theta.value()[i]);
        out[2 * i + 1] = amplitude * std::sin(theta.value()[i]);
    }
    return detail::make_op("phase_to_complex", std::move(out), {theta}, [](Node& n) {
        auto& g = n.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
            g[i] += -n.value[2 * i + 1] * n.grad[2 * i] + n.value[2 * i] * n.grad[2 * i + 1];
    });
}

// ---- convolution -------------------------------------------------------

enum class Padding { Circular, Zero };

/// Stride-1 "same" 3-D cross-correlation.
/// x: (D0, D1, D2, Cin), w: (F0, F1, F2, Cin, Cout) with odd F, bias: (Cout).
inline Var conv3d(const Var& x, const Var& w, const Var& bias, std::array<Padding, 3> pad)
{
    const Shape& xs = x.shape();
    const Shape& ws = w.shape();
    require_dims(xs.size() == 4, "conv3d: input must be (D0, D1, D2, Cin), got " + shape_str(xs));
    require_dims(ws.size() == 5, "conv3d: filters must be (F0, F1, F2, Cin, Cout), got " + shape_str(ws));
    require_dims(ws[3] == xs[3], "conv3d: filter input channels " + std::to_string(ws[3]) + " vs input " + std::to_string(xs[3]));
    for (int d = 0; d < 3; ++d)
        require_dims(ws[d] % 2 == 1, "conv3d: filter extents must be odd");
    require_dims(bias.shape() == Shape{ws[4]}, "conv3d: bias must have one entry per output channel");

    const std::array<std::size_t, 3> n{xs[0], xs[1], xs[2]};
    const std::array<std::size_t, 3> f{ws[0], ws[1], ws[2]};
    const std::size_t ci = ws[3], co = ws[4];

    // taps[pos] lists (filter tap offset, source position) pairs, computed once
    struct Tap {
        std::size_t w_off;
        std::size_t x_off;
    };
    const std::size_t npos = n[0] * n[1] * n[2];
    auto taps = std::make_shared<std::vector<std::vector<Tap>>>(npos);
    auto source = [&](int d, std::size_t i, std::size_t u, std::size_t& out) {
        const long s = static_cast<long>(i) + static_cast<long>(u) - static_cast<long>(f[d] / 2);
        const long len = static_cast<long>(n[d]);
        if (pad[d] == Padding::Circular) {
            out = static_cast<std::size_t>(((s % len) + len) % len);
            return true;
        }
        if (s < 0 || s >= len)
            return false;
        out = static_cast<std::size_t>(s);
        return true;
    };
    for (std::size_t i0 = 0; i0 < n[0]; ++i0)
        for (std::size_t i1 = 0; i1 < n[1]; ++i1)
            for (std::size_t i2 = 0; i2 < n[2]; ++i2) {
                auto& list = (*taps)[(i0 * n[1] + i1) * n[2] + i2];
                for (std::size_t u0 = 0; u0 < f[0]; ++u0) {
                    std::size_t s0;
                    if (!source(0, i0, u0, s0))
                        continue;
                    for (std::size_t u1 = 0; u1 < f[1]; ++u1) {
                        std::size_t s1;
                        if (!source(1, i1, u1, s1))
                            continue;
                        for (std::size_t u2 = 0; u2 < f[2]; ++u2) {
                            std::size_t s2;
                            if (!source(2, i2, u2, s2))
                                continue;
                            list.push_back({((u0 * f[1] + u1) * f[2] + u2) * ci * co, ((s0 * n[1] + s1) * n[2] + s2) * ci});
                        }
                    }
                }
            }

    Tensor out({n[0], n[1], n[2], co});
    const auto& xv = x.value().data;
    const auto& wv = w.value().data;
    const auto& bv = bias.value().data;
    for (std::size_t pos = 0; pos < npos; ++pos) {
        double* o = out.data.data() + pos * co;
        for (std::size_t c = 0; c < co; ++c)
            o[c] = bv[c];
        for (const auto& t : (*taps)[pos])
            for (std::size_t c = 0; c < ci; ++c) {
                const double xval = xv[t.x_off + c];
                const double* wr = wv.data() + t.w_off + c * co;
                for (std::size_t k = 0; k < co; ++k)
                    o[k] += wr[k] * xval;
            }
    }

    return detail::make_op("conv3d", std::move(out), {x, w, bias}, [taps, npos, ci, co](Node& nd) {
        const auto& px = nd.parents[0];
        const auto& pw = nd.parents[1];
        const auto& pb = nd.parents[2];
        const bool gx = detail::wants(px), gw = detail::wants(pw), gb = detail::wants(pb);
        double* bx = gx ? px->grad_buffer().data.data() : nullptr;
        double* bw = gw ? pw->grad_buffer().data.data() : nullptr;
        double* bb = gb ? pb->grad_buffer().data.data() : nullptr;
        const double* xv = px->value.data.data();
        const double* wv = pw->value.data.data();
        for (std::size_t pos = 0; pos < npos; ++pos) {
            const double* g = nd.grad.data.data() + pos * co;
            if (gb)
                for (std::size_t k = 0; k < co; ++k)
                    bb[k] += g[k];
            for (const auto& t : (*taps)[pos])
                for (std::size_t c = 0; c < ci; ++c) {
                    const double* wr = wv + t.w_off + c * co;
                    if (gx) {
                        double acc = 0.0;
                        for (std::size_t k = 0; k < co; ++k)
                            acc += wr[k] * g[k];
                        bx[t.x_off + c] += acc;
                    }
                    if (gw) {
                        const double xval = xv[t.x_off + c];
                        double* gwr = bw + t.w_off + c * co;
                        for (std::size_t k = 0; k < co; ++k)
                            gwr[k] += xval * g[k];
                    }
                }
        }
    });
}

} // namespace sblu::ad
