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

#include "sblu/core.hpp"

#include <algorithm>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

namespace sblu::ad {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s)
{
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& s)
{
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i)
        out += (i ? ", " : "") + std::to_string(s[i]);
    return out + ")";
}

/// Dense row-major real tensor. A trailing axis of length 2 holds (re, im) pairs.
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s, double fill = 0.0) : shape(std::move(s)), data(shape_size(shape), fill) {}
    Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d))
    {
        require_dims(data.size() == shape_size(shape), "Tensor: data length does not match shape " + shape_str(shape));
    }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }
    bool empty() const { return data.empty() && shape.empty(); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }

    static Tensor from_complex(const CMatrix& m)
    {
        Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()), 2});
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                const std::size_t o = 2 * (r * m.cols() + c);
                t.data[o] = m(r, c).real();
                t.data[o + 1] = m(r, c).imag();
            }
        return t;
    }

    CMatrix to_complex() const
    {
        require_dims(rank() == 3 && shape[2] == 2, "to_complex: expected (rows, cols, 2), got " + shape_str(shape));
        CMatrix m(shape[0], shape[1]);
        for (std::size_t r = 0; r < shape[0]; ++r)
            for (std::size_t c = 0; c < shape[1]; ++c) {
                const std::size_t o = 2 * (r * shape[1] + c);
                m(r, c) = {data[o], data[o + 1]};
            }
        return m;
    }

    static Tensor from_real(const RMatrix& m)
    {
        Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                t.data[r * m.cols() + c] = m(r, c);
        return t;
    }

    static Tensor from_vector(const RVector& v)
    {
        return Tensor({static_cast<std::size_t>(v.size())}, std::vector<double>(v.data(), v.data() + v.size()));
    }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op)
{
    require_dims(a.shape == b.shape, std::string(op) + ": shape mismatch " + shape_str(a.shape) + " vs " + shape_str(b.shape));
}

struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool leaf = true;
    std::string op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    // reads this->grad, accumulates into parents
    std::function<void(Node&)> backward_fn;

    Tensor& grad_buffer()
    {
        if (grad.shape != value.shape || grad.data.size() != value.data.size())
            grad = Tensor(value.shape);
        return grad;
    }
};

using NodePtr = std::shared_ptr<Node>;

/// Handle to a graph node. Copies share the node.
class Var {
public:
    Var() = default;
    explicit Var(NodePtr n) : node_(std::move(n)) {}

    const Tensor& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape; }
    std::size_t dim(std::size_t i) const { return node_->value.dim(i); }
    std::size_t size() const { return node_->value.size(); }
    double item() const
    {
        require_dims(size() == 1, "item: tensor is not a scalar");
        return node_->value.data[0];
    }

    Tensor& grad() { return node_->grad_buffer(); }
    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool on) { node_->requires_grad = on; }

    // direct access for optimizers; only valid on leaves
    Tensor& mutable_value()
    {
        if (!node_->leaf)
            throw std::logic_error("mutable_value on a non-leaf node");
        return node_->value;
    }

    const NodePtr& node() const { return node_; }
    explicit operator bool() const { return static_cast<bool>(node_); }

private:
    NodePtr node_;
};

inline Var parameter(Tensor t)
{
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    n->requires_grad = true;
    return Var(std::move(n));
}

inline Var constant(Tensor t)
{
    auto n = std::make_shared<Node>();
    n->value = std::move(t);
    return Var(std::move(n));
}

namespace detail {

// Backward closures get the output node and must only touch parents that require grad.
inline Var make_op(std::string op, Tensor value, std::vector<Var> inputs, std::function<void(Node&)> fn)
{
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->leaf = false;
    n->op = std::move(op);
    for (const auto& v : inputs)
        n->requires_grad = n->requires_grad || v.requires_grad();
    if (n->requires_grad) {
        for (const auto& v : inputs)
            n->parents.push_back(v.node());
        n->backward_fn = std::move(fn);
    }
    return Var(std::move(n));
}

inline bool wants(const NodePtr& p) { return p && p->requires_grad; }

} // namespace detail

/// Reverse pass from a scalar. Leaf gradients accumulate across calls; interior ones are reset.
inline void backward(const Var& loss)
{
    if (loss.size() != 1)
        throw DimensionError("backward: loss must be a scalar, got shape " + shape_str(loss.shape()));
    if (!loss.requires_grad())
        return;

    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->parents.size()) {
            Node* p = n->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second)
                stack.emplace_back(p, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    for (Node* n : order)
        if (!n->leaf)
            n->grad = Tensor(n->value.shape);
    loss.node()->grad_buffer().data[0] += 1.0;

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->leaf && n->backward_fn)
            n->backward_fn(*n);
    }
}

inline void zero_grad(std::vector<Var>& params)
{
    for (auto& p : params)
        std::fill(p.grad().data.begin(), p.grad().data.end(), 0.0);
}

} // namespace sblu::ad
