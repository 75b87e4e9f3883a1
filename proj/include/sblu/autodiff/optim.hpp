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
#include "sblu/rng.hpp"

#include <cmath>
#include <functional>

namespace sblu::ad {

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t step = 0;
    std::vector<std::vector<double>> m, v;
};

/// One bias-corrected Adam update of every parameter that currently requires grad.
inline void adam_step(std::vector<Var>& params, AdamState& st)
{
    if (st.m.size() != params.size()) {
        st.m.assign(params.size(), {});
        st.v.assign(params.size(), {});
        for (std::size_t i = 0; i < params.size(); ++i) {
            st.m[i].assign(params[i].size(), 0.0);
            st.v[i].assign(params[i].size(), 0.0);
        }
    }
    ++st.step;
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i];
        require_dims(st.m[i].size() == p.size(), "adam_step: moment shape does not match parameter");
        if (!p.requires_grad())
            continue;
        const auto& g = p.grad().data;
        auto& val = p.mutable_value().data;
        for (std::size_t j = 0; j < val.size(); ++j) {
            st.m[i][j] = st.beta1 * st.m[i][j] + (1.0 - st.beta1) * g[j];
            st.v[i][j] = st.beta2 * st.v[i][j] + (1.0 - st.beta2) * g[j] * g[j];
            const double mh = st.m[i][j] / c1;
            const double vh = st.v[i][j] / c2;
            val[j] -= st.lr * mh / (std::sqrt(vh) + st.eps);
        }
    }
}

/// Glorot-uniform. Dense (in, out) or conv (F0, F1, F2, in, out).
inline Tensor xavier_init(const Shape& shape, Rng& rng)
{
    std::size_t fan_in = 0, fan_out = 0;
    if (shape.size() == 2) {
        fan_in = shape[0];
        fan_out = shape[1];
    } else if (shape.size() >= 3) {
        std::size_t field = 1;
        for (std::size_t i = 0; i + 2 < shape.size(); ++i)
            field *= shape[i];
        fan_in = field * shape[shape.size() - 2];
        fan_out = field * shape.back();
    } else {
        throw DimensionError("xavier_init: need a dense or filter shape, got " + shape_str(shape));
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor t(shape);
    for (auto& v : t.data)
        v = rng.uniform(-bound, bound);
    return t;
}

struct GradCheckOptions {
    double eps = 1e-4;
    std::size_t max_coords = 64; // per parameter; larger ones are subsampled
    std::uint64_t seed = 0;
};

/// Worst relative error between backward() and central differences over params.
inline double grad_check(const std::function<Var()>& f, std::vector<Var> params, GradCheckOptions opt = {})
{
    zero_grad(params);
    backward(f());
    std::vector<std::vector<double>> analytic;
    for (auto& p : params)
        analytic.push_back(p.grad().data);

    Rng rng(opt.seed);
    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& val = params[pi].mutable_value().data;
        std::vector<std::size_t> coords(val.size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (coords.size() > opt.max_coords) {
            std::shuffle(coords.begin(), coords.end(), rng.engine());
            coords.resize(opt.max_coords);
        }
        for (auto j : coords) {
            const double keep = val[j];
            val[j] = keep + opt.eps;
            const double up = f().item();
            val[j] = keep - opt.eps;
            const double down = f().item();
            val[j] = keep;
            const double numeric = (up - down) / (2.0 * opt.eps);
            const double a = analytic[pi][j];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    }
    return worst;
}

} // namespace sblu::ad
