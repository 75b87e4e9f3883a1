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

#include "sblu/net/sblnet.hpp"

namespace fixture {

// N_T = N_R = 8, 4 x 4 beams, 2 RF chains, G = 8, K = 2
inline sblu::SystemConfig tiny_system()
{
    sblu::SystemConfig s;
    s.n_tx = s.n_rx = 8;
    s.m_tx = s.m_rx = 4;
    s.n_rf_rx = 2;
    s.grid = 8;
    s.n_sc = 2;
    return s;
}

inline sblu::net::NetConfig tiny_net()
{
    sblu::net::NetConfig c;
    c.layers = 2;
    c.filters = 2;
    c.filter_size = 3;
    return c;
}

// Filters that make every layer output F1 + F2, the plain SBL variance update.
inline void set_copying_filters(sblu::net::NetworkParams& net)
{
    using sblu::ad::Tensor;
    const std::size_t f = net.cfg.filter_size, c = f / 2, ci = net.cfg.in_channels(), nf = net.cfg.filters;
    const std::size_t center = (c * f + c) * f + c;
    for (auto& l : net.layers) {
        Tensor w1({f, f, f, ci, nf});
        w1[(center * ci + 0) * nf + 0] = 1.0;
        w1[(center * ci + 1) * nf + 0] = 1.0;
        Tensor w2({f, f, f, nf, 1});
        w2[center * nf + 0] = 1.0;
        l.w1.mutable_value() = w1;
        l.w2.mutable_value() = w2;
        l.b1.mutable_value() = Tensor({nf});
        l.b2.mutable_value() = Tensor({1});
    }
}

} // namespace fixture
