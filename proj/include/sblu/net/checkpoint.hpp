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

#include "sblu/io/config.hpp"
#include "sblu/io/container.hpp"
#include "sblu/io/hash.hpp"
#include "sblu/net/sblnet.hpp"

#include <string>

namespace sblu::net {

inline constexpr const char* kCheckpointKind = "checkpoint";

/// Tensor names: layer<i>.{w1,b1,w2,b2}, w_phase, f_phase, combiner.{w1,b1,w2,b2}.
inline io::Container checkpoint_container(const NetworkParams& net, const SystemConfig& sys)
{
    io::Container c;
    c.meta.emplace_back("kind", kCheckpointKind);
    c.meta.emplace_back("stage", net.stage);
    io::append_fields(c.meta, sys);
    io::append_fields(c.meta, net.cfg);
    auto add = [&](const std::string& name, const Var& v) { c.tensors.push_back({name, v.value(), 64}); };
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const std::string p = "layer" + std::to_string(i) + ".";
        add(p + "w1", net.layers[i].w1);
        add(p + "b1", net.layers[i].b1);
        add(p + "w2", net.layers[i].w2);
        add(p + "b2", net.layers[i].b2);
    }
    add("w_phase", net.w_phase);
    add("f_phase", net.f_phase);
    if (net.combiner) {
        add("combiner.w1", net.combiner->w1);
        add("combiner.b1", net.combiner->b1);
        add("combiner.w2", net.combiner->w2);
        add("combiner.b2", net.combiner->b2);
    }
    return c;
}

struct Checkpoint {
    SystemConfig sys;
    NetworkParams net;
};

inline Checkpoint checkpoint_from_container(const io::Container& c)
{
    const auto* kind = c.meta_value("kind");
    if (!kind || *kind != kCheckpointKind)
        throw io::FormatError("container is not a checkpoint");
    Checkpoint ck;
    for (const auto& [k, v] : c.meta) {
        if (k == "kind")
            continue;
        if (k == "stage")
            ck.net.stage = v;
        else if (!io::apply_field(ck.sys, k, v) && !io::apply_field(ck.net.cfg, k, v))
            throw io::FormatError("checkpoint: unknown metadata key '" + k + "'");
    }
    ck.sys.validate();
    ck.net.cfg.validate();
    const std::size_t F = ck.net.cfg.filter_size, NF = ck.net.cfg.filters, G = ck.sys.grid, nm = ck.sys.n_rx * ck.sys.m_rx;
    auto get = [&](const std::string& name, const ad::Shape& want) {
        const Tensor& t = c.at(name);
        if (t.shape != want)
            throw io::FormatError("checkpoint: tensor '" + name + "' has shape " + ad::shape_str(t.shape) + ", expected " +
                                  ad::shape_str(want));
        return ad::parameter(t);
    };
    for (std::size_t i = 0; i < ck.net.cfg.layers; ++i) {
        const std::string p = "layer" + std::to_string(i) + ".";
        ck.net.layers.push_back({get(p + "w1", {F, F, F, ck.net.cfg.in_channels(), NF}), get(p + "b1", {NF}),
                                 get(p + "w2", {F, F, F, NF, 1}), get(p + "b2", {1})});
    }
    ck.net.w_phase = get("w_phase", {ck.sys.n_rx, ck.sys.m_rx});
    ck.net.f_phase = get("f_phase", {ck.sys.n_tx, ck.sys.m_tx});
    if (c.find("combiner.w1"))
        ck.net.combiner = CombinerNet{get("combiner.w1", {G, nm / 2}), get("combiner.b1", {1, nm / 2}), get("combiner.w2", {nm / 2, nm}),
                                      get("combiner.b2", {1, nm})};
    if (ck.net.cfg.multi_block && !ck.net.combiner)
        throw io::FormatError("checkpoint: multi-block net without combiner head");
    return ck;
}

inline void save_checkpoint(const std::string& path, const NetworkParams& net, const SystemConfig& sys)
{
    io::save_container(path, checkpoint_container(net, sys));
}

inline Checkpoint load_checkpoint(const std::string& path) { return checkpoint_from_container(io::load_container(path)); }

/// Content hash logged with every run that uses the checkpoint.
inline std::string checkpoint_hash(const std::string& path) { return io::git_blob_hash(io::read_file(path)); }

} // namespace sblu::net
