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

#include "sblu/config.hpp"
#include "sblu/io/text.hpp"
#include "sblu/net/train.hpp"

#include <concepts>
#include <string>
#include <type_traits>

// Flat key=value mapping of the config structs. Keys are the struct field names.

namespace sblu::io {

template <class C, class F>
    requires std::same_as<std::remove_const_t<C>, SystemConfig>
void visit_fields(C& c, F&& f)
{
    f("n_tx", c.n_tx);
    f("n_rx", c.n_rx);
    f("n_rf_rx", c.n_rf_rx);
    f("n_rf_tx", c.n_rf_tx);
    f("m_tx", c.m_tx);
    f("m_rx", c.m_rx);
    f("grid", c.grid);
    f("n_sc", c.n_sc);
    f("carrier_hz", c.carrier_hz);
    f("bandwidth_hz", c.bandwidth_hz);
    f("noise_var", c.noise_var);
}

template <class C, class F>
    requires std::same_as<std::remove_const_t<C>, ChannelConfig>
void visit_fields(C& c, F&& f)
{
    f("n_clusters", c.n_clusters);
    f("n_subpaths", c.n_subpaths);
    f("spread_rad", c.spread_rad);
    f("tau_max_s", c.tau_max_s);
}

template <class C, class F>
    requires std::same_as<std::remove_const_t<C>, TemporalConfig>
void visit_fields(C& c, F&& f)
{
    f("speed_mps", c.speed_mps);
    f("block_s", c.block_s);
    f("rho", c.rho);
    f("angle_disturbance", c.angle_disturbance);
}

template <class C, class F>
    requires std::same_as<std::remove_const_t<C>, net::NetConfig>
void visit_fields(C& c, F&& f)
{
    f("layers", c.layers);
    f("filters", c.filters);
    f("filter_size", c.filter_size);
    f("multi_block", c.multi_block);
}

// seed and verbose come from the run, not the file
template <class C, class F>
    requires std::same_as<std::remove_const_t<C>, net::TrainConfig>
void visit_fields(C& c, F&& f)
{
    f("batch", c.batch);
    f("lr_stage12", c.lr_stage12);
    f("lr_stage3", c.lr_stage3);
    f("lr_decay", c.lr_decay);
    f("decay_patience", c.decay_patience);
    f("stop_patience", c.stop_patience);
    f("max_epochs", c.max_epochs);
}

template <class C, class F>
    requires std::same_as<std::remove_const_t<C>, PCSBLHyper>
void visit_fields(C& c, F&& f)
{
    f("beta", c.beta);
    f("a", c.a);
    f("b", c.b);
}

inline std::string format_value(bool v) { return v ? "true" : "false"; }
inline std::string format_value(double v) { return format_number(v); }
inline std::string format_value(std::size_t v) { return std::to_string(v); }

inline void parse_value(const std::string& s, bool& v)
{
    if (s == "true" || s == "1")
        v = true;
    else if (s == "false" || s == "0")
        v = false;
    else
        throw ConfigError("not a boolean: '" + s + "'");
}
inline void parse_value(const std::string& s, double& v) { v = parse_number(s); }
inline void parse_value(const std::string& s, std::size_t& v) { v = static_cast<std::size_t>(parse_count(s)); }

/// Appends `prefix + field = value` for every field.
template <class C>
void append_fields(KeyValues& out, const C& c, const std::string& prefix = "")
{
    visit_fields(c, [&](const char* name, const auto& v) { out.emplace_back(prefix + name, format_value(v)); });
}

/// Sets the field named `key` (after stripping `prefix`). False if no such field.
template <class C>
bool apply_field(C& c, const std::string& key, const std::string& value, const std::string& prefix = "")
{
    if (key.compare(0, prefix.size(), prefix) != 0)
        return false;
    const std::string name = key.substr(prefix.size());
    bool hit = false;
    visit_fields(c, [&](const char* field, auto& v) {
        if (!hit && name == field) {
            try {
                parse_value(value, v);
            } catch (const ConfigError& e) {
                throw ConfigError("key '" + key + "': " + e.what());
            }
            hit = true;
        }
    });
    return hit;
}

/// Reads every field of C from `kv`; unknown keys are an error.
template <class C>
C fields_from(const KeyValues& kv, C c = {})
{
    for (const auto& [k, v] : kv)
        if (!apply_field(c, k, v))
            throw ConfigError("unknown key '" + k + "'");
    return c;
}

inline const std::string* lookup(const KeyValues& kv, const std::string& key)
{
    for (const auto& [k, v] : kv)
        if (k == key)
            return &v;
    return nullptr;
}

} // namespace sblu::io
