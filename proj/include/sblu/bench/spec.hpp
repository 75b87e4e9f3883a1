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

#include "sblu/channel.hpp"
#include "sblu/io/config.hpp"
#include "sblu/io/container.hpp"
#include "sblu/sbl.hpp"

#include <optional>
#include <string>
#include <vector>

namespace sblu::bench {

/// Everything a run depends on. Parsed from a flat key=value file; see README for the keys.
struct ExperimentSpec {
    SystemConfig sys;
    ChannelConfig chan;
    std::optional<TemporalConfig> temporal; // two-block sequences when set
    net::NetConfig net;
    net::TrainConfig train;

    std::vector<std::string> estimators = {"sbl", "msbl", "pcsbl"};
    std::size_t trials = 300;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::size_t max_iters = 300;
    double tol = 1e-6;
    bool timing = false; // wall-clock column; off keeps the CSV reproducible

    std::string sweep_param; // empty: no sweep
    std::vector<double> sweep_values;

    // unset: chosen by hyper_sweep on validation draws
    std::optional<PCSBLHyper> pcsbl;
    std::optional<PCSBLHyper> mpcsbl;
    std::vector<double> beta_grid = {0.0, 0.1, 0.5, 1.0};
    std::vector<double> a_grid = {0.5, 1.0};
    std::vector<double> b_grid = {0.0, 1e-4};
    std::size_t validation_trials = 20;

    std::size_t dataset_size = 10000;
    std::string checkpoint;       // single-block network
    std::string checkpoint_multi; // multi-block network

    void validate() const
    {
        sys.validate();
        chan.validate();
        if (temporal)
            temporal->validate();
        if (trials == 0)
            throw ConfigError("trials must be >= 1");
        if (workers == 0)
            throw ConfigError("workers must be >= 1");
        if (max_iters == 0)
            throw ConfigError("max_iters must be >= 1");
        if (estimators.empty())
            throw ConfigError("no estimators requested");
        if (beta_grid.empty() || a_grid.empty() || b_grid.empty())
            throw ConfigError("beta_grid, a_grid and b_grid must not be empty");
        if (!sweep_param.empty() && sweep_values.empty())
            throw ConfigError("sweep_param set without sweep_values");
        if (sweep_param.empty() && !sweep_values.empty())
            throw ConfigError("sweep_values set without sweep_param");
        if (pcsbl)
            pcsbl->validate();
        if (mpcsbl)
            mpcsbl->validate();
    }
};

inline std::string join(const std::vector<std::string>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out += (i ? "," : "") + v[i];
    return out;
}

inline std::string join(const std::vector<double>& v)
{
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i)
        out += (i ? "," : "") + io::format_number(v[i]);
    return out;
}

inline std::vector<double> parse_numbers(const std::string& s)
{
    std::vector<double> out;
    for (const auto& t : io::split_list(s))
        out.push_back(io::parse_number(t));
    return out;
}

/// Applies one key. Later keys override earlier ones.
inline void apply_key(ExperimentSpec& spec, TemporalConfig& temporal, bool& rho_explicit, std::size_t& blocks, const std::string& k,
                      const std::string& v)
{
    if (io::apply_field(spec.sys, k, v) || io::apply_field(spec.chan, k, v) || io::apply_field(spec.net, k, v) ||
        io::apply_field(spec.train, k, v))
        return;
    if (io::apply_field(temporal, k, v)) {
        rho_explicit = rho_explicit || k == "rho";
        return;
    }
    if (k.starts_with("pcsbl_")) {
        PCSBLHyper h = spec.pcsbl.value_or(PCSBLHyper{});
        if (!io::apply_field(h, k, v, "pcsbl_"))
            throw ConfigError("unknown key '" + k + "'");
        spec.pcsbl = h;
    } else if (k.starts_with("mpcsbl_")) {
        PCSBLHyper h = spec.mpcsbl.value_or(PCSBLHyper{});
        if (!io::apply_field(h, k, v, "mpcsbl_"))
            throw ConfigError("unknown key '" + k + "'");
        spec.mpcsbl = h;
    } else if (k == "snr_db") {
        spec.sys.noise_var = snr_db_to_noise_var(io::parse_number(v));
    } else if (k == "blocks") {
        blocks = static_cast<std::size_t>(io::parse_count(v));
        if (blocks != 1 && blocks != 2)
            throw ConfigError("blocks must be 1 or 2");
    } else if (k == "estimators") {
        spec.estimators = io::split_list(v);
    } else if (k == "trials") {
        spec.trials = static_cast<std::size_t>(io::parse_count(v));
    } else if (k == "seed") {
        spec.seed = io::parse_count(v);
    } else if (k == "workers") {
        spec.workers = static_cast<std::size_t>(io::parse_count(v));
    } else if (k == "max_iters") {
        spec.max_iters = static_cast<std::size_t>(io::parse_count(v));
    } else if (k == "tol") {
        spec.tol = io::parse_number(v);
    } else if (k == "timing") {
        io::parse_value(v, spec.timing);
    } else if (k == "sweep_param") {
        spec.sweep_param = v;
    } else if (k == "sweep_values") {
        spec.sweep_values = parse_numbers(v);
    } else if (k == "beta_grid") {
        spec.beta_grid = parse_numbers(v);
    } else if (k == "a_grid") {
        spec.a_grid = parse_numbers(v);
    } else if (k == "b_grid") {
        spec.b_grid = parse_numbers(v);
    } else if (k == "validation_trials") {
        spec.validation_trials = static_cast<std::size_t>(io::parse_count(v));
    } else if (k == "dataset_size") {
        spec.dataset_size = static_cast<std::size_t>(io::parse_count(v));
    } else if (k == "checkpoint") {
        spec.checkpoint = v;
    } else if (k == "checkpoint_multi") {
        spec.checkpoint_multi = v;
    } else {
        throw ConfigError("unknown key '" + k + "'");
    }
}

/// Builds a spec from defaults plus `kv`. With two blocks and no explicit rho, rho follows the
/// Doppler model of speed_mps, carrier_hz and block_s.
inline ExperimentSpec spec_from_kv(const io::KeyValues& kv)
{
    ExperimentSpec spec;
    TemporalConfig temporal;
    bool rho_explicit = false;
    std::size_t blocks = 1;
    for (const auto& [k, v] : kv)
        apply_key(spec, temporal, rho_explicit, blocks, k, v);
    if (blocks == 2) {
        if (!rho_explicit)
            temporal.rho = temporal_rho(temporal.speed_mps, spec.sys.carrier_hz, temporal.block_s);
        spec.temporal = temporal;
    }
    spec.train.seed = spec.seed;
    spec.validate();
    return spec;
}

inline ExperimentSpec load_spec(const std::string& path) { return spec_from_kv(io::parse_key_values(io::read_file(path))); }

/// Full key=value form of a spec; spec_from_kv(spec_to_kv(s)) reproduces s.
inline io::KeyValues spec_to_kv(const ExperimentSpec& spec)
{
    io::KeyValues kv;
    io::append_fields(kv, spec.sys);
    io::append_fields(kv, spec.chan);
    kv.emplace_back("blocks", spec.temporal ? "2" : "1");
    if (spec.temporal)
        io::append_fields(kv, *spec.temporal);
    io::append_fields(kv, spec.net);
    io::append_fields(kv, spec.train);
    kv.emplace_back("estimators", join(spec.estimators));
    kv.emplace_back("trials", std::to_string(spec.trials));
    kv.emplace_back("seed", std::to_string(spec.seed));
    kv.emplace_back("workers", std::to_string(spec.workers));
    kv.emplace_back("max_iters", std::to_string(spec.max_iters));
    kv.emplace_back("tol", io::format_number(spec.tol));
    kv.emplace_back("timing", io::format_value(spec.timing));
    if (!spec.sweep_param.empty()) {
        kv.emplace_back("sweep_param", spec.sweep_param);
        kv.emplace_back("sweep_values", join(spec.sweep_values));
    }
    if (spec.pcsbl)
        io::append_fields(kv, *spec.pcsbl, "pcsbl_");
    if (spec.mpcsbl)
        io::append_fields(kv, *spec.mpcsbl, "mpcsbl_");
    kv.emplace_back("beta_grid", join(spec.beta_grid));
    kv.emplace_back("a_grid", join(spec.a_grid));
    kv.emplace_back("b_grid", join(spec.b_grid));
    kv.emplace_back("validation_trials", std::to_string(spec.validation_trials));
    kv.emplace_back("dataset_size", std::to_string(spec.dataset_size));
    if (!spec.checkpoint.empty())
        kv.emplace_back("checkpoint", spec.checkpoint);
    if (!spec.checkpoint_multi.empty())
        kv.emplace_back("checkpoint_multi", spec.checkpoint_multi);
    return kv;
}

inline std::string kv_text(const io::KeyValues& kv)
{
    std::string out;
    for (const auto& [k, v] : kv)
        out += k + "=" + v + "\n";
    return out;
}

/// Spec with one swept value applied. `snr_db` or any system/channel field name.
inline ExperimentSpec at_sweep_point(ExperimentSpec spec, double value)
{
    if (spec.sweep_param.empty())
        return spec;
    const std::string v = io::format_number(value);
    if (spec.sweep_param == "snr_db")
        spec.sys.noise_var = snr_db_to_noise_var(value);
    else if (!io::apply_field(spec.sys, spec.sweep_param, v) && !io::apply_field(spec.chan, spec.sweep_param, v))
        throw ConfigError("cannot sweep '" + spec.sweep_param + "'");
    spec.sys.validate();
    spec.chan.validate();
    return spec;
}

} // namespace sblu::bench
