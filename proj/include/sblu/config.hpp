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

#include <cmath>
#include <cstddef>

namespace sblu {

/// Array, bandwidth, pilot and noise dimensions of one experiment.
/// Defaults are the typical single-block setting (N_T = N_R = 32, 16 x 16 beams, G = 64, K = 8, 20 dB).
struct SystemConfig {
    std::size_t n_tx = 32;    // N_T
    std::size_t n_rx = 32;    // N_R
    std::size_t n_rf_rx = 4;  // N_R^RF
    std::size_t n_rf_tx = 1;  // N_T^RF
    std::size_t m_tx = 16;    // M_T
    std::size_t m_rx = 16;    // M_R
    std::size_t grid = 64;    // G
    std::size_t n_sc = 8;     // K
    double carrier_hz = 28e9;
    double bandwidth_hz = 4e9;
    double noise_var = 0.01;  // SNR = 1 / noise_var

    std::size_t measurements() const { return m_tx * m_rx; }
    std::size_t grid_sq() const { return grid * grid; }
    std::size_t combiner_groups() const { return m_rx / n_rf_rx; }

    void validate() const
    {
        if (n_tx == 0 || n_rx == 0 || n_rf_rx == 0 || n_rf_tx == 0 || m_tx == 0 || m_rx == 0 || grid == 0 || n_sc == 0)
            throw ConfigError("all counts must be positive");
        if (m_rx % n_rf_rx != 0)
            throw ConfigError("m_rx must be an integer multiple of n_rf_rx");
        if (grid < n_tx || grid < n_rx)
            throw ConfigError("grid must be >= max(n_tx, n_rx)");
        if (!(carrier_hz > bandwidth_hz / 2.0))
            throw ConfigError("carrier_hz must exceed bandwidth_hz / 2");
        if (!(noise_var >= 0.0))
            throw ConfigError("noise_var must be >= 0");
    }
};

inline double snr_db_to_noise_var(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

/// Clustered channel parameters. Angular spread is shared by AoA and AoD.
struct ChannelConfig {
    std::size_t n_clusters = 3;                 // N_c
    std::size_t n_subpaths = 10;                // N_p
    double spread_rad = 5.0 * kPi / 180.0;
    double tau_max_s = 20e-9;

    void validate() const
    {
        if (n_clusters == 0 || n_subpaths == 0)
            throw ConfigError("cluster and subpath counts must be positive");
        if (!(spread_rad >= 0.0) || !(spread_rad < kPi / 2.0))
            throw ConfigError("spread_rad must lie in [0, pi/2)");
        if (!(tau_max_s >= 0.0))
            throw ConfigError("tau_max_s must be >= 0");
    }
};

/// Block-to-block channel evolution.
struct TemporalConfig {
    double speed_mps = 1.0;
    double block_s = 1e-3;
    double rho = 1.0;               // filled by temporal_rho() unless set explicitly
    bool angle_disturbance = false; // per-cluster U[-3deg, 3deg] angle drift between blocks

    void validate() const
    {
        if (!(std::abs(rho) <= 1.0))
            throw ConfigError("|rho| must be <= 1");
    }
};

} // namespace sblu
