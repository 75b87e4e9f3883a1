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
#include "sblu/core.hpp"
#include "sblu/rng.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace sblu {

/// Sines of the G uniform dictionary angles, sin(phi_i) = (2i - 1 - G) / G for i = 1..G.
inline std::vector<double> make_angular_grid(std::size_t grid_size)
{
    if (grid_size == 0)
        throw ConfigError("grid_size must be >= 1");
    std::vector<double> g(grid_size);
    const double G = static_cast<double>(grid_size);
    for (std::size_t i = 1; i <= grid_size; ++i)
        g[i - 1] = (2.0 * static_cast<double>(i) - 1.0 - G) / G;
    return g;
}

/// ULA response with half-wavelength spacing. `squint` is k f_s / (K f_c) for subcarrier k, or 0
/// for the frequency-flat dictionary columns.
inline CVector steering_vector(double sin_angle, std::size_t n_ant, double squint)
{
    if (n_ant == 0)
        throw ConfigError("n_ant must be >= 1");
    CVector a(static_cast<Eigen::Index>(n_ant));
    const double phase = -kPi * (1.0 + squint) * sin_angle;
    const double norm = 1.0 / std::sqrt(static_cast<double>(n_ant));
    for (std::size_t m = 0; m < n_ant; ++m)
        a(static_cast<Eigen::Index>(m)) = std::polar(norm, phase * static_cast<double>(m));
    return a;
}

/// Squint factor of the 1-based pilot subcarrier k.
inline double squint_factor(const SystemConfig& sys, std::size_t k)
{
    return static_cast<double>(k) * sys.bandwidth_hz / (static_cast<double>(sys.n_sc) * sys.carrier_hz);
}

/// (n_ant x G) dictionary of squint-free steering vectors over the grid.
inline CMatrix dictionary(std::span<const double> grid, std::size_t n_ant)
{
    CMatrix A(static_cast<Eigen::Index>(n_ant), static_cast<Eigen::Index>(grid.size()));
    for (std::size_t g = 0; g < grid.size(); ++g)
        A.col(static_cast<Eigen::Index>(g)) = steering_vector(grid[g], n_ant, 0.0);
    return A;
}

/// Receive and transmit dictionaries for one grid.
struct Dictionaries {
    std::vector<double> grid;
    CMatrix a_rx; // N_R x G
    CMatrix a_tx; // N_T x G

    Dictionaries() = default;
    Dictionaries(std::vector<double> g, std::size_t n_rx, std::size_t n_tx)
        : grid(std::move(g)), a_rx(dictionary(grid, n_rx)), a_tx(dictionary(grid, n_tx))
    {
        require_dims(grid.size() >= n_rx && grid.size() >= n_tx, "grid must be >= max antenna count");
    }

    explicit Dictionaries(const SystemConfig& sys) : Dictionaries(make_angular_grid(sys.grid), sys.n_rx, sys.n_tx) {}

    std::size_t size() const { return grid.size(); }
};

/// Per-path parameters of one clustered channel. Path (i, j) is stored at index i * n_subpaths + j.
struct PathParams {
    std::size_t n_clusters = 0;
    std::size_t n_subpaths = 0;
    std::vector<cplx> gains;
    std::vector<double> aoa_rad;
    std::vector<double> aod_rad;
    std::vector<double> delays_s;     // per cluster
    std::vector<double> cluster_aoa;  // per cluster mean AoA
    std::vector<double> cluster_aod;  // per cluster mean AoD

    std::size_t n_paths() const { return n_clusters * n_subpaths; }
};

/// Per-path parameters and the stacked frequency-domain channel; h[k-1] is H^k (N_R x N_T).
struct ChannelRealization {
    PathParams params;
    MatrixStack h;
};

/// Vectorized angular channel, (G^2 x K). Row g maps to (AoA grid g mod G, AoD grid g / G).
struct AngularChannel {
    CMatrix x;
};

/// Assemble H^1..H^K from path parameters with delay phase and beam squint.
inline MatrixStack build_channel(const SystemConfig& sys, const PathParams& p)
{
    MatrixStack h(sys.n_sc, CMatrix::Zero(static_cast<Eigen::Index>(sys.n_rx), static_cast<Eigen::Index>(sys.n_tx)));
    const double scale = std::sqrt(static_cast<double>(sys.n_tx * sys.n_rx) / static_cast<double>(p.n_paths()));
    for (std::size_t k = 1; k <= sys.n_sc; ++k) {
        const double squint = squint_factor(sys, k);
        const double fk = sys.bandwidth_hz * static_cast<double>(k) / static_cast<double>(sys.n_sc);
        CMatrix& hk = h[k - 1];
        for (std::size_t i = 0; i < p.n_clusters; ++i) {
            const cplx delay = std::polar(1.0, -2.0 * kPi * p.delays_s[i] * fk);
            for (std::size_t j = 0; j < p.n_subpaths; ++j) {
                const std::size_t idx = i * p.n_subpaths + j;
                const CVector ar = steering_vector(std::sin(p.aoa_rad[idx]), sys.n_rx, squint);
                const CVector at = steering_vector(std::sin(p.aod_rad[idx]), sys.n_tx, squint);
                hk.noalias() += (scale * p.gains[idx] * delay) * ar * at.adjoint();
            }
        }
    }
    return h;
}

/// Draw a clustered wideband channel: CN(0,1) gains, U[0, 2pi] cluster means, subpaths uniform within
/// +/- spread of the mean, U[0, tau_max] cluster delays.
inline ChannelRealization sample_channel(const SystemConfig& sys, const ChannelConfig& chan, Rng& rng)
{
    sys.validate();
    chan.validate();
    PathParams p;
    p.n_clusters = chan.n_clusters;
    p.n_subpaths = chan.n_subpaths;
    p.gains.resize(p.n_paths());
    p.aoa_rad.resize(p.n_paths());
    p.aod_rad.resize(p.n_paths());
    p.delays_s.resize(p.n_clusters);
    p.cluster_aoa.resize(p.n_clusters);
    p.cluster_aod.resize(p.n_clusters);
    for (std::size_t i = 0; i < p.n_clusters; ++i) {
        p.cluster_aoa[i] = rng.uniform(0.0, 2.0 * kPi);
        p.cluster_aod[i] = rng.uniform(0.0, 2.0 * kPi);
        p.delays_s[i] = chan.tau_max_s > 0.0 ? rng.uniform(0.0, chan.tau_max_s) : 0.0;
        for (std::size_t j = 0; j < p.n_subpaths; ++j) {
            const std::size_t idx = i * p.n_subpaths + j;
            p.gains[idx] = rng.cnormal();
            p.aoa_rad[idx] = p.cluster_aoa[i] + (chan.spread_rad > 0.0 ? rng.uniform(-chan.spread_rad, chan.spread_rad) : 0.0);
            p.aod_rad[idx] = p.cluster_aod[i] + (chan.spread_rad > 0.0 ? rng.uniform(-chan.spread_rad, chan.spread_rad) : 0.0);
        }
    }
    ChannelRealization r;
    r.h = build_channel(sys, p);
    r.params = std::move(p);
    return r;
}

/// X^k = (N_T N_R / G^2) A_R^H H^k A_T, vectorized column-major into column k-1.
inline AngularChannel to_angular(const MatrixStack& h, const Dictionaries& dict)
{
    const auto G = static_cast<Eigen::Index>(dict.size());
    AngularChannel out;
    out.x.resize(G * G, static_cast<Eigen::Index>(h.size()));
    for (std::size_t k = 0; k < h.size(); ++k) {
        require_dims(h[k].rows() == dict.a_rx.rows() && h[k].cols() == dict.a_tx.rows(),
                     "to_angular: channel does not match dictionary antenna counts");
        const double scale = static_cast<double>(h[k].rows() * h[k].cols()) / static_cast<double>(G * G);
        const CMatrix X = scale * (dict.a_rx.adjoint() * h[k] * dict.a_tx);
        out.x.col(static_cast<Eigen::Index>(k)) = X.reshaped();
    }
    return out;
}

inline AngularChannel to_angular(const ChannelRealization& r, const Dictionaries& dict) { return to_angular(r.h, dict); }

/// H^k = A_R X^k A_T^H.
inline MatrixStack from_angular(const AngularChannel& x, const Dictionaries& dict)
{
    const auto G = static_cast<Eigen::Index>(dict.size());
    require_dims(x.x.rows() == G * G, "from_angular: angular channel must have G^2 rows");
    MatrixStack h(static_cast<std::size_t>(x.x.cols()));
    for (Eigen::Index k = 0; k < x.x.cols(); ++k) {
        const CMatrix X = x.x.col(k).reshaped(G, G);
        h[static_cast<std::size_t>(k)] = dict.a_rx * X * dict.a_tx.adjoint();
    }
    return h;
}

/// Jakes' temporal correlation J0(2 pi f_D dt) with f_D = v f_c / c.
inline double temporal_rho(double speed_mps, double carrier_hz, double block_s)
{
    if (speed_mps < 0.0 || carrier_hz < 0.0 || block_s < 0.0)
        throw ConfigError("temporal_rho inputs must be >= 0");
    const double doppler = speed_mps * carrier_hz / kSpeedOfLight;
    return std::cyl_bessel_j(0.0, 2.0 * kPi * doppler * block_s);
}

/// Next block: AR(1) gains alpha[n] = rho alpha[n-1] + sqrt(1 - rho^2) w, angles and delays kept
/// (optionally perturbed per cluster), H rebuilt.
inline ChannelRealization evolve(const ChannelRealization& prev, const SystemConfig& sys, const TemporalConfig& temporal, Rng& rng)
{
    temporal.validate();
    ChannelRealization next;
    next.params = prev.params;
    PathParams& p = next.params;
    const double rho = temporal.rho;
    const double innov = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    for (auto& g : p.gains) {
        const cplx w = rng.cnormal();
        g = rho * g + innov * w;
    }
    if (temporal.angle_disturbance) {
        const double lim = 3.0 * kPi / 180.0;
        for (std::size_t i = 0; i < p.n_clusters; ++i) {
            const double d_aoa = rng.uniform(-lim, lim);
            const double d_aod = rng.uniform(-lim, lim);
            p.cluster_aoa[i] += d_aoa;
            p.cluster_aod[i] += d_aod;
            for (std::size_t j = 0; j < p.n_subpaths; ++j) {
                p.aoa_rad[i * p.n_subpaths + j] += d_aoa;
                p.aod_rad[i * p.n_subpaths + j] += d_aod;
            }
        }
    }
    next.h = build_channel(sys, p);
    return next;
}

} // namespace sblu
