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
#include "sblu/config.hpp"
#include "sblu/core.hpp"
#include "sblu/rng.hpp"

#include <cmath>
#include <utility>

namespace sblu {

/// Phase-shifter settings; W = exp(j w_phase) / sqrt(N_R), F = exp(j f_phase) / sqrt(N_T).
struct BeamPhases {
    RMatrix w_phase; // N_R x M_R
    RMatrix f_phase; // N_T x M_T
};

inline BeamPhases random_phases(const SystemConfig& sys, Rng& rng)
{
    BeamPhases p;
    p.w_phase.resize(static_cast<Eigen::Index>(sys.n_rx), static_cast<Eigen::Index>(sys.m_rx));
    p.f_phase.resize(static_cast<Eigen::Index>(sys.n_tx), static_cast<Eigen::Index>(sys.m_tx));
    for (Eigen::Index j = 0; j < p.w_phase.cols(); ++j)
        for (Eigen::Index i = 0; i < p.w_phase.rows(); ++i)
            p.w_phase(i, j) = rng.uniform(0.0, 2.0 * kPi);
    for (Eigen::Index j = 0; j < p.f_phase.cols(); ++j)
        for (Eigen::Index i = 0; i < p.f_phase.rows(); ++i)
            p.f_phase(i, j) = rng.uniform(0.0, 2.0 * kPi);
    return p;
}

/// Constant-modulus matrix with entries exp(j phase) / sqrt(rows).
inline CMatrix phases_to_matrix(const RMatrix& phase)
{
    const double norm = 1.0 / std::sqrt(static_cast<double>(phase.rows()));
    CMatrix m(phase.rows(), phase.cols());
    for (Eigen::Index j = 0; j < phase.cols(); ++j)
        for (Eigen::Index i = 0; i < phase.rows(); ++i)
            m(i, j) = std::polar(norm, phase(i, j));
    return m;
}

inline std::pair<CMatrix, CMatrix> phases_to_beams(const BeamPhases& phases)
{
    return {phases_to_matrix(phases.w_phase), phases_to_matrix(phases.f_phase)};
}

/// The two Kronecker factors of Phi = (F^T A_T^*) kron (W^H A_R).
struct KroneckerFactors {
    CMatrix b_tx; // M_T x G, F^T A_T^*
    CMatrix b_rx; // M_R x G, W^H A_R
};

inline KroneckerFactors kronecker_factors(const CMatrix& w, const CMatrix& f, const Dictionaries& dict)
{
    require_dims(w.rows() == dict.a_rx.rows(), "build_phi: W rows must equal N_R");
    require_dims(f.rows() == dict.a_tx.rows(), "build_phi: F rows must equal N_T");
    return {f.transpose() * dict.a_tx.conjugate(), w.adjoint() * dict.a_rx};
}

/// Kronecker product a kron b.
inline CMatrix kron(const CMatrix& a, const CMatrix& b)
{
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

/// Measurement matrix Phi = (F^T kron W^H)(A_T^* kron A_R), (M_R M_T x G^2), built in factored form.
inline CMatrix build_phi(const CMatrix& w, const CMatrix& f, const Dictionaries& dict)
{
    const KroneckerFactors kf = kronecker_factors(w, f, dict);
    return kron(kf.b_tx, kf.b_rx);
}

/// Effective noise covariance I_{M_T} kron Blkdiag(s2 W_1^H W_1, ..., s2 W_Q^H W_Q) over consecutive
/// combiner groups of n_rf_rx columns.
inline CMatrix noise_covariance(const CMatrix& w, double noise_var, std::size_t m_tx, std::size_t n_rf_rx)
{
    const Eigen::Index m_rx = w.cols();
    const auto rf = static_cast<Eigen::Index>(n_rf_rx);
    if (rf == 0 || m_rx % rf != 0)
        throw ConfigError("noise_covariance: M_R must be divisible by n_rf_rx");
    CMatrix block = CMatrix::Zero(m_rx, m_rx);
    for (Eigen::Index q = 0; q < m_rx / rf; ++q) {
        const auto wq = w.middleCols(q * rf, rf);
        block.block(q * rf, q * rf, rf, rf) = noise_var * (wq.adjoint() * wq);
    }
    const auto mt = static_cast<Eigen::Index>(m_tx);
    CMatrix r = CMatrix::Zero(mt * m_rx, mt * m_rx);
    for (Eigen::Index p = 0; p < mt; ++p)
        r.block(p * m_rx, p * m_rx, m_rx, m_rx) = block;
    return r;
}

/// Everything the estimators need about one measurement configuration.
struct MeasurementSetup {
    CMatrix w;         // N_R x M_R
    CMatrix f;         // N_T x M_T
    CMatrix phi;       // M_R M_T x G^2
    CMatrix noise_cov; // M_R M_T x M_R M_T
    KroneckerFactors factors;
    double noise_var = 0.0;
    std::size_t n_rf_rx = 1;

    std::size_t m_rx() const { return static_cast<std::size_t>(w.cols()); }
    std::size_t m_tx() const { return static_cast<std::size_t>(f.cols()); }
};

inline MeasurementSetup make_setup(const CMatrix& w, const CMatrix& f, const Dictionaries& dict, double noise_var, std::size_t n_rf_rx)
{
    MeasurementSetup s;
    s.w = w;
    s.f = f;
    s.factors = kronecker_factors(w, f, dict);
    s.phi = kron(s.factors.b_tx, s.factors.b_rx);
    s.noise_cov = noise_covariance(w, noise_var, static_cast<std::size_t>(f.cols()), n_rf_rx);
    s.noise_var = noise_var;
    s.n_rf_rx = n_rf_rx;
    return s;
}

inline MeasurementSetup make_setup(const BeamPhases& phases, const Dictionaries& dict, const SystemConfig& sys)
{
    const auto [w, f] = phases_to_beams(phases);
    return make_setup(w, f, dict, sys.noise_var, sys.n_rf_rx);
}

/// Compressed pilots, (M_R M_T x K); column k-1 is vec(Y^k).
struct ReceivedSignal {
    CMatrix y;
};

/// Per subcarrier, transmit beam p and combiner group q: y = W_q^H (H^k f_p + n), n ~ CN(0, s2 I).
/// Pilot symbol is 1.
inline ReceivedSignal measure(const MatrixStack& h, const MeasurementSetup& setup, double noise_var, Rng& rng)
{
    const Eigen::Index m_rx = setup.w.cols();
    const Eigen::Index m_tx = setup.f.cols();
    const Eigen::Index n_rx = setup.w.rows();
    const auto rf = static_cast<Eigen::Index>(setup.n_rf_rx);
    require_dims(rf > 0 && m_rx % rf == 0, "measure: M_R must be divisible by n_rf_rx");
    ReceivedSignal out;
    out.y.resize(m_rx * m_tx, static_cast<Eigen::Index>(h.size()));
    for (std::size_t k = 0; k < h.size(); ++k) {
        require_dims(h[k].rows() == n_rx && h[k].cols() == setup.f.rows(), "measure: channel shape mismatch");
        for (Eigen::Index p = 0; p < m_tx; ++p) {
            const CVector hf = h[k] * setup.f.col(p);
            for (Eigen::Index q = 0; q < m_rx / rf; ++q) {
                CVector rx = hf;
                if (noise_var > 0.0)
                    for (Eigen::Index i = 0; i < n_rx; ++i)
                        rx(i) += rng.cnormal(noise_var);
                out.y.col(static_cast<Eigen::Index>(k)).segment(p * m_rx + q * rf, rf) = setup.w.middleCols(q * rf, rf).adjoint() * rx;
            }
        }
    }
    return out;
}

/// Channel uses needed to sweep all beams: the compressed scheme needs M_T M_R / N_R^RF, the LS
/// baseline N_T N_R / N_R^RF.
struct PilotOverhead {
    std::size_t compressed_uses = 0;
    std::size_t ls_uses = 0;
    double ratio() const { return static_cast<double>(ls_uses) / static_cast<double>(compressed_uses); }
};

inline PilotOverhead pilot_overhead(const SystemConfig& sys)
{
    return {sys.m_tx * sys.m_rx / sys.n_rf_rx, sys.n_tx * sys.n_rx / sys.n_rf_rx};
}

} // namespace sblu
