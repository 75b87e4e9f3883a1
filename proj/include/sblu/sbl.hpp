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
#include "sblu/core.hpp"
#include "sblu/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>

namespace sblu {

enum class Variant { SBL, MSBL, PCSBL, MPCSBL };

inline std::string_view variant_name(Variant v)
{
    switch (v) {
    case Variant::SBL: return "sbl";
    case Variant::MSBL: return "msbl";
    case Variant::PCSBL: return "pcsbl";
    case Variant::MPCSBL: return "mpcsbl";
    }
    return "?";
}

inline std::optional<Variant> parse_variant(std::string_view s)
{
    for (Variant v : {Variant::SBL, Variant::MSBL, Variant::PCSBL, Variant::MPCSBL})
        if (variant_name(v) == s)
            return v;
    return std::nullopt;
}

inline bool shares_gamma(Variant v) { return v == Variant::MSBL || v == Variant::MPCSBL; }
inline bool pattern_coupled(Variant v) { return v == Variant::PCSBL || v == Variant::MPCSBL; }

/// Pattern-coupled prior: coupling beta, Gamma hyperprior shape a and inverse scale b.
/// (0, 0.5, 0) reduces PC-SBL to SBL.
struct PCSBLHyper {
    double beta = 0.0;
    double a = 0.5;
    double b = 0.0;

    void validate() const
    {
        if (!(beta >= 0.0) || !(a > 0.0) || !(b >= 0.0))
            throw ConfigError("PC-SBL hyperparameters require beta >= 0, a > 0, b >= 0");
    }
};

struct EstimatorOptions {
    Variant variant = Variant::SBL;
    std::size_t max_iters = 100;
    double tol = 1e-6; // relative Frobenius change of Gamma
    PCSBLHyper hyper;
    bool keep_gamma_history = false;

    void validate() const
    {
        if (max_iters == 0)
            throw ConfigError("max_iters must be >= 1");
        if (!(tol >= 0.0))
            throw ConfigError("tol must be >= 0");
        hyper.validate();
    }
};

/// Posterior mean and the diagonal of the posterior covariance for one variance vector.
struct EStepResult {
    CMatrix mu;    // G^2 x (number of right-hand sides)
    RVector omega; // G^2
};

namespace detail {

    /// Inverse of a Hermitian positive (semi)definite matrix. Adds jitter 1e-12 * trace / dim, growing
    /// by 100x per retry, when the Cholesky factorization fails.
    inline CMatrix hermitian_inverse(CMatrix c)
    {
        const Eigen::Index n = c.rows();
        const double tr = c.diagonal().real().sum();
        if (!(tr > 0.0) || !std::isfinite(tr))
            throw DegenerateSystemError("e_step: inner system Phi R_x Phi^H + R_n is singular");
        double jitter = 1e-12 * tr / static_cast<double>(n);
        for (int attempt = 0; attempt < 8; ++attempt) {
            Eigen::LLT<CMatrix> llt(c);
            if (llt.info() == Eigen::Success)
                return llt.solve(CMatrix::Identity(n, n));
            c.diagonal().array() += jitter;
            jitter *= 100.0;
        }
        throw DegenerateSystemError("e_step: inner system could not be factorized");
    }

    inline RVector finish_omega(const RVector& gamma, const RVector& quad)
    {
        RVector omega(gamma.size());
        for (Eigen::Index g = 0; g < gamma.size(); ++g)
            omega(g) = std::clamp(gamma(g) - gamma(g) * gamma(g) * quad(g), 0.0, gamma(g));
        return omega;
    }

} // namespace detail

/// E-step against an explicit measurement matrix:
/// mu = R_x Phi^H (Phi R_x Phi^H + R_n)^{-1} y, omega = diag(R_x - R_x Phi^H (.)^{-1} Phi R_x).
/// Works in the measurement space; the G^2 x G^2 posterior covariance is never formed.
inline EStepResult e_step(const RVector& gamma, const CMatrix& phi, const CMatrix& noise_cov, const CMatrix& y)
{
    require_dims(phi.cols() == gamma.size(), "e_step: gamma length must equal Phi columns");
    require_dims(noise_cov.rows() == phi.rows() && noise_cov.cols() == phi.rows(), "e_step: noise covariance shape");
    require_dims(y.rows() == phi.rows(), "e_step: y length must equal Phi rows");
    const CMatrix phi_g = phi * gamma.asDiagonal();
    const CMatrix inv = detail::hermitian_inverse(phi_g * phi.adjoint() + noise_cov);
    const CMatrix inv_phi = inv * phi;
    RVector quad(phi.cols());
    for (Eigen::Index g = 0; g < phi.cols(); ++g)
        quad(g) = phi.col(g).dot(inv_phi.col(g)).real();
    EStepResult r;
    r.mu = gamma.asDiagonal() * (phi.adjoint() * (inv * y));
    r.omega = detail::finish_omega(gamma, quad);
    return r;
}

/// E-step exploiting Phi = B_T kron B_R. Produces the same result as the dense form at a cost of
/// O(M_T^2 M_R^2 G + M_R^2 G^2) per call instead of O(M_R^2 M_T^2 G^2).
class KroneckerEStep {
public:
    KroneckerEStep(const KroneckerFactors& factors, CMatrix noise_cov) : f_(factors), noise_cov_(std::move(noise_cov))
    {
        const Eigen::Index G = f_.b_rx.cols();
        require_dims(f_.b_tx.cols() == G, "KroneckerEStep: factor grid sizes differ");
        const Eigen::Index mr = f_.b_rx.rows(), mt = f_.b_tx.rows();
        require_dims(noise_cov_.rows() == mr * mt && noise_cov_.cols() == mr * mt, "KroneckerEStep: noise covariance shape");
        rx_outer_.resize(G, mr * mr);
        for (Eigen::Index i = 0; i < G; ++i)
            for (Eigen::Index q = 0; q < mr; ++q)
                for (Eigen::Index q2 = 0; q2 < mr; ++q2)
                    rx_outer_(i, q * mr + q2) = f_.b_rx(q, i) * std::conj(f_.b_rx(q2, i));
        tx_outer_.resize(mt * mt, G);
        for (Eigen::Index j = 0; j < G; ++j)
            for (Eigen::Index p = 0; p < mt; ++p)
                for (Eigen::Index p2 = 0; p2 < mt; ++p2)
                    tx_outer_(p * mt + p2, j) = f_.b_tx(p, j) * std::conj(f_.b_tx(p2, j));
    }

    Eigen::Index grid() const { return f_.b_rx.cols(); }
    Eigen::Index measurements() const { return f_.b_rx.rows() * f_.b_tx.rows(); }

    EStepResult operator()(const RVector& gamma, const CMatrix& y) const
    {
        const Eigen::Index G = grid();
        const Eigen::Index mr = f_.b_rx.rows(), mt = f_.b_tx.rows();
        require_dims(gamma.size() == G * G, "e_step: gamma length must equal G^2");
        require_dims(y.rows() == mr * mt, "e_step: y length must equal M_R M_T");

        // C = Phi diag(gamma) Phi^H + R_n, accumulated as sum_j B_T[:,j] B_T[:,j]^H kron T_j.
        const Eigen::Map<const RMatrix> gamma_mat(gamma.data(), G, G); // (AoA i, AoD j)
        const CMatrix t = gamma_mat.transpose().cast<cplx>() * rx_outer_; // G_j x M_R^2
        const CMatrix c4 = tx_outer_ * t;                                  // M_T^2 x M_R^2
        CMatrix c = noise_cov_;
        for (Eigen::Index p = 0; p < mt; ++p)
            for (Eigen::Index p2 = 0; p2 < mt; ++p2)
                for (Eigen::Index q = 0; q < mr; ++q)
                    for (Eigen::Index q2 = 0; q2 < mr; ++q2)
                        c(p * mr + q, p2 * mr + q2) += c4(p * mt + p2, q * mr + q2);
        const CMatrix inv = detail::hermitian_inverse(std::move(c));

        // diag(Phi^H inv Phi) without forming Phi.
        CMatrix inv4(mt * mt, mr * mr);
        for (Eigen::Index p = 0; p < mt; ++p)
            for (Eigen::Index p2 = 0; p2 < mt; ++p2)
                for (Eigen::Index q = 0; q < mr; ++q)
                    for (Eigen::Index q2 = 0; q2 < mr; ++q2)
                        inv4(p * mt + p2, q * mr + q2) = inv(p * mr + q, p2 * mr + q2);
        const CMatrix e = tx_outer_.adjoint() * inv4;                     // G_j x M_R^2
        const CMatrix quad_mat = rx_outer_.conjugate() * e.transpose();  // G_i x G_j
        RVector quad(G * G);
        for (Eigen::Index j = 0; j < G; ++j)
            for (Eigen::Index i = 0; i < G; ++i)
                quad(i + G * j) = quad_mat(i, j).real();

        EStepResult r;
        r.mu.resize(G * G, y.cols());
        const CMatrix v = inv * y;
        for (Eigen::Index c_ = 0; c_ < y.cols(); ++c_) {
            const Eigen::Map<const CMatrix> vm(v.col(c_).data(), mr, mt);
            const CMatrix back = f_.b_rx.adjoint() * vm * f_.b_tx.conjugate(); // G x G
            r.mu.col(c_) = gamma.asDiagonal() * back.reshaped();
        }
        r.omega = detail::finish_omega(gamma, quad);
        return r;
    }

private:
    KroneckerFactors f_;
    CMatrix noise_cov_;
    CMatrix rx_outer_; // G x M_R^2, [i, (q,q')] = b_rx(q,i) conj(b_rx(q',i))
    CMatrix tx_outer_; // M_T^2 x G, [(p,p'), j] = b_tx(p,j) conj(b_tx(p',j))
};

/// SBL M-step: gamma = |mu|^2 + diag(Omega).
inline RVector m_step_sbl(const RVector& f1, const RVector& f2)
{
    require_dims(f1.size() == f2.size(), "m_step_sbl: feature lengths differ");
    return f1 + f2;
}

/// M-SBL M-step: mean over subcarriers of |mu_k|^2 plus the shared posterior variance.
inline RVector m_step_msbl(const RMatrix& f1, const RVector& f2_shared)
{
    require_dims(f1.rows() == f2_shared.size(), "m_step_msbl: feature lengths differ");
    return f1.rowwise().mean() + f2_shared;
}

/// Coupled statistic omega_ij = s_ij + beta (s_{i-1,j} + s_{i+1,j} + s_{i,j-1} + s_{i,j+1}) with
/// s = f1 + f2 laid out as a (G x G) map (index i + G j) and out-of-range neighbors equal to 0.
inline RVector pcsbl_coupled_omega(const RVector& f1, const RVector& f2, double beta, std::size_t grid)
{
    const auto G = static_cast<Eigen::Index>(grid);
    require_dims(f1.size() == G * G && f2.size() == G * G, "m_step_pcsbl: features must have G^2 entries");
    const RVector s = f1 + f2;
    auto at = [&](Eigen::Index i, Eigen::Index j) { return (i < 0 || j < 0 || i >= G || j >= G) ? 0.0 : s(i + G * j); };
    RVector w(G * G);
    for (Eigen::Index j = 0; j < G; ++j)
        for (Eigen::Index i = 0; i < G; ++i)
            w(i + G * j) = at(i, j) + beta * (at(i - 1, j) + at(i + 1, j) + at(i, j - 1) + at(i, j + 1));
    return w;
}

/// PC-SBL M-step on one (G x G) variance map in grid-sine order with zero-padded 4-neighborhoods.
inline RVector m_step_pcsbl(const RVector& f1, const RVector& f2, const PCSBLHyper& hyper, std::size_t grid)
{
    hyper.validate();
    const auto G = static_cast<Eigen::Index>(grid);
    const RVector omega = pcsbl_coupled_omega(f1, f2, hyper.beta, grid);
    constexpr double kOmegaFloor = 1e-30;
    RVector A(G * G);
    for (Eigen::Index g = 0; g < G * G; ++g) {
        const double w = hyper.b == 0.0 ? std::max(omega(g), kOmegaFloor) : omega(g);
        A(g) = hyper.a / (0.5 * w + hyper.b);
    }
    auto at = [&](Eigen::Index i, Eigen::Index j) { return (i < 0 || j < 0 || i >= G || j >= G) ? 0.0 : A(i + G * j); };
    RVector gamma(G * G);
    for (Eigen::Index j = 0; j < G; ++j)
        for (Eigen::Index i = 0; i < G; ++i)
            gamma(i + G * j) = 1.0 / (at(i, j) + hyper.beta * (at(i - 1, j) + at(i + 1, j) + at(i, j - 1) + at(i, j + 1)));
    return gamma;
}

struct EstimateResult {
    AngularChannel x_hat;
    MatrixStack h_hat;
    std::vector<double> gamma_trace; // sum of Gamma before each iteration and after the last
    std::vector<RMatrix> gamma_history; // only with keep_gamma_history
    RMatrix gamma;                      // final G^2 x K
    std::size_t iterations = 0;
};

namespace detail {

    template <class EStep>
    EstimateResult run_sbl(const EStep& estep, const CMatrix& y, Eigen::Index grid, const EstimatorOptions& opts)
    {
        opts.validate();
        const Eigen::Index G2 = grid * grid;
        const Eigen::Index K = y.cols();
        RMatrix gamma = RMatrix::Ones(G2, K);
        EstimateResult res;
        res.gamma_trace.push_back(gamma.sum());
        if (opts.keep_gamma_history)
            res.gamma_history.push_back(gamma);
        const bool shared = shares_gamma(opts.variant);
        for (std::size_t it = 0; it < opts.max_iters; ++it) {
            RMatrix next(G2, K);
            if (shared) {
                const EStepResult r = estep(RVector(gamma.col(0)), y);
                const RMatrix f1 = r.mu.cwiseAbs2();
                RVector g;
                if (opts.variant == Variant::MSBL)
                    g = m_step_msbl(f1, r.omega);
                else
                    g = m_step_pcsbl(f1.rowwise().mean(), r.omega, opts.hyper, static_cast<std::size_t>(grid));
                next = g.replicate(1, K);
            } else {
                for (Eigen::Index k = 0; k < K; ++k) {
                    const EStepResult r = estep(RVector(gamma.col(k)), y.col(k));
                    const RVector f1 = r.mu.col(0).cwiseAbs2();
                    next.col(k) = opts.variant == Variant::SBL ? m_step_sbl(f1, r.omega)
                                                               : m_step_pcsbl(f1, r.omega, opts.hyper, static_cast<std::size_t>(grid));
                }
            }
            const double base = gamma.norm();
            const double change = (next - gamma).norm();
            gamma = std::move(next);
            ++res.iterations;
            res.gamma_trace.push_back(gamma.sum());
            if (opts.keep_gamma_history)
                res.gamma_history.push_back(gamma);
            if (base == 0.0 || change <= opts.tol * base)
                break;
        }
        res.x_hat.x.resize(G2, K);
        if (shared) {
            res.x_hat.x = estep(RVector(gamma.col(0)), y).mu;
        } else {
            for (Eigen::Index k = 0; k < K; ++k)
                res.x_hat.x.col(k) = estep(RVector(gamma.col(k)), y.col(k)).mu.col(0);
        }
        res.gamma = std::move(gamma);
        return res;
    }

} // namespace detail

/// Runs the selected SBL variant from Gamma = 1 until max_iters or the relative Gamma change drops
/// below tol, then returns the posterior mean under the final Gamma.
inline EstimateResult estimate(const ReceivedSignal& y, const MeasurementSetup& setup, const Dictionaries& dict, const EstimatorOptions& opts)
{
    const auto G = static_cast<Eigen::Index>(dict.size());
    EstimateResult res;
    if (setup.factors.b_rx.size() > 0) {
        const KroneckerEStep estep(setup.factors, setup.noise_cov);
        res = detail::run_sbl(estep, y.y, G, opts);
    } else {
        auto estep = [&](const RVector& g, const CMatrix& yy) { return e_step(g, setup.phi, setup.noise_cov, yy); };
        res = detail::run_sbl(estep, y.y, G, opts);
    }
    res.h_hat = from_angular(res.x_hat, dict);
    return res;
}

/// Same iteration against an explicit Phi only (no Kronecker shortcut).
inline EstimateResult estimate_dense(const ReceivedSignal& y, const MeasurementSetup& setup, const Dictionaries& dict, const EstimatorOptions& opts)
{
    auto estep = [&](const RVector& g, const CMatrix& yy) { return e_step(g, setup.phi, setup.noise_cov, yy); };
    EstimateResult res = detail::run_sbl(estep, y.y, static_cast<Eigen::Index>(dict.size()), opts);
    res.h_hat = from_angular(res.x_hat, dict);
    return res;
}

/// Full-overhead least squares, H^k = (W^H)^{-1} Y^k F^{-1}, with square W (N_R x N_R) and F (N_T x N_T).
inline MatrixStack ls_estimate(const MatrixStack& y_full, const CMatrix& w_full, const CMatrix& f_full)
{
    require_dims(w_full.rows() == w_full.cols() && f_full.rows() == f_full.cols(), "ls_estimate: W and F must be square");
    const Eigen::FullPivLU<CMatrix> lu_w(w_full.adjoint());
    const Eigen::FullPivLU<CMatrix> lu_f(f_full.transpose());
    if (!lu_w.isInvertible() || !lu_f.isInvertible())
        throw DegenerateSystemError("ls_estimate: W or F is singular");
    MatrixStack out;
    out.reserve(y_full.size());
    for (const auto& yk : y_full) {
        require_dims(yk.rows() == w_full.rows() && yk.cols() == f_full.rows(), "ls_estimate: Y^k shape");
        const CMatrix left = lu_w.solve(yk); // (W^H)^{-1} Y
        // left F^{-1} = (F^{-T} left^T)^T
        out.push_back(lu_f.solve(CMatrix(left.transpose())).transpose());
    }
    return out;
}

/// Unstacks the received signal into per-subcarrier (M_R x M_T) matrices.
inline MatrixStack unstack_received(const ReceivedSignal& y, std::size_t m_rx, std::size_t m_tx)
{
    require_dims(static_cast<std::size_t>(y.y.rows()) == m_rx * m_tx, "unstack_received: row count");
    MatrixStack out;
    for (Eigen::Index k = 0; k < y.y.cols(); ++k)
        out.push_back(y.y.col(k).reshaped(static_cast<Eigen::Index>(m_rx), static_cast<Eigen::Index>(m_tx)));
    return out;
}

/// ||H - H_hat||_F^2 / ||H||_F^2 for one sample.
inline double nmse(const MatrixStack& h_true, const MatrixStack& h_hat)
{
    require_dims(h_true.size() == h_hat.size(), "nmse: subcarrier counts differ");
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < h_true.size(); ++k) {
        require_dims(h_true[k].rows() == h_hat[k].rows() && h_true[k].cols() == h_hat[k].cols(), "nmse: shape mismatch");
        num += (h_true[k] - h_hat[k]).squaredNorm();
        den += h_true[k].squaredNorm();
    }
    if (den == 0.0)
        throw std::domain_error("nmse: reference channel has zero norm");
    return num / den;
}

} // namespace sblu
