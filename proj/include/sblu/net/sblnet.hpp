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

#include "sblu/autodiff.hpp"
#include "sblu/channel.hpp"
#include "sblu/measurement.hpp"
#include "sblu/sbl.hpp"

#include <optional>

namespace sblu::net {

using ad::Shape;
using ad::Tensor;
using ad::Var;

struct NetConfig {
    std::size_t layers = 3;      // L
    std::size_t filters = 8;     // N_F
    std::size_t filter_size = 5; // F_S, odd
    bool multi_block = false;

    std::size_t in_channels() const { return multi_block ? 5 : 4; }

    void validate() const
    {
        if (layers == 0 || filters == 0)
            throw ConfigError("layers and filters must be positive");
        if (filter_size % 2 == 0)
            throw ConfigError("filter_size must be odd");
    }
};

struct ConvLayer {
    Var w1, b1; // (F, F, F, C_in, N_F), (N_F)
    Var w2, b2; // (F, F, F, N_F, 1), (1)
};

/// Dense head that maps |X[n-1]| to combiner phases.
struct CombinerNet {
    Var w1, b1; // (G, N_R M_R / 2), (1, N_R M_R / 2)
    Var w2, b2; // (N_R M_R / 2, N_R M_R), (1, N_R M_R)
};

struct NetworkParams {
    NetConfig cfg;
    std::vector<ConvLayer> layers;
    Var w_phase; // (N_R, M_R)
    Var f_phase; // (N_T, M_T)
    std::optional<CombinerNet> combiner;
    std::string stage = "init";

    std::vector<Var> conv_params() const
    {
        std::vector<Var> out;
        for (const auto& l : layers)
            out.insert(out.end(), {l.w1, l.b1, l.w2, l.b2});
        return out;
    }
    std::vector<Var> phase_params() const { return {w_phase, f_phase}; }
    std::vector<Var> combiner_params() const
    {
        if (!combiner)
            return {};
        return {combiner->w1, combiner->b1, combiner->w2, combiner->b2};
    }
    std::vector<Var> all_params() const
    {
        auto out = conv_params();
        for (auto& v : phase_params())
            out.push_back(v);
        for (auto& v : combiner_params())
            out.push_back(v);
        return out;
    }

    BeamPhases phases() const
    {
        auto to_mat = [](const Var& v) {
            RMatrix m(v.dim(0), v.dim(1));
            for (std::size_t i = 0; i < v.dim(0); ++i)
                for (std::size_t j = 0; j < v.dim(1); ++j)
                    m(i, j) = v.value()[i * v.dim(1) + j];
            return m;
        };
        return {to_mat(w_phase), to_mat(f_phase)};
    }
};

inline Tensor phase_tensor(const RMatrix& m)
{
    Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            t[i * m.cols() + j] = m(i, j);
    return t;
}

/// Xavier conv filters with zero biases, random beam phases, no combiner head.
inline NetworkParams init_network(const SystemConfig& sys, const NetConfig& cfg, Rng& rng)
{
    sys.validate();
    cfg.validate();
    NetworkParams p;
    p.cfg = cfg;
    const std::size_t f = cfg.filter_size;
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        ConvLayer c;
        c.w1 = ad::parameter(ad::xavier_init({f, f, f, cfg.in_channels(), cfg.filters}, rng));
        c.b1 = ad::parameter(Tensor({cfg.filters}));
        c.w2 = ad::parameter(ad::xavier_init({f, f, f, cfg.filters, 1}, rng));
        c.b2 = ad::parameter(Tensor({1}));
        p.layers.push_back(std::move(c));
    }
    const BeamPhases ph = random_phases(sys, rng);
    p.w_phase = ad::parameter(phase_tensor(ph.w_phase));
    p.f_phase = ad::parameter(phase_tensor(ph.f_phase));
    return p;
}

inline CombinerNet init_combiner(const SystemConfig& sys, Rng& rng)
{
    const std::size_t out = sys.n_rx * sys.m_rx;
    require_dims(out % 2 == 0, "combiner: N_R M_R must be even");
    CombinerNet c;
    c.w1 = ad::parameter(ad::xavier_init({sys.grid, out / 2}, rng));
    c.b1 = ad::parameter(Tensor({1, out / 2}));
    c.w2 = ad::parameter(ad::xavier_init({out / 2, out}, rng));
    c.b2 = ad::parameter(Tensor({1, out}));
    return c;
}

/// (G, G, K, 2): channel 0 holds sin(phi_i) along AoA, channel 1 sin(phi_j) along AoD.
inline Tensor position_features(std::size_t grid, std::size_t n_sc)
{
    const auto s = make_angular_grid(grid);
    Tensor t({grid, grid, n_sc, 2});
    for (std::size_t i = 0; i < grid; ++i)
        for (std::size_t j = 0; j < grid; ++j)
            for (std::size_t k = 0; k < n_sc; ++k) {
                const std::size_t o = ((i * grid + j) * n_sc + k) * 2;
                t[o] = s[i];
                t[o + 1] = s[j];
            }
    return t;
}

/// Per-configuration constants shared by every graph built for one SystemConfig.
struct NetContext {
    SystemConfig sys;
    Dictionaries dict;
    Var a_rx;      // (N_R, G, 2)
    Var a_tx_conj; // (N_T, G, 2)
    Var a_tx_h;    // (G, N_T, 2)
    Var f3;        // (G, G, K, 2)
    Var group_mask; // (M_R, M_R, 2), 1 inside combiner-group blocks

    explicit NetContext(const SystemConfig& s) : sys(s), dict(s)
    {
        sys.validate();
        a_rx = ad::constant(Tensor::from_complex(dict.a_rx));
        a_tx_conj = ad::constant(Tensor::from_complex(dict.a_tx.conjugate()));
        a_tx_h = ad::constant(Tensor::from_complex(dict.a_tx.adjoint()));
        f3 = ad::constant(position_features(sys.grid, sys.n_sc));
        const std::size_t m = sys.m_rx, rf = sys.n_rf_rx;
        Tensor mask({m, m, 2});
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b)
                if (a / rf == b / rf)
                    mask[2 * (a * m + b)] = mask[2 * (a * m + b) + 1] = 1.0;
        group_mask = ad::constant(std::move(mask));
    }
};

/// Phi, its conjugate transpose and the effective noise covariance, as graph nodes.
struct MeasurementGraph {
    Var w, f;
    Var phi, phi_h, noise_cov;
};

inline MeasurementGraph measurement_graph(const Var& w, const Var& f, const NetContext& ctx)
{
    MeasurementGraph g;
    g.w = w;
    g.f = f;
    const Var b_rx = ad::cmatmul(ad::conj_transpose(w), ctx.a_rx);
    const Var b_tx = ad::cmatmul(ad::permute(f, {1, 0, 2}), ctx.a_tx_conj);
    g.phi = ad::ckron(b_tx, b_rx);
    g.phi_h = ad::conj_transpose(g.phi);
    const Var gram = ad::mul(ad::cmatmul(ad::conj_transpose(w), w), ctx.group_mask);
    g.noise_cov = ad::kron_identity(ad::scale(gram, ctx.sys.noise_var), ctx.sys.m_tx);
    return g;
}

inline MeasurementGraph measurement_graph(const BeamPhases& phases, const NetContext& ctx)
{
    const auto [w, f] = phases_to_beams(phases);
    return measurement_graph(ad::constant(Tensor::from_complex(w)), ad::constant(Tensor::from_complex(f)), ctx);
}

/// Beams from phase parameters (trainable when the phases are).
inline std::pair<Var, Var> beams_from_phases(const NetworkParams& p, const SystemConfig& sys)
{
    return {ad::phase_to_complex(p.w_phase, 1.0 / std::sqrt(static_cast<double>(sys.n_rx))),
            ad::phase_to_complex(p.f_phase, 1.0 / std::sqrt(static_cast<double>(sys.n_tx)))};
}

/// Raw receiver noise, one (N_R, K M_T, 2) tensor per combiner group, column k M_T + p.
/// Draw order matches measure() so both see the same noise for the same generator state.
inline std::vector<Tensor> draw_noise(const SystemConfig& sys, Rng& rng)
{
    const std::size_t groups = sys.combiner_groups(), cols = sys.n_sc * sys.m_tx;
    std::vector<Tensor> out(groups, Tensor({sys.n_rx, cols, 2}));
    if (sys.noise_var <= 0.0)
        return out;
    for (std::size_t k = 0; k < sys.n_sc; ++k)
        for (std::size_t p = 0; p < sys.m_tx; ++p)
            for (std::size_t q = 0; q < groups; ++q)
                for (std::size_t i = 0; i < sys.n_rx; ++i) {
                    const cplx z = rng.cnormal(sys.noise_var);
                    const std::size_t o = 2 * (i * cols + k * sys.m_tx + p);
                    out[q][o] = z.real();
                    out[q][o + 1] = z.imag();
                }
    return out;
}

/// Angular channel as a constant (G^2, K, 2) tensor.
inline Tensor angular_tensor(const MatrixStack& h, const Dictionaries& dict)
{
    return Tensor::from_complex(to_angular(h, dict).x);
}

/// Y = Phi X + N~, (M, K, 2), with N~ formed from raw noise through the (possibly trainable) W.
inline Var received_graph(const MeasurementGraph& mg, const Tensor& x, const std::vector<Tensor>& noise, const NetContext& ctx)
{
    const auto& s = ctx.sys;
    const Var clean = ad::cmatmul(mg.phi, ad::constant(x));
    std::vector<Var> rows;
    for (std::size_t q = 0; q < noise.size(); ++q) {
        const Var wq = ad::slice(mg.w, 1, q * s.n_rf_rx, s.n_rf_rx);
        rows.push_back(ad::cmatmul(ad::conj_transpose(wq), ad::constant(noise[q])));
    }
    Var n = ad::concat(rows, 0);                                  // (M_R, K M_T)
    n = ad::reshape(n, {s.m_rx, s.n_sc, s.m_tx, 2});
    n = ad::permute(n, {1, 2, 0, 3});                             // (K, M_T, M_R)
    n = ad::reshape(n, {s.n_sc, s.measurements(), 2});
    n = ad::permute(n, {1, 0, 2});                                // (M, K)
    return ad::add(clean, n);
}

struct EStepNodes {
    Var mu;    // (G^2, 2)
    Var omega; // (G^2)
};

/// Posterior mean and variances for one subcarrier, differentiable in every input.
inline EStepNodes e_step_graph(const MeasurementGraph& mg, const Var& y_col, const Var& gamma, bool need_omega = true)
{
    const std::size_t g2 = gamma.dim(0);
    const Var c = ad::add(ad::cmatmul(ad::scale_cols(mg.phi, gamma), mg.phi_h), mg.noise_cov);
    EStepNodes out;
    if (!need_omega) {
        const Var z = ad::linear_solve(c, y_col);
        out.mu = ad::cmul_real(ad::reshape(ad::cmatmul(mg.phi_h, z), {g2, 2}), gamma);
        return out;
    }
    const Var z = ad::linear_solve(c, ad::concat({y_col, mg.phi}, 1));
    const Var zy = ad::slice(z, 1, 0, 1);
    const Var zphi = ad::slice(z, 1, 1, g2);
    out.mu = ad::cmul_real(ad::reshape(ad::cmatmul(mg.phi_h, zy), {g2, 2}), gamma);
    const Var d = ad::re_inner_cols(mg.phi, zphi);
    out.omega = ad::relu(ad::sub(gamma, ad::mul(ad::mul(gamma, gamma), d)));
    return out;
}

/// (K, G^2) in vec order g = i + G j  ->  (G_aoa, G_aod, K, 1).
inline Var to_grid(const Var& v, std::size_t grid)
{
    const std::size_t k = v.dim(0);
    return ad::reshape(ad::permute(ad::reshape(v, {k, grid, grid}), {2, 1, 0}), {grid, grid, k, 1});
}

inline Var from_grid(const Var& t, std::size_t grid)
{
    const std::size_t k = t.dim(2);
    return ad::reshape(ad::permute(ad::reshape(t, {grid, grid, k}), {2, 1, 0}), {k, grid * grid});
}

inline constexpr std::array<ad::Padding, 3> kLayerPadding{ad::Padding::Circular, ad::Padding::Circular, ad::Padding::Zero};

struct LayerNodes {
    Var gamma; // (K, G^2)
    Var f1, f2; // (K, G^2)
};

/// One unrolled iteration: per-subcarrier E-step, features, two circular-padded conv layers.
inline LayerNodes sbl_layer(const MeasurementGraph& mg, const Var& y, const Var& gamma_prev, const ConvLayer& layer,
                            const NetContext& ctx, const std::optional<Var>& f4 = std::nullopt)
{
    const std::size_t K = y.dim(1), G = ctx.sys.grid, g2 = G * G;
    require_dims(gamma_prev.shape() == Shape{K, g2}, "sbl_layer: gamma must be (K, G^2)");
    std::vector<Var> f1s, f2s;
    for (std::size_t k = 0; k < K; ++k) {
        const Var gk = ad::reshape(ad::slice(gamma_prev, 0, k, 1), {g2});
        const EStepNodes e = e_step_graph(mg, ad::slice(y, 1, k, 1), gk);
        f1s.push_back(ad::reshape(ad::sq_modulus(e.mu), {1, g2}));
        f2s.push_back(ad::reshape(e.omega, {1, g2}));
    }
    LayerNodes out;
    out.f1 = ad::concat(f1s, 0);
    out.f2 = ad::concat(f2s, 0);
    std::vector<Var> feats{to_grid(out.f1, G), to_grid(out.f2, G), ctx.f3};
    if (f4)
        feats.push_back(*f4);
    const Var in = ad::concat(feats, 3);
    require_dims(in.dim(3) == layer.w1.dim(3), "sbl_layer: feature channels do not match the filters");
    const Var h = ad::relu(ad::conv3d(in, layer.w1, layer.b1, kLayerPadding));
    const Var o = ad::relu(ad::conv3d(h, layer.w2, layer.b2, kLayerPadding));
    out.gamma = from_grid(o, G);
    return out;
}

struct ForwardNodes {
    Var x_hat;  // (K, G^2, 2)
    Var h_hat;  // (K, N_R, N_T, 2)
    Var gamma;  // last layer output
    std::vector<double> gamma_trace; // sum of Gamma entering each layer and leaving the last
};

/// H^k = A_R X^k A_T^H from the vectorized x^k.
inline Var angular_to_channel(const Var& x_col, const NetContext& ctx)
{
    const std::size_t G = ctx.sys.grid;
    const Var xt = ad::reshape(x_col, {G, G, 2}); // rows index the AoD grid
    return ad::cmatmul(ad::cmatmul(ctx.a_rx, ad::permute(xt, {1, 0, 2})), ctx.a_tx_h);
}

inline ForwardNodes forward_graph(const MeasurementGraph& mg, const Var& y, const NetworkParams& net, const NetContext& ctx,
                                  const std::optional<Var>& f4 = std::nullopt)
{
    const std::size_t K = y.dim(1), G = ctx.sys.grid, g2 = G * G;
    require_dims(y.dim(0) == mg.phi.dim(0), "forward: received signal rows must equal M");
    require_dims(K == ctx.sys.n_sc, "forward: received signal must have K columns");
    require_dims(net.cfg.multi_block == f4.has_value(), "forward: time features required exactly for multi-block nets");
    ForwardNodes out;
    Var gamma = ad::constant(Tensor({K, g2}, 1.0));
    for (const auto& layer : net.layers) {
        out.gamma_trace.push_back(ad::sum(gamma).item());
        gamma = sbl_layer(mg, y, gamma, layer, ctx, f4).gamma;
    }
    out.gamma_trace.push_back(ad::sum(gamma).item());
    out.gamma = gamma;
    std::vector<Var> xs, hs;
    for (std::size_t k = 0; k < K; ++k) {
        const Var gk = ad::reshape(ad::slice(gamma, 0, k, 1), {g2});
        const Var mu = e_step_graph(mg, ad::slice(y, 1, k, 1), gk, false).mu;
        xs.push_back(ad::reshape(mu, {1, g2, 2}));
        hs.push_back(ad::reshape(angular_to_channel(mu, ctx), {1, ctx.sys.n_rx, ctx.sys.n_tx, 2}));
    }
    out.x_hat = ad::concat(xs, 0);
    out.h_hat = ad::concat(hs, 0);
    return out;
}

/// W[n] from |X[n-1]|: GAP over AoD and subcarrier, ReLU dense, sigmoid dense, 2 pi scaling.
inline Var predict_combiner(const Var& x_prev_mod, const CombinerNet& c, const SystemConfig& sys)
{
    require_dims(x_prev_mod.shape() == Shape{sys.grid, sys.grid, sys.n_sc, 1}, "predict_combiner: input must be (G, G, K, 1)");
    const Var pooled = ad::reshape(ad::mean_axes(x_prev_mod, {1, 2, 3}), {1, sys.grid});
    const Var h = ad::relu(ad::add(ad::matmul(pooled, c.w1), c.b1));
    const Var s = ad::sigmoid(ad::add(ad::matmul(h, c.w2), c.b2));
    const Var phase = ad::reshape(ad::scale(s, 2.0 * kPi), {sys.n_rx, sys.m_rx});
    return ad::phase_to_complex(phase, 1.0 / std::sqrt(static_cast<double>(sys.n_rx)));
}

/// Phase matrix implied by a predicted W (entries are exp(j theta)/sqrt(N_R)).
inline RMatrix combiner_phases(const Var& w)
{
    RMatrix m(w.dim(0), w.dim(1));
    for (std::size_t i = 0; i < w.dim(0); ++i)
        for (std::size_t j = 0; j < w.dim(1); ++j) {
            const std::size_t o = 2 * (i * w.dim(1) + j);
            m(i, j) = std::atan2(w.value()[o + 1], w.value()[o]);
        }
    return m;
}

inline Tensor channel_tensor(const MatrixStack& h)
{
    require_dims(!h.empty(), "channel_tensor: empty stack");
    const std::size_t r = h[0].rows(), c = h[0].cols();
    Tensor t({h.size(), r, c, 2});
    for (std::size_t k = 0; k < h.size(); ++k) {
        const Tensor hk = Tensor::from_complex(h[k]);
        std::copy(hk.data.begin(), hk.data.end(), t.data.begin() + k * hk.size());
    }
    return t;
}

inline MatrixStack stack_from_tensor(const Tensor& t)
{
    require_dims(t.rank() == 4 && t.shape[3] == 2, "stack_from_tensor: expected (K, rows, cols, 2)");
    MatrixStack out;
    const std::size_t per = t.shape[1] * t.shape[2] * 2;
    for (std::size_t k = 0; k < t.shape[0]; ++k) {
        Tensor hk({t.shape[1], t.shape[2], 2}, std::vector<double>(t.data.begin() + k * per, t.data.begin() + (k + 1) * per));
        out.push_back(hk.to_complex());
    }
    return out;
}

/// Squared error of one sample scaled by 1 / (S K N_T N_R); summing over a batch gives the batch loss.
inline Var sample_loss(const Var& h_hat, const MatrixStack& h_true, std::size_t batch)
{
    const Tensor t = channel_tensor(h_true);
    require_dims(t.shape == h_hat.shape(), "loss: estimate and truth shapes differ");
    const double denom = static_cast<double>(batch * h_true.size() * h_true[0].rows() * h_true[0].cols());
    return ad::scale(ad::sum(ad::sq_modulus(ad::sub(h_hat, ad::constant(t)))), 1.0 / denom);
}

/// (1 / (S K N_T N_R)) sum_s ||H_s - H^_s||_F^2.
inline double loss_mse(const std::vector<MatrixStack>& truth, const std::vector<MatrixStack>& est)
{
    require_dims(truth.size() == est.size() && !truth.empty(), "loss_mse: batch sizes differ or are empty");
    double acc = 0.0;
    std::size_t denom = 0;
    for (std::size_t s = 0; s < truth.size(); ++s) {
        require_dims(truth[s].size() == est[s].size(), "loss_mse: subcarrier counts differ");
        for (std::size_t k = 0; k < truth[s].size(); ++k) {
            require_dims(truth[s][k].rows() == est[s][k].rows() && truth[s][k].cols() == est[s][k].cols(), "loss_mse: shape mismatch");
            acc += (truth[s][k] - est[s][k]).squaredNorm();
            denom += static_cast<std::size_t>(truth[s][k].size());
        }
    }
    return acc / static_cast<double>(denom);
}

/// |X| of an estimate as time features, (G, G, K, 1), detached from any graph.
inline Tensor time_features(const Tensor& x_hat, std::size_t grid)
{
    require_dims(x_hat.rank() == 3 && x_hat.shape[1] == grid * grid && x_hat.shape[2] == 2, "time_features: expected (K, G^2, 2)");
    const std::size_t K = x_hat.shape[0];
    Tensor out({grid, grid, K, 1});
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t i = 0; i < grid; ++i)
            for (std::size_t j = 0; j < grid; ++j) {
                const std::size_t o = 2 * (k * grid * grid + i + grid * j);
                out[(i * grid + j) * K + k] = std::hypot(x_hat[o], x_hat[o + 1]);
            }
    return out;
}

struct Estimate {
    AngularChannel x_hat;
    MatrixStack h_hat;
    std::vector<double> gamma_trace;
    Tensor x_tensor; // (K, G^2, 2)
};

/// Inference on a measured signal with a fixed setup.
inline Estimate estimate(const CMatrix& y, const MeasurementGraph& mg, const NetworkParams& net, const NetContext& ctx,
                         const std::optional<Tensor>& f4 = std::nullopt)
{
    std::optional<Var> f4v;
    if (f4)
        f4v = ad::constant(*f4);
    const ForwardNodes fw = forward_graph(mg, ad::constant(Tensor::from_complex(y)), net, ctx, f4v);
    Estimate e;
    e.x_tensor = fw.x_hat.value();
    const std::size_t K = e.x_tensor.shape[0], g2 = e.x_tensor.shape[1];
    e.x_hat.x.resize(static_cast<Eigen::Index>(g2), static_cast<Eigen::Index>(K));
    for (std::size_t k = 0; k < K; ++k)
        for (std::size_t g = 0; g < g2; ++g)
            e.x_hat.x(g, k) = {e.x_tensor[2 * (k * g2 + g)], e.x_tensor[2 * (k * g2 + g) + 1]};
    e.h_hat = stack_from_tensor(fw.h_hat.value());
    e.gamma_trace = fw.gamma_trace;
    return e;
}

// ---- multi-block -------------------------------------------------------

/// C_in = 5 copy of a single-block net: filter slices reading F4 start at zero, everything else copied.
inline NetworkParams extend_to_multi_block(const NetworkParams& single)
{
    require_dims(!single.cfg.multi_block, "extend_to_multi_block: already multi-block");
    NetworkParams m;
    m.cfg = single.cfg;
    m.cfg.multi_block = true;
    m.stage = "multi_init";
    for (const auto& l : single.layers) {
        const Tensor& w = l.w1.value();
        const std::size_t taps = w.shape[0] * w.shape[1] * w.shape[2], ci = w.shape[3], co = w.shape[4];
        Tensor w5({w.shape[0], w.shape[1], w.shape[2], ci + 1, co});
        for (std::size_t t = 0; t < taps; ++t)
            for (std::size_t c = 0; c < ci; ++c)
                for (std::size_t o = 0; o < co; ++o)
                    w5[(t * (ci + 1) + c) * co + o] = w[(t * ci + c) * co + o];
        m.layers.push_back({ad::parameter(std::move(w5)), ad::parameter(l.b1.value()), ad::parameter(l.w2.value()),
                            ad::parameter(l.b2.value())});
    }
    m.w_phase = ad::parameter(single.w_phase.value());
    m.f_phase = ad::parameter(single.f_phase.value());
    return m;
}

// ---- accounting --------------------------------------------------------

/// Extra real FLOPs per layer from the conv net: 2(5 N_F + 2) F_S^3 K G^2.
inline double dnn_flops_per_layer(const NetConfig& cfg, std::size_t n_sc, std::size_t grid)
{
    const double fs = static_cast<double>(cfg.filter_size);
    return 2.0 * (5.0 * cfg.filters + 2.0) * fs * fs * fs * static_cast<double>(n_sc) * static_cast<double>(grid * grid);
}

/// Multi-block extras per layer: 2(N_F + 1) F_S^3 K G^2 for the time features.
inline double time_feature_flops_per_layer(const NetConfig& cfg, std::size_t n_sc, std::size_t grid)
{
    const double fs = static_cast<double>(cfg.filter_size);
    return 2.0 * (cfg.filters + 1.0) * fs * fs * fs * static_cast<double>(n_sc) * static_cast<double>(grid * grid);
}

/// Combiner head: (G + N_R M_R) N_R M_R.
inline double combiner_flops(const SystemConfig& sys)
{
    const double nm = static_cast<double>(sys.n_rx * sys.m_rx);
    return (static_cast<double>(sys.grid) + nm) * nm;
}

} // namespace sblu::net
