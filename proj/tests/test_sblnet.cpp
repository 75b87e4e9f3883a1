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

#include <catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "sblu/net/train.hpp"

using namespace sblu;
using namespace sblu::net;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

struct Instance {
    MatrixStack h;
    BeamPhases beams;
    std::vector<Tensor> noise;
};

Instance draw_instance(const SystemConfig& sys, std::uint64_t seed)
{
    Rng rng(seed);
    Instance in;
    in.h = sample_channel(sys, ChannelConfig{}, rng).h;
    in.beams = random_phases(sys, rng);
    in.noise = draw_noise(sys, rng);
    return in;
}

double max_abs_diff(const Tensor& a, const Tensor& b)
{
    REQUIRE(a.shape == b.shape);
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

double max_abs_diff(const CMatrix& a, const CMatrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

} // namespace

TEST_CASE("position features")
{
    SECTION("G = 4")
    {
        const Tensor t = position_features(4, 3);
        for (std::size_t j = 0; j < 4; ++j)
            for (std::size_t k = 0; k < 3; ++k)
                CHECK(t[((0 * 4 + j) * 3 + k) * 2] == -0.75);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j)
                for (std::size_t k = 0; k < 3; ++k)
                    CHECK(t[((i * 4 + j) * 3 + k) * 2] == t[((j * 4 + i) * 3 + k) * 2 + 1]);
    }
    SECTION("G = 64 corners")
    {
        const Tensor t = position_features(64, 1);
        auto at = [&](std::size_t i, std::size_t j, std::size_t c) { return t[(i * 64 + j) * 2 + c]; };
        CHECK(at(0, 0, 0) == -63.0 / 64.0);
        CHECK(at(0, 0, 1) == -63.0 / 64.0);
        CHECK(at(63, 63, 0) == 63.0 / 64.0);
        CHECK(at(63, 0, 1) == -63.0 / 64.0);
        CHECK(at(0, 63, 1) == 63.0 / 64.0);
    }
}

TEST_CASE("in-graph measurement matches the measurement module")
{
    const SystemConfig sys = fixture::tiny_system();
    const NetContext ctx(sys);
    const Instance in = draw_instance(sys, 11);
    const MeasurementSetup setup = make_setup(in.beams, ctx.dict, sys);
    const MeasurementGraph mg = measurement_graph(in.beams, ctx);

    CHECK(max_abs_diff(mg.phi.value().to_complex(), setup.phi) < 1e-12);
    CHECK(max_abs_diff(mg.noise_cov.value().to_complex(), setup.noise_cov) < 1e-12);

    // same generator state on both sides
    Rng a(99), b(99);
    const Tensor y_graph = received_graph(mg, angular_tensor(in.h, ctx.dict), draw_noise(sys, a), ctx).value();
    const ReceivedSignal y_ref = measure(in.h, setup, sys.noise_var, b);
    CHECK(max_abs_diff(y_graph.to_complex(), y_ref.y) < 1e-12);

    SECTION("learned-phase beams reproduce the same matrices")
    {
        NetworkParams net = init_network(sys, fixture::tiny_net(), a);
        net.w_phase.mutable_value() = phase_tensor(in.beams.w_phase);
        net.f_phase.mutable_value() = phase_tensor(in.beams.f_phase);
        const auto [w, f] = beams_from_phases(net, sys);
        const MeasurementGraph mg2 = measurement_graph(w, f, ctx);
        CHECK(max_abs_diff(mg2.phi.value(), mg.phi.value()) < 1e-12);
    }
}

TEST_CASE("graph e-step matches the estimator e-step")
{
    const SystemConfig sys = fixture::tiny_system();
    const NetContext ctx(sys);
    const Instance in = draw_instance(sys, 12);
    const MeasurementSetup setup = make_setup(in.beams, ctx.dict, sys);
    const MeasurementGraph mg = measurement_graph(in.beams, ctx);
    Rng rng(3);
    const CMatrix y = rng.cnormal_matrix(static_cast<Eigen::Index>(sys.measurements()), 1);
    RVector gamma(sys.grid_sq());
    Tensor gt({sys.grid_sq()});
    for (std::size_t g = 0; g < sys.grid_sq(); ++g)
        gt[g] = gamma(g) = rng.uniform(0.0, 2.0);
    const EStepResult ref = e_step(gamma, setup.phi, setup.noise_cov, y);
    const EStepNodes got = e_step_graph(mg, ad::constant(Tensor::from_complex(y)), ad::constant(gt));
    for (std::size_t g = 0; g < sys.grid_sq(); ++g) {
        CHECK_THAT(got.mu.value()[2 * g], WithinAbs(ref.mu(g, 0).real(), 1e-10));
        CHECK_THAT(got.mu.value()[2 * g + 1], WithinAbs(ref.mu(g, 0).imag(), 1e-10));
        CHECK_THAT(got.omega.value()[g], WithinAbs(ref.omega(g), 1e-10));
    }
}

TEST_CASE("sbl_layer")
{
    const SystemConfig sys = fixture::tiny_system();
    const NetContext ctx(sys);
    const Instance in = draw_instance(sys, 13);
    const MeasurementGraph mg = measurement_graph(in.beams, ctx);
    const Var y = received_graph(mg, angular_tensor(in.h, ctx.dict), in.noise, ctx);
    const Var ones = ad::constant(Tensor({sys.n_sc, sys.grid_sq()}, 1.0));
    Rng rng(4);
    NetworkParams net = init_network(sys, fixture::tiny_net(), rng);

    SECTION("zero filters give zero variances")
    {
        for (auto& l : net.layers) {
            l.w1.mutable_value() = Tensor(l.w1.shape());
            l.w2.mutable_value() = Tensor(l.w2.shape());
        }
        const Var g = sbl_layer(mg, y, ones, net.layers[0], ctx).gamma;
        for (double v : g.value().data)
            CHECK(v == 0.0);
    }
    SECTION("output is nonnegative")
    {
        for (std::uint64_t s = 0; s < 5; ++s) {
            Rng r(100 + s);
            NetworkParams n2 = init_network(sys, fixture::tiny_net(), r);
            for (auto& l : n2.layers)
                for (auto& v : l.b2.mutable_value().data)
                    v = -0.05;
            const Var g = sbl_layer(mg, y, ones, n2.layers[0], ctx).gamma;
            for (double v : g.value().data)
                CHECK(v >= 0.0);
        }
    }
    SECTION("copying filters reproduce the SBL variance update")
    {
        fixture::set_copying_filters(net);
        const MeasurementSetup setup = make_setup(in.beams, ctx.dict, sys);
        const CMatrix yc = y.value().to_complex();
        const LayerNodes out = sbl_layer(mg, y, ones, net.layers[0], ctx);
        for (std::size_t k = 0; k < sys.n_sc; ++k) {
            const EStepResult r = e_step(RVector::Ones(sys.grid_sq()), setup.phi, setup.noise_cov, yc.col(k));
            const RVector ref = m_step_sbl(r.mu.col(0).cwiseAbs2(), r.omega);
            for (std::size_t g = 0; g < sys.grid_sq(); ++g)
                CHECK_THAT(out.gamma.value()[k * sys.grid_sq() + g], WithinAbs(ref(g), 1e-6));
        }
    }
    SECTION("feature channels must match the filters")
    {
        NetConfig mc = fixture::tiny_net();
        mc.multi_block = true;
        Rng r(5);
        NetworkParams multi = init_network(sys, mc, r);
        CHECK_THROWS_AS(sbl_layer(mg, y, ones, multi.layers[0], ctx), DimensionError);
    }
}

TEST_CASE("unrolled network with copying filters equals L SBL iterations")
{
    const SystemConfig sys = fixture::tiny_system();
    const NetContext ctx(sys);
    Rng rng(6);
    NetworkParams net = init_network(sys, fixture::tiny_net(), rng);
    fixture::set_copying_filters(net);
    EstimatorOptions opts;
    opts.max_iters = net.cfg.layers;
    opts.tol = 0.0;
    for (std::uint64_t s = 0; s < 3; ++s) {
        const Instance in = draw_instance(sys, 20 + s);
        const MeasurementSetup setup = make_setup(in.beams, ctx.dict, sys);
        const MeasurementGraph mg = measurement_graph(in.beams, ctx);
        const CMatrix y = received_graph(mg, angular_tensor(in.h, ctx.dict), in.noise, ctx).value().to_complex();
        const Estimate e = estimate(y, mg, net, ctx);
        const EstimateResult ref = sblu::estimate(ReceivedSignal{y}, setup, ctx.dict, opts);
        REQUIRE(ref.iterations == net.cfg.layers);
        CHECK(std::abs(nmse(in.h, e.h_hat) - nmse(in.h, ref.h_hat)) < 1e-4);
        CHECK(max_abs_diff(e.x_hat.x, ref.x_hat.x) < 1e-8);
        REQUIRE(e.gamma_trace.size() == ref.gamma_trace.size());
        for (std::size_t i = 0; i < e.gamma_trace.size(); ++i)
            CHECK_THAT(e.gamma_trace[i], WithinRel(ref.gamma_trace[i], 1e-8));
    }
}

TEST_CASE("untrained network on the typical setting is finite")
{
    const SystemConfig sys; // 32 x 32 antennas, 16 x 16 beams, G = 64, K = 8
    const NetContext ctx(sys);
    Rng rng(7);
    const NetworkParams net = init_network(sys, NetConfig{}, rng);
    NoGrad ng(net.all_params());
    const Instance in = draw_instance(sys, 8);
    const MeasurementGraph mg = measurement_graph(in.beams, ctx);
    const Var y = received_graph(mg, angular_tensor(in.h, ctx.dict), in.noise, ctx);
    const ForwardNodes fw = forward_graph(mg, y, net, ctx);
    for (double v : fw.h_hat.value().data)
        REQUIRE(std::isfinite(v));
    for (double v : fw.gamma_trace)
        CHECK(std::isfinite(v));
}

TEST_CASE("circular shift consistency")
{
    const SystemConfig sys = fixture::tiny_system();
    const std::size_t G = sys.grid, g2 = sys.grid_sq(), shift = 3;
    const Instance in = draw_instance(sys, 30);
    Rng rng(9);
    const NetworkParams net = init_network(sys, fixture::tiny_net(), rng);

    // Phi' x' = Phi x when x' is x rolled along AoA and Phi's columns are rolled the same way
    auto roll_cols = [&](const Tensor& m) {
        Tensor out(m.shape);
        const std::size_t rows = m.shape[0];
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t i = 0; i < G; ++i)
                for (std::size_t j = 0; j < G; ++j)
                    for (int c = 0; c < 2; ++c)
                        out[2 * (r * g2 + (i + shift) % G + G * j) + c] = m[2 * (r * g2 + i + G * j) + c];
        return out;
    };
    auto run = [&](bool zero_f3) {
        NetContext ctx(sys);
        if (zero_f3)
            ctx.f3 = ad::constant(Tensor(ctx.f3.shape()));
        const MeasurementGraph mg = measurement_graph(in.beams, ctx);
        const Var y = received_graph(mg, angular_tensor(in.h, ctx.dict), in.noise, ctx);
        MeasurementGraph rolled = mg;
        rolled.phi = ad::constant(roll_cols(mg.phi.value()));
        rolled.phi_h = ad::conj_transpose(rolled.phi);
        const Var ones = ad::constant(Tensor({sys.n_sc, g2}, 1.0));
        const Tensor a = sbl_layer(mg, y, ones, net.layers[0], ctx).gamma.value();
        const Tensor b = sbl_layer(rolled, y, ones, net.layers[0], ctx).gamma.value();
        double d = 0.0;
        for (std::size_t k = 0; k < sys.n_sc; ++k)
            for (std::size_t i = 0; i < G; ++i)
                for (std::size_t j = 0; j < G; ++j)
                    d = std::max(d, std::abs(b[k * g2 + (i + shift) % G + G * j] - a[k * g2 + i + G * j]));
        return d;
    };
    CHECK(run(true) < 1e-8);
    CHECK(run(false) > 1e-6);
}

TEST_CASE("combiner prediction")
{
    const SystemConfig sys = fixture::tiny_system();
    Rng rng(10);
    CombinerNet c = init_combiner(sys, rng);
    const std::size_t G = sys.grid, K = sys.n_sc;
    Tensor f4({G, G, K, 1});
    for (auto& v : f4.data)
        v = rng.uniform(0.0, 3.0);

    SECTION("constant modulus")
    {
        const Var w = predict_combiner(ad::constant(f4), c, sys);
        REQUIRE(w.shape() == Shape{sys.n_rx, sys.m_rx, 2});
        const double target = 1.0 / std::sqrt(static_cast<double>(sys.n_rx));
        const CMatrix wm = w.value().to_complex();
        for (Eigen::Index i = 0; i < wm.size(); ++i)
            CHECK_THAT(std::abs(wm(i)), WithinAbs(target, 1e-15));
    }
    SECTION("zero input and biases give phase pi everywhere")
    {
        const Var w = predict_combiner(ad::constant(Tensor({G, G, K, 1})), c, sys);
        const RMatrix ph = combiner_phases(w);
        for (Eigen::Index i = 0; i < ph.size(); ++i)
            CHECK_THAT(std::abs(ph(i)), WithinAbs(kPi, 1e-12));
    }
    SECTION("downstream loss gradient w.r.t. the dense weights")
    {
        const Instance in = draw_instance(sys, 31);
        const NetContext ctx(sys);
        NetConfig mc = fixture::tiny_net();
        mc.multi_block = true;
        Rng r(12);
        NetworkParams net = init_network(sys, mc, r);
        net.combiner = c;
        const Var f4v = ad::constant(f4);
        auto f = [&] {
            const auto [w0, fb] = beams_from_phases(net, sys);
            const Var w = predict_combiner(f4v, *net.combiner, sys);
            const MeasurementGraph mg = measurement_graph(w, fb, ctx);
            const Var y = received_graph(mg, angular_tensor(in.h, ctx.dict), in.noise, ctx);
            return sample_loss(forward_graph(mg, y, net, ctx, f4v).h_hat, in.h, 1);
        };
        ad::GradCheckOptions o;
        o.max_coords = 12;
        CHECK(ad::grad_check(f, net.combiner_params(), o) < 1e-3);
    }
}

TEST_CASE("loss_mse")
{
    const CMatrix one = CMatrix::Constant(1, 1, 1.0), zero = CMatrix::Zero(1, 1);
    CHECK(loss_mse({{one}}, {{one}}) == 0.0);
    CHECK(loss_mse({{one}}, {{zero}}) == 1.0);
    Rng rng(13);
    const MatrixStack a{rng.cnormal_matrix(3, 2), rng.cnormal_matrix(3, 2)};
    const MatrixStack b{rng.cnormal_matrix(3, 2), rng.cnormal_matrix(3, 2)};
    CHECK_THAT(loss_mse({a, a}, {b, b}), WithinRel(loss_mse({a}, {b}), 1e-15));

    SECTION("graph loss agrees")
    {
        const Var l = sample_loss(ad::constant(channel_tensor(b)), a, 1);
        CHECK_THAT(l.item(), WithinRel(loss_mse({a}, {b}), 1e-14));
    }
}

TEST_CASE("end-to-end gradients at tiny scale")
{
    const SystemConfig sys = fixture::tiny_system();
    const NetContext ctx(sys);
    const Instance in = draw_instance(sys, 40);
    Rng rng(14);
    NetworkParams net = init_network(sys, fixture::tiny_net(), rng);
    auto f = [&] {
        const auto [w, fb] = beams_from_phases(net, sys);
        const MeasurementGraph mg = measurement_graph(w, fb, ctx);
        const Var y = received_graph(mg, angular_tensor(in.h, ctx.dict), in.noise, ctx);
        return sample_loss(forward_graph(mg, y, net, ctx).h_hat, in.h, 1);
    };
    ad::GradCheckOptions o;
    o.max_coords = 10;
    for (const auto& p : net.conv_params())
        CHECK(ad::grad_check(f, {p}, o) < 1e-3);
    for (const auto& p : net.phase_params())
        CHECK(ad::grad_check(f, {p}, o) < 1e-3);
}

TEST_CASE("single SBL layer graph gradient, G = 4")
{
    SystemConfig sys;
    sys.n_tx = sys.n_rx = 4;
    sys.m_tx = sys.m_rx = 2;
    sys.n_rf_rx = 1;
    sys.grid = 4;
    sys.n_sc = 2;
    const NetContext ctx(sys);
    const Instance in = draw_instance(sys, 41);
    Rng rng(15);
    NetworkParams net = init_network(sys, fixture::tiny_net(), rng);
    const Var ones = ad::constant(Tensor({sys.n_sc, sys.grid_sq()}, 1.0));
    auto f = [&] {
        const auto [w, fb] = beams_from_phases(net, sys);
        const MeasurementGraph mg = measurement_graph(w, fb, ctx);
        const Var y = received_graph(mg, angular_tensor(in.h, ctx.dict), in.noise, ctx);
        return ad::sum(sbl_layer(mg, y, ones, net.layers[0], ctx).gamma);
    };
    std::vector<Var> ps{net.layers[0].w1, net.layers[0].b1, net.layers[0].w2, net.layers[0].b2, net.w_phase, net.f_phase};
    ad::GradCheckOptions o;
    o.max_coords = 16;
    for (const auto& p : ps)
        CHECK(ad::grad_check(f, {p}, o) < 1e-3);
}

TEST_CASE("multi-block initialization")
{
    const SystemConfig sys = fixture::tiny_system();
    const NetContext ctx(sys);
    Rng rng(16);
    const NetworkParams single = init_network(sys, fixture::tiny_net(), rng);
    const NetworkParams multi = extend_to_multi_block(single);
    CHECK(multi.cfg.in_channels() == 5);
    const Instance in = draw_instance(sys, 42);
    const MeasurementGraph mg = measurement_graph(single.phases(), ctx);
    const Var y = received_graph(mg, angular_tensor(in.h, ctx.dict), in.noise, ctx);
    Tensor f4({sys.grid, sys.grid, sys.n_sc, 1});
    for (auto& v : f4.data)
        v = rng.uniform(0.0, 5.0);
    const Tensor a = forward_graph(mg, y, single, ctx).h_hat.value();
    const Tensor b = forward_graph(mg, y, multi, ctx, ad::constant(f4)).h_hat.value();
    CHECK(max_abs_diff(a, b) < 1e-10);
    CHECK_THROWS_AS(forward_graph(mg, y, multi, ctx), DimensionError);
    CHECK_THROWS_AS(extend_to_multi_block(multi), DimensionError);
}

TEST_CASE("training")
{
    const SystemConfig sys = fixture::tiny_system();
    Dataset data;
    data.sys = sys;
    Rng rng(17);
    for (int s = 0; s < 4; ++s)
        data.samples.push_back({sample_channel(sys, data.chan, rng).h});

    SECTION("stage-1 loss falls on one sample")
    {
        const NetContext ctx(sys);
        Rng r(18);
        NetworkParams net = init_network(sys, fixture::tiny_net(), r);
        TrainConfig cfg;
        cfg.max_epochs = 20;
        cfg.stop_patience = 100;
        cfg.decay_patience = 100;
        cfg.lr_stage12 = 1e-2;
        const auto log = run_stage("stage1", 1, net.all_params(), net.conv_params(), cfg.lr_stage12,
                                   single_block_loss_fn(data, net, ctx, BeamMode::RandomPerDraw, 1, 1), {0}, {0}, cfg);
        REQUIRE(log.size() == 21);
        CHECK(log.back().val_loss < log.front().val_loss);
        CHECK(log[20].train_loss < log[1].train_loss);
    }
    SECTION("stage 2 leaves the filters untouched")
    {
        const NetContext ctx(sys);
        Rng r(19);
        NetworkParams net = init_network(sys, fixture::tiny_net(), r);
        const auto before = sblu::net::detail::snapshot(net.conv_params());
        TrainConfig cfg;
        cfg.max_epochs = 3;
        cfg.lr_stage12 = 1e-2;
        run_stage("stage2", 2, net.all_params(), net.phase_params(), cfg.lr_stage12,
                  single_block_loss_fn(data, net, ctx, BeamMode::Learned, 1, 2), {0, 1, 2}, {3}, cfg);
        const auto after = sblu::net::detail::snapshot(net.conv_params());
        for (std::size_t i = 0; i < before.size(); ++i)
            CHECK(after[i].data == before[i].data);
        const auto [w, f] = beams_from_phases(net, sys);
        const Var mod = ad::sq_modulus(w);
        for (double m : mod.value().data)
            CHECK_THAT(m, WithinAbs(1.0 / sys.n_rx, 1e-15));
    }
    SECTION("full pipeline runs and restores the best weights")
    {
        TrainConfig cfg;
        cfg.max_epochs = 2;
        cfg.batch = 2;
        cfg.lr_stage12 = 1e-2;
        cfg.lr_stage3 = 1e-3;
        std::vector<EpochLog> log;
        const Split split{{0, 1}, {2}, {3}};
        const NetworkParams net = train_single(data, split, fixture::tiny_net(), cfg, &log);
        CHECK(net.stage == "stage3");
        CHECK(log.size() >= 6);
        double best = std::numeric_limits<double>::infinity();
        for (const auto& e : log)
            if (e.stage == "stage3")
                best = std::min(best, e.val_loss);
        const NetContext ctx(sys);
        NoGrad ng(net.all_params());
        const double v = single_block_loss_fn(data, net, ctx, BeamMode::Learned, cfg.seed, 3)(2, 0, 1).item();
        CHECK_THAT(v, WithinRel(best, 1e-12));
    }
    SECTION("empty dataset")
    {
        Dataset empty;
        empty.sys = sys;
        CHECK_THROWS_AS(train_single(empty, Split{}, fixture::tiny_net(), TrainConfig{}), std::invalid_argument);
    }
}

TEST_CASE("split and accounting")
{
    const Split s = split_811(10000);
    CHECK(s.train.size() == 8000);
    CHECK(s.val.size() == 1000);
    CHECK(s.test.size() == 1000);
    NetConfig cfg;
    CHECK(dnn_flops_per_layer(cfg, 8, 64) == 2.0 * 42 * 125 * 8 * 4096);
    CHECK(time_feature_flops_per_layer(cfg, 8, 64) == 2.0 * 9 * 125 * 8 * 4096);
    SystemConfig sys;
    CHECK(combiner_flops(sys) == (64.0 + 512.0) * 512.0);
}
