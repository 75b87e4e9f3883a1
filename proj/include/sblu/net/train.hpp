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

#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <stdexcept>

namespace sblu::net {

struct TrainConfig {
    std::size_t batch = 16;
    double lr_stage12 = 1e-4;
    double lr_stage3 = 1e-5;
    double lr_decay = 10.0;
    std::size_t decay_patience = 2;
    std::size_t stop_patience = 3;
    std::size_t max_epochs = 100;
    std::uint64_t seed = 0;
    bool verbose = false;

    void validate() const
    {
        if (batch == 0 || decay_patience == 0 || stop_patience == 0 || max_epochs == 0)
            throw ConfigError("batch, patiences and max_epochs must be positive");
        if (!(lr_stage12 > 0.0) || !(lr_stage3 > 0.0) || !(lr_decay >= 1.0))
            throw ConfigError("learning rates must be positive and lr_decay >= 1");
    }
};

/// Channel samples; samples[s][b] is block b of sequence s (a single block unless multi-block).
struct Dataset {
    SystemConfig sys;
    ChannelConfig chan;
    std::optional<TemporalConfig> temporal;
    std::vector<std::vector<MatrixStack>> samples;

    std::size_t blocks() const { return samples.empty() ? 0 : samples[0].size(); }
};

struct Split {
    std::vector<std::size_t> train, val, test;
};

/// Contiguous 8:1:1 split.
inline Split split_811(std::size_t n)
{
    Split s;
    const std::size_t n_val = n / 10, n_test = n / 10, n_train = n - n_val - n_test;
    for (std::size_t i = 0; i < n; ++i)
        (i < n_train ? s.train : i < n_train + n_val ? s.val : s.test).push_back(i);
    return s;
}

struct EpochLog {
    std::string stage;
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
};

/// Turns off gradient tracking for a set of parameters until destroyed.
class NoGrad {
public:
    explicit NoGrad(std::vector<Var> params) : params_(std::move(params))
    {
        for (auto& p : params_) {
            saved_.push_back(p.requires_grad());
            p.set_requires_grad(false);
        }
    }
    ~NoGrad()
    {
        for (std::size_t i = 0; i < params_.size(); ++i)
            params_[i].set_requires_grad(saved_[i]);
    }
    NoGrad(const NoGrad&) = delete;
    NoGrad& operator=(const NoGrad&) = delete;

private:
    std::vector<Var> params_;
    std::vector<bool> saved_;
};

namespace detail {

    inline std::vector<Tensor> snapshot(const std::vector<Var>& ps)
    {
        std::vector<Tensor> out;
        for (const auto& p : ps)
            out.push_back(p.value());
        return out;
    }

    inline void restore(std::vector<Var>& ps, const std::vector<Tensor>& snap)
    {
        for (std::size_t i = 0; i < ps.size(); ++i)
            ps[i].mutable_value() = snap[i];
    }

    // Tag values kept apart from trial indices when deriving seeds.
    enum SeedTag : std::uint64_t { kTrainDraw = 0x7472, kValDraw = 0x76616c, kShuffle = 0x73687566 };

} // namespace detail

/// Per-sample loss. `epoch` is 0 for validation, where draws must not change between calls.
using SampleLossFn = std::function<Var(std::size_t sample, std::size_t epoch, std::size_t batch)>;

/// One training stage: Adam on `trainable`, plateau decay, early stopping, best weights restored.
inline std::vector<EpochLog> run_stage(const std::string& name, std::uint64_t stage_tag, std::vector<Var> all, std::vector<Var> trainable,
                                       double lr, const SampleLossFn& loss_fn, const std::vector<std::size_t>& train,
                                       const std::vector<std::size_t>& val, const TrainConfig& cfg)
{
    cfg.validate();
    if (train.empty() || val.empty())
        throw std::invalid_argument("run_stage: empty training or validation split");
    for (auto& p : all)
        p.set_requires_grad(false);
    for (auto& p : trainable)
        p.set_requires_grad(true);

    auto validation_loss = [&] {
        NoGrad ng(all);
        double acc = 0.0;
        for (auto s : val)
            acc += loss_fn(s, 0, 1).item();
        return acc / static_cast<double>(val.size());
    };

    std::vector<EpochLog> log;
    ad::AdamState adam;
    adam.lr = lr;
    double best = validation_loss();
    auto best_snap = detail::snapshot(trainable);
    log.push_back({name, 0, std::numeric_limits<double>::quiet_NaN(), best, adam.lr});
    std::size_t wait = 0, decay_wait = 0;
    std::vector<std::size_t> order = train;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(cfg.seed, {detail::kShuffle, stage_tag, epoch}));
        std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
        double train_acc = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
            const std::size_t len = std::min(cfg.batch, order.size() - start);
            ad::zero_grad(trainable);
            double batch_loss = 0.0;
            for (std::size_t i = start; i < start + len; ++i) {
                const Var loss = loss_fn(order[i], epoch, len);
                if (!std::isfinite(loss.item()))
                    throw std::runtime_error("non-finite loss in " + name + " at epoch " + std::to_string(epoch) + ", sample " +
                                             std::to_string(order[i]) + " (lr " + std::to_string(adam.lr) + ")");
                ad::backward(loss);
                batch_loss += loss.item();
            }
            ad::adam_step(trainable, adam);
            train_acc += batch_loss * static_cast<double>(len);
        }
        const double v = validation_loss();
        log.push_back({name, epoch, train_acc / static_cast<double>(order.size()), v, adam.lr});
        if (cfg.verbose)
            std::cerr << name << " epoch " << epoch << " train " << log.back().train_loss << " val " << v << " lr " << adam.lr << "\n";
        if (v < best) {
            best = v;
            best_snap = detail::snapshot(trainable);
            wait = decay_wait = 0;
        } else {
            ++wait;
            if (++decay_wait >= cfg.decay_patience) {
                adam.lr /= cfg.lr_decay;
                decay_wait = 0;
            }
            if (wait >= cfg.stop_patience)
                break;
        }
    }
    detail::restore(trainable, best_snap);
    return log;
}

/// Draws for one (sample, epoch): beams for random-matrix training and the raw noise.
struct Draw {
    BeamPhases beams;
    std::vector<Tensor> noise;
};

inline Draw make_draw(const SystemConfig& sys, std::uint64_t seed, std::uint64_t stage_tag, std::size_t sample, std::size_t epoch,
                      std::size_t block = 0)
{
    const std::uint64_t s = epoch == 0 ? derive_seed(seed, {detail::kValDraw, sample, block})
                                       : derive_seed(seed, {detail::kTrainDraw, stage_tag, sample, epoch, block});
    Rng rng(s);
    Draw d;
    d.beams = random_phases(sys, rng);
    d.noise = draw_noise(sys, rng);
    return d;
}

/// Loss of one single-block sample, measuring through `mg` with the given noise.
inline Var single_block_loss(const MeasurementGraph& mg, const MatrixStack& h, const std::vector<Tensor>& noise, const NetworkParams& net,
                             const NetContext& ctx, std::size_t batch)
{
    const Var y = received_graph(mg, angular_tensor(h, ctx.dict), noise, ctx);
    return sample_loss(forward_graph(mg, y, net, ctx).h_hat, h, batch);
}

enum class BeamMode { RandomPerDraw, Learned };

inline SampleLossFn single_block_loss_fn(const Dataset& data, const NetworkParams& net, const NetContext& ctx, BeamMode mode,
                                         std::uint64_t seed, std::uint64_t stage_tag)
{
    return [&data, &net, &ctx, mode, seed, stage_tag](std::size_t s, std::size_t epoch, std::size_t batch) {
        const Draw d = make_draw(ctx.sys, seed, stage_tag, s, epoch);
        MeasurementGraph mg;
        if (mode == BeamMode::RandomPerDraw) {
            mg = measurement_graph(d.beams, ctx);
        } else {
            const auto [w, f] = beams_from_phases(net, ctx.sys);
            mg = measurement_graph(w, f, ctx);
        }
        return single_block_loss(mg, data.samples[s][0], d.noise, net, ctx, batch);
    };
}

/// Stage 1 filters with random beams, stage 2 phases only, stage 3 everything at the small rate.
inline NetworkParams train_single(const Dataset& data, const Split& split, const NetConfig& net_cfg, const TrainConfig& cfg,
                                  std::vector<EpochLog>* log = nullptr, std::optional<NetworkParams> init = std::nullopt)
{
    if (data.samples.empty())
        throw std::invalid_argument("train: empty dataset");
    const NetContext ctx(data.sys);
    Rng init_rng(derive_seed(cfg.seed, {0x696e6974}));
    NetworkParams net = init ? std::move(*init) : init_network(data.sys, net_cfg, init_rng);
    const auto all = net.all_params();
    auto append = [&](std::vector<EpochLog> l) {
        if (log)
            log->insert(log->end(), l.begin(), l.end());
    };

    append(run_stage("stage1", 1, all, net.conv_params(), cfg.lr_stage12,
                     single_block_loss_fn(data, net, ctx, BeamMode::RandomPerDraw, cfg.seed, 1), split.train, split.val, cfg));
    net.stage = "stage1";
    append(run_stage("stage2", 2, all, net.phase_params(), cfg.lr_stage12,
                     single_block_loss_fn(data, net, ctx, BeamMode::Learned, cfg.seed, 2), split.train, split.val, cfg));
    net.stage = "stage2";
    std::vector<Var> both = net.conv_params();
    for (auto& p : net.phase_params())
        both.push_back(p);
    append(run_stage("stage3", 3, all, both, cfg.lr_stage3, single_block_loss_fn(data, net, ctx, BeamMode::Learned, cfg.seed, 3),
                     split.train, split.val, cfg));
    net.stage = "stage3";
    for (auto p : all)
        p.set_requires_grad(true);
    return net;
}

// ---- multi-block -------------------------------------------------------

enum class CombinerMode { Fixed, Predicted };

/// Loss on block 2 of a two-block sequence. Block 1 is estimated with zero time features and the
/// learned fixed beams; its |X| (detached) feeds block 2.
inline Var multi_block_loss(const Dataset& data, std::size_t s, std::size_t epoch, std::size_t batch, const NetworkParams& net,
                            const NetContext& ctx, CombinerMode mode, std::uint64_t seed, std::uint64_t stage_tag)
{
    require_dims(data.samples[s].size() >= 2, "multi-block training needs two-block sequences");
    const std::size_t G = ctx.sys.grid, K = ctx.sys.n_sc;
    Tensor f4_prev;
    {
        NoGrad ng(net.all_params());
        const Draw d1 = make_draw(ctx.sys, seed, stage_tag, s, epoch, 0);
        const auto [w, f] = beams_from_phases(net, ctx.sys);
        const MeasurementGraph mg1 = measurement_graph(w, f, ctx);
        const Var y1 = received_graph(mg1, angular_tensor(data.samples[s][0], ctx.dict), d1.noise, ctx);
        const ForwardNodes fw = forward_graph(mg1, y1, net, ctx, ad::constant(Tensor({G, G, K, 1})));
        f4_prev = time_features(fw.x_hat.value(), G);
    }
    const Draw d2 = make_draw(ctx.sys, seed, stage_tag, s, epoch, 1);
    const Var f4 = ad::constant(f4_prev);
    auto [w, f] = beams_from_phases(net, ctx.sys);
    if (mode == CombinerMode::Predicted) {
        require_dims(net.combiner.has_value(), "multi_block_loss: combiner head missing");
        w = predict_combiner(f4, *net.combiner, ctx.sys);
    }
    const MeasurementGraph mg2 = measurement_graph(w, f, ctx);
    const MatrixStack& h2 = data.samples[s][1];
    const Var y2 = received_graph(mg2, angular_tensor(h2, ctx.dict), d2.noise, ctx);
    return sample_loss(forward_graph(mg2, y2, net, ctx, f4).h_hat, h2, batch);
}

/// Filters with F4 (from a trained single-block net), then the combiner head, then joint fine-tuning.
/// Transmit beams stay at the single-block values throughout.
inline NetworkParams train_multi(const Dataset& data, const Split& split, const NetworkParams& single, const TrainConfig& cfg,
                                 std::vector<EpochLog>* log = nullptr)
{
    if (data.samples.empty())
        throw std::invalid_argument("train: empty dataset");
    const NetContext ctx(data.sys);
    NetworkParams net = extend_to_multi_block(single);
    Rng init_rng(derive_seed(cfg.seed, {0x636f6d62}));
    net.combiner = init_combiner(data.sys, init_rng);
    const auto all = net.all_params();
    auto append = [&](std::vector<EpochLog> l) {
        if (log)
            log->insert(log->end(), l.begin(), l.end());
    };
    auto fn = [&](CombinerMode mode, std::uint64_t tag) -> SampleLossFn {
        return [&, mode, tag](std::size_t s, std::size_t epoch, std::size_t batch) {
            return multi_block_loss(data, s, epoch, batch, net, ctx, mode, cfg.seed, tag);
        };
    };
    append(run_stage("multi1", 11, all, net.conv_params(), cfg.lr_stage12, fn(CombinerMode::Fixed, 11), split.train, split.val, cfg));
    net.stage = "multi1";
    append(run_stage("multi2", 12, all, net.combiner_params(), cfg.lr_stage12, fn(CombinerMode::Predicted, 12), split.train, split.val, cfg));
    net.stage = "multi2";
    std::vector<Var> joint = net.conv_params();
    for (auto& p : net.combiner_params())
        joint.push_back(p);
    append(run_stage("multi3", 13, all, joint, cfg.lr_stage3, fn(CombinerMode::Predicted, 13), split.train, split.val, cfg));
    net.stage = "multi3";
    for (auto p : all)
        p.set_requires_grad(true);
    return net;
}

// ---- evaluation --------------------------------------------------------

/// Mean NMSE of a single-block net over samples, with either per-sample random beams or the learned ones.
inline double evaluate_single(const Dataset& data, const std::vector<std::size_t>& idx, const NetworkParams& net, BeamMode mode,
                              std::uint64_t seed)
{
    const NetContext ctx(data.sys);
    NoGrad ng(net.all_params());
    double acc = 0.0;
    for (auto s : idx) {
        const Draw d = make_draw(ctx.sys, seed, 0, s, 0);
        const MeasurementGraph mg = mode == BeamMode::RandomPerDraw ? measurement_graph(d.beams, ctx) : measurement_graph(net.phases(), ctx);
        const MatrixStack& h = data.samples[s][0];
        const Var y = received_graph(mg, angular_tensor(h, ctx.dict), d.noise, ctx);
        acc += nmse(h, stack_from_tensor(forward_graph(mg, y, net, ctx).h_hat.value()));
    }
    return acc / static_cast<double>(idx.size());
}

/// SBL with the same draws as evaluate_single, for a like-for-like baseline.
inline double evaluate_sbl(const Dataset& data, const std::vector<std::size_t>& idx, const BeamPhases* learned, std::uint64_t seed,
                           const EstimatorOptions& opts)
{
    const NetContext ctx(data.sys);
    double acc = 0.0;
    for (auto s : idx) {
        const Draw d = make_draw(data.sys, seed, 0, s, 0);
        const BeamPhases& beams = learned ? *learned : d.beams;
        const MeasurementSetup setup = make_setup(beams, ctx.dict, data.sys);
        // same raw noise as the network sees
        const MatrixStack& h = data.samples[s][0];
        const Tensor y = received_graph(measurement_graph(beams, ctx), angular_tensor(h, ctx.dict), d.noise, ctx).value();
        acc += nmse(h, sblu::estimate(ReceivedSignal{y.to_complex()}, setup, ctx.dict, opts).h_hat);
    }
    return acc / static_cast<double>(idx.size());
}

} // namespace sblu::net
