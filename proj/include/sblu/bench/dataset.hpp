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

#include "sblu/bench/spec.hpp"
#include "sblu/io/container.hpp"
#include "sblu/net/train.hpp"

#include <string>

namespace sblu::bench {

inline constexpr const char* kDatasetKind = "dataset";
inline constexpr std::uint64_t kDatasetTag = 0x64617461;

/// Channel sequence s; each sample has its own stream so any subset regenerates identically.
inline std::vector<MatrixStack> sample_sequence(const ExperimentSpec& spec, std::uint64_t stream_seed)
{
    Rng rng(stream_seed);
    ChannelRealization r = sample_channel(spec.sys, spec.chan, rng);
    std::vector<MatrixStack> seq{r.h};
    if (spec.temporal) {
        r = evolve(r, spec.sys, *spec.temporal, rng);
        seq.push_back(r.h);
    }
    return seq;
}

inline net::Dataset generate_dataset(const ExperimentSpec& spec, std::size_t count)
{
    spec.validate();
    net::Dataset d;
    d.sys = spec.sys;
    d.chan = spec.chan;
    d.temporal = spec.temporal;
    d.samples.reserve(count);
    for (std::size_t s = 0; s < count; ++s)
        d.samples.push_back(sample_sequence(spec, derive_seed(spec.seed, {kDatasetTag, s})));
    return d;
}

/// One tensor "h" of shape (count, blocks, K, N_R, N_T, 2); the spec goes in the metadata.
inline io::Container dataset_container(const net::Dataset& d, const ExperimentSpec& spec)
{
    io::Container c;
    c.meta.emplace_back("kind", kDatasetKind);
    c.meta.emplace_back("count", std::to_string(d.samples.size()));
    for (auto& kv : spec_to_kv(spec))
        c.meta.push_back(kv);
    const std::size_t n = d.samples.size(), b = d.blocks(), K = d.sys.n_sc, nr = d.sys.n_rx, nt = d.sys.n_tx;
    ad::Tensor t({n, b, K, nr, nt, 2});
    std::size_t i = 0;
    for (const auto& seq : d.samples) {
        require_dims(seq.size() == b, "dataset: ragged block counts");
        for (const auto& stack : seq) {
            require_dims(stack.size() == K, "dataset: wrong subcarrier count");
            for (const auto& m : stack) {
                require_dims(static_cast<std::size_t>(m.rows()) == nr && static_cast<std::size_t>(m.cols()) == nt,
                             "dataset: wrong channel shape");
                for (std::size_t r = 0; r < nr; ++r)
                    for (std::size_t cc = 0; cc < nt; ++cc) {
                        const cplx v = m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cc));
                        t[i++] = v.real();
                        t[i++] = v.imag();
                    }
            }
        }
    }
    c.tensors.push_back({"h", std::move(t), 64});
    return c;
}

struct LoadedDataset {
    ExperimentSpec spec;
    net::Dataset data;
};

inline LoadedDataset dataset_from_container(const io::Container& c)
{
    const auto* kind = c.meta_value("kind");
    if (!kind || *kind != kDatasetKind)
        throw io::FormatError("container is not a dataset");
    io::KeyValues kv;
    for (const auto& [k, v] : c.meta)
        if (k != "kind" && k != "count")
            kv.emplace_back(k, v);
    LoadedDataset out;
    out.spec = spec_from_kv(kv);
    net::Dataset& d = out.data;
    d.sys = out.spec.sys;
    d.chan = out.spec.chan;
    d.temporal = out.spec.temporal;
    const ad::Tensor& t = c.at("h");
    const std::size_t K = d.sys.n_sc, nr = d.sys.n_rx, nt = d.sys.n_tx;
    if (t.rank() != 6 || t.shape[2] != K || t.shape[3] != nr || t.shape[4] != nt || t.shape[5] != 2)
        throw io::FormatError("dataset: tensor 'h' has shape " + ad::shape_str(t.shape) + ", inconsistent with the metadata");
    if (t.shape[1] != (d.temporal ? 2u : 1u))
        throw io::FormatError("dataset: block count does not match the metadata");
    std::size_t i = 0;
    d.samples.resize(t.shape[0]);
    for (auto& seq : d.samples) {
        seq.resize(t.shape[1]);
        for (auto& stack : seq) {
            stack.assign(K, CMatrix(static_cast<Eigen::Index>(nr), static_cast<Eigen::Index>(nt)));
            for (auto& m : stack)
                for (std::size_t r = 0; r < nr; ++r)
                    for (std::size_t cc = 0; cc < nt; ++cc, i += 2)
                        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(cc)) = {t[i], t[i + 1]};
        }
    }
    return out;
}

inline void save_dataset(const std::string& path, const net::Dataset& d, const ExperimentSpec& spec)
{
    io::save_container(path, dataset_container(d, spec));
}

inline LoadedDataset load_dataset(const std::string& path) { return dataset_from_container(io::load_container(path)); }

} // namespace sblu::bench
