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

// sblu command line: gen, train, eval, bench, sweep, flops.

#include "sblu/bench/benchmark.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>

using namespace sblu;
namespace fs = std::filesystem;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out = ".";
    std::optional<std::size_t> trials;
    std::string checkpoint;
    std::vector<std::string> set;
    std::optional<std::size_t> workers;
};

void add_common(CLI::App* app, Common& c)
{
    app->add_option("--config", c.config, "key=value experiment file")->check(CLI::ExistingFile);
    app->add_option("--seed", c.seed, "master seed (u64)");
    app->add_option("--out", c.out, "output directory");
    app->add_option("--trials", c.trials, "Monte-Carlo trials");
    app->add_option("--checkpoint", c.checkpoint, "network checkpoint");
    app->add_option("--set", c.set, "extra key=value override, repeatable");
    app->add_option("--workers", c.workers, "worker threads");
}

bench::ExperimentSpec make_spec(const Common& c)
{
    io::KeyValues kv;
    if (!c.config.empty())
        kv = io::parse_key_values(io::read_file(c.config));
    for (const auto& s : c.set) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + s + "'");
        kv.emplace_back(io::trim(s.substr(0, eq)), io::trim(s.substr(eq + 1)));
    }
    if (c.seed)
        kv.emplace_back("seed", std::to_string(*c.seed));
    if (c.trials)
        kv.emplace_back("trials", std::to_string(*c.trials));
    if (c.workers)
        kv.emplace_back("workers", std::to_string(*c.workers));
    return bench::spec_from_kv(kv);
}

fs::path out_dir(const Common& c)
{
    fs::create_directories(c.out);
    return fs::path(c.out);
}

void write_text(const fs::path& p, const std::string& s)
{
    io::write_file(p.string(), s);
    std::cout << "wrote " << p.string() << "\n";
}

std::string epoch_log_text(const std::vector<net::EpochLog>& log)
{
    std::string s = "stage,epoch,train_loss,val_loss,lr\n";
    for (const auto& e : log)
        s += e.stage + "," + std::to_string(e.epoch) + "," + io::format_number(e.train_loss) + "," + io::format_number(e.val_loss) + "," +
             io::format_number(e.lr) + "\n";
    return s;
}

int cmd_gen(const Common& c, std::optional<std::size_t> count)
{
    const auto spec = make_spec(c);
    const std::size_t n = count.value_or(spec.dataset_size);
    const auto d = bench::generate_dataset(spec, n);
    const fs::path p = out_dir(c) / "dataset.sblu";
    bench::save_dataset(p.string(), d, spec);
    std::cout << "wrote " << p.string() << " (" << n << " samples, " << d.blocks() << " block(s), seed " << spec.seed << ")\n";
    return 0;
}

int cmd_train(const Common& c, const std::string& dataset_path)
{
    const auto loaded = bench::load_dataset(dataset_path.empty() ? (fs::path(c.out) / "dataset.sblu").string() : dataset_path);
    auto spec = make_spec(c);
    spec.train.verbose = true;
    const net::Dataset& data = loaded.data;
    const net::Split split = net::split_811(data.samples.size());
    std::vector<net::EpochLog> log;
    const fs::path dir = out_dir(c);
    std::string run = "[spec]\n" + bench::kv_text(bench::spec_to_kv(spec)) + "[dataset]\n" + dataset_path + "\n";

    net::NetworkParams single;
    if (!c.checkpoint.empty()) {
        auto ck = net::load_checkpoint(c.checkpoint);
        if (ck.net.cfg.multi_block)
            throw ConfigError("--checkpoint must be a single-block network");
        single = std::move(ck.net);
        run += "init checkpoint " + c.checkpoint + " hash=" + net::checkpoint_hash(c.checkpoint) + "\n";
    } else {
        net::NetConfig nc = spec.net;
        nc.multi_block = false;
        single = net::train_single(data, split, nc, spec.train, &log);
    }
    fs::path ck_path = dir / "checkpoint.sblu";
    if (c.checkpoint.empty())
        net::save_checkpoint(ck_path.string(), single, data.sys);
    if (spec.net.multi_block) {
        if (data.blocks() < 2)
            throw ConfigError("multi_block training needs a two-block dataset (blocks=2 at gen time)");
        const auto multi = net::train_multi(data, split, single, spec.train, &log);
        ck_path = dir / "checkpoint_multi.sblu";
        net::save_checkpoint(ck_path.string(), multi, data.sys);
    }
    run += "checkpoint " + ck_path.string() + " hash=" + net::checkpoint_hash(ck_path.string()) + "\n";
    std::cout << "wrote " << ck_path.string() << " hash=" << net::checkpoint_hash(ck_path.string()) << "\n";
    write_text(dir / "train_epochs.csv", epoch_log_text(log));
    write_text(dir / "train.log", run);
    return 0;
}

int cmd_eval(const Common& c, const std::string& dataset_path)
{
    if (c.checkpoint.empty())
        throw ConfigError("eval needs --checkpoint");
    const auto spec = make_spec(c);
    const auto loaded = bench::load_dataset(dataset_path.empty() ? (fs::path(c.out) / "dataset.sblu").string() : dataset_path);
    const auto ck = net::load_checkpoint(c.checkpoint);
    if (ck.net.cfg.multi_block)
        throw ConfigError("eval covers single-block networks; use bench with sblnet_mb for multi-block");
    if (!bench::same_geometry(ck.sys, loaded.data.sys))
        throw ConfigError("checkpoint and dataset disagree on the system geometry");
    const auto test = net::split_811(loaded.data.samples.size()).test;
    const BeamPhases learned = ck.net.phases();
    EstimatorOptions o;
    o.max_iters = ck.net.cfg.layers;
    std::vector<io::ResultRow> rows;
    const std::size_t L = ck.net.cfg.layers;
    rows.push_back({"sblnet", "none", 0, net::evaluate_single(loaded.data, test, ck.net, net::BeamMode::Learned, spec.seed), test.size(),
                    bench::flops("sblnet", ck.sys, L, ck.net.cfg), 0});
    rows.push_back({"sbl", "none", 0, net::evaluate_sbl(loaded.data, test, &learned, spec.seed, o), test.size(), bench::flops("sbl", ck.sys, L), 0});
    o.max_iters = spec.max_iters;
    rows.push_back({"sbl", "none", 0, net::evaluate_sbl(loaded.data, test, &learned, spec.seed, o), test.size(),
                    bench::flops("sbl", ck.sys, spec.max_iters), 0});
    const fs::path dir = out_dir(c);
    write_text(dir / "eval.csv", io::to_csv(rows));
    write_text(dir / "eval.log", "checkpoint " + c.checkpoint + " stage=" + ck.net.stage + " hash=" + net::checkpoint_hash(c.checkpoint) +
                                     "\nseed=" + std::to_string(spec.seed) + "\ntest_samples=" + std::to_string(test.size()) + "\n");
    std::cout << io::to_csv(rows);
    return 0;
}

int cmd_bench(const Common& c, bool timing)
{
    auto spec = make_spec(c);
    spec.timing = spec.timing || timing;
    if (!c.checkpoint.empty()) {
        if (net::load_checkpoint(c.checkpoint).net.cfg.multi_block)
            spec.checkpoint_multi = c.checkpoint;
        else
            spec.checkpoint = c.checkpoint;
    }
    const auto rep = bench::run_benchmark(spec);
    const fs::path dir = out_dir(c);
    write_text(dir / bench::figure_csv_name(spec.sweep_param), io::to_csv(rep.rows));
    write_text(dir / "bench.log", rep.log);
    write_text(dir / "overhead.txt", bench::overhead_report(spec.sys, spec.net, spec.max_iters) + bench::complexity_mismatch_note());
    std::cout << io::to_csv(rep.rows);
    return 0;
}

int cmd_sweep(const Common& c, const std::string& variant_id)
{
    auto spec = make_spec(c);
    if (c.trials)
        spec.validation_trials = *c.trials;
    const auto v = parse_variant(variant_id);
    if (!v || !pattern_coupled(*v))
        throw ConfigError("sweep --variant must be pcsbl or mpcsbl");
    const auto grid = bench::hyper_grid(spec);
    const auto r = bench::hyper_sweep(*v, spec, grid);
    // one CSV per (a, b) pair, beta on the sweep axis
    std::map<std::pair<double, double>, std::vector<io::ResultRow>> tables;
    for (std::size_t g = 0; g < grid.size(); ++g)
        tables[{grid[g].a, grid[g].b}].push_back(
            {variant_id, "beta", grid[g].beta, r.nmse[g], spec.validation_trials, bench::flops(variant_id, spec.sys, spec.max_iters), 0});
    const fs::path dir = out_dir(c);
    for (const auto& [ab, rows] : tables) {
        write_text(dir / ("hyper_sweep_" + variant_id + "_a" + io::format_number(ab.first) + "_b" + io::format_number(ab.second) + ".csv"),
                   io::to_csv(rows));
        std::cout << "a=" << io::format_number(ab.first) << " b=" << io::format_number(ab.second) << "\n" << io::to_csv(rows);
    }
    std::cout << "best beta=" << io::format_number(r.best.beta) << " a=" << io::format_number(r.best.a)
              << " b=" << io::format_number(r.best.b) << "\n";
    return 0;
}

int cmd_flops(const Common& c, std::optional<std::size_t> iters)
{
    const auto spec = make_spec(c);
    const std::string r = bench::overhead_report(spec.sys, spec.net, iters.value_or(spec.max_iters)) + bench::complexity_mismatch_note();
    std::cout << r;
    if (c.out != ".")
        write_text(out_dir(c) / "flops.txt", r);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"sparse Bayesian learning channel estimation toolkit"};
    app.require_subcommand(1);
    Common c;

    auto* gen = app.add_subcommand("gen", "generate a channel dataset");
    std::optional<std::size_t> count;
    gen->add_option("--count", count, "number of samples (default dataset_size)");
    add_common(gen, c);

    auto* train = app.add_subcommand("train", "train a network on a dataset");
    std::string dataset;
    train->add_option("--dataset", dataset, "dataset file (default <out>/dataset.sblu)");
    add_common(train, c);

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    eval->add_option("--dataset", dataset, "dataset file (default <out>/dataset.sblu)");
    add_common(eval, c);

    auto* bench_cmd = app.add_subcommand("bench", "Monte-Carlo benchmark to CSV");
    bool timing = false;
    bench_cmd->add_flag("--timing", timing, "fill the seconds column");
    add_common(bench_cmd, c);

    auto* sweep = app.add_subcommand("sweep", "pattern-coupling hyperparameter search");
    std::string variant = "pcsbl";
    sweep->add_option("--variant", variant, "pcsbl or mpcsbl");
    add_common(sweep, c);

    auto* fl = app.add_subcommand("flops", "complexity and pilot overhead report");
    std::optional<std::size_t> iters;
    fl->add_option("--iters", iters, "iterations (default max_iters)");
    add_common(fl, c);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*gen)
            return cmd_gen(c, count);
        if (*train)
            return cmd_train(c, dataset);
        if (*eval)
            return cmd_eval(c, dataset);
        if (*bench_cmd)
            return cmd_bench(c, timing);
        if (*sweep)
            return cmd_sweep(c, variant);
        if (*fl)
            return cmd_flops(c, iters);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
