// SPDX-License-Identifier: Apache-2.0
//
// qdchan: quasi-deterministic mmWave channel generator
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

// Command-line front end: trace, generate, compare, validate.
// Exit codes: 0 success, 2 configuration error, 3 data error.

#include "qdchan.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

namespace {

constexpr int exit_config = 2;
constexpr int exit_data = 3;

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> model;
    std::string out = "-";
    std::string sim, ref, in;
    std::optional<double> floor_db;
    bool no_floor = false;
};

qdchan::ScenarioConfig load(const Options &o)
{
    auto c = qdchan::load_config(o.config);
    if (o.seed)
        c.seed = *o.seed;
    if (o.threads)
        c.threads = *o.threads;
    if (o.model)
        c.qd.variant = qdchan::parse_model_variant(*o.model);
    return c;
}

template <class Fn>
void with_output(const std::string &path, Fn fn)
{
    if (path == "-") {
        fn(std::cout);
        return;
    }
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw qdchan::ConfigError("--out", "cannot write '" + path + "'");
    fn(os);
}

std::ifstream open_input(const std::string &path, const char *flag)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw qdchan::ConfigError(flag, "cannot open '" + path + "'");
    return in;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Quasi-deterministic mmWave channel generator"};
    app.require_subcommand(1);
    Options o;

    auto *trace = app.add_subcommand("trace", "Trace deterministic rays for every receiver position");
    auto *generate = app.add_subcommand("generate", "Generate QD channel instances (MPC table)");
    auto *compare = app.add_subcommand("compare", "KS comparison of two MPC tables");
    auto *validate = app.add_subcommand("validate", "Re-read an MPC table and check generator invariants");

    for (auto *sub : {trace, generate}) {
        sub->add_option("--config", o.config, "Scenario config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "Override the config seed");
        sub->add_option("--threads", o.threads, "Worker threads over receiver positions");
        sub->add_option("--out", o.out, "Output table ('-' for stdout)");
    }
    generate->add_option("--model", o.model, "Override model: drays_only, reduced, complete");

    compare->add_option("--sim", o.sim, "Simulated MPC table")->required();
    compare->add_option("--ref", o.ref, "Reference MPC table")->required();
    compare->add_option("--config", o.config, "Scenario config supplying floor_db");
    compare->add_option("--floor", o.floor_db, "Dynamic-range floor in dB (default -120)");
    compare->add_flag("--no-floor", o.no_floor, "Keep every MPC");
    compare->add_option("--out", o.out, "Output directory for CDF files and reports")->required();

    validate->add_option("--in", o.in, "MPC table to check")->required();
    validate->add_option("--config", o.config, "Unused; accepted for symmetry");
    validate->add_option("--out", o.out, "Where to write the findings ('-' for stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_config;
    }

    try {
        if (trace->parsed()) {
            const auto c = load(o);
            with_output(o.out, [&](std::ostream &os) { qdchan::run_trace(c, os); });
        } else if (generate->parsed()) {
            const auto c = load(o);
            with_output(o.out, [&](std::ostream &os) { qdchan::run_generate(c, os); });
        } else if (compare->parsed()) {
            qdchan::CompareOptions opt;
            if (!o.config.empty())
                opt.floor_db = qdchan::load_config(o.config).floor_db;
            if (o.floor_db)
                opt.floor_db = *o.floor_db;
            if (o.no_floor)
                opt.floor_db = -std::numeric_limits<double>::infinity();
            auto sim = open_input(o.sim, "--sim");
            auto ref = open_input(o.ref, "--ref");
            const auto report = qdchan::run_compare(sim, ref, opt, o.out);
            std::cout << qdchan::to_text(report);
        } else if (validate->parsed()) {
            auto in = open_input(o.in, "--in");
            const auto problems = qdchan::validate_mpc_table(qdchan::read_mpc_table(in));
            with_output(o.out, [&](std::ostream &os) {
                for (const auto &p : problems)
                    os << p << "\n";
                os << (problems.empty() ? "OK" : "FAILED") << " (" << problems.size() << " problems)\n";
            });
            return problems.empty() ? 0 : exit_data;
        }
    } catch (const qdchan::ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_data;
    }
    return 0;
}
