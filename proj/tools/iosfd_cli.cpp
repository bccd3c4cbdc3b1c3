// SPDX-License-Identifier: Apache-2.0
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

// Scenario runner: executes a sweep and writes results.csv, manifest.json and
// optional traces, or aggregates an existing results file.

#include "iosfd/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitInfeasible = 2;

int cmd_run(const std::string& scenario_path, const std::string& out_dir, std::uint64_t seed_base, int parallel)
{
    iosfd::Scenario s;
    try {
        s = iosfd::load_scenario(scenario_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    const auto points = iosfd::expand(s);
    std::cerr << s.id << ": " << points.size() << " points x " << s.seeds << " seeds on " << parallel << " worker(s)\n";
    const auto recs = iosfd::run_scenario(s, seed_base, parallel);
    iosfd::RunOutputs out;
    try {
        out = iosfd::write_run(out_dir, s, recs, seed_base, parallel);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    std::size_t bad = 0;
    for (const auto& r : recs) bad += iosfd::is_excluded(r.status);
    std::cout << "wrote " << out.csv.string() << " (" << recs.size() << " records, " << bad << " infeasible)\n";
    return out.any_infeasible ? kExitInfeasible : kExitOk;
}

int cmd_summarize(const std::string& in_path, std::string out_path)
{
    std::ifstream in(in_path);
    if (!in) {
        std::cerr << "error: cannot open '" << in_path << "'\n";
        return kExitConfig;
    }
    try {
        const auto table = iosfd::read_csv(in);
        const auto rows = iosfd::summarize(table);
        if (out_path.empty()) {
            std::filesystem::path p(in_path);
            out_path = (p.parent_path() / (p.stem().string() + "_summary.csv")).string();
        }
        std::ofstream out(out_path);
        iosfd::write_summary_csv(out, table, rows);
        if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
        iosfd::write_summary_table(std::cout, table, rows);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"IOS-assisted full-duplex experiment runner"};
    app.require_subcommand(1);

    std::string scenario, out_dir, in_csv, summary_out;
    std::uint64_t seed_base = 1;
    int parallel = 1;

    auto* run = app.add_subcommand("run", "run a scenario sweep");
    run->add_option("--scenario", scenario, "scenario JSON file")->required()->check(CLI::ExistingFile);
    run->add_option("--out", out_dir, "output directory")->required();
    run->add_option("--seed-base", seed_base, "first seed; seed k of every point is seed-base + k");
    run->add_option("--parallel", parallel, "worker threads")->check(CLI::PositiveNumber);

    auto* sum = app.add_subcommand("summarize", "per-point mean and std of a results CSV");
    sum->add_option("--in", in_csv, "results CSV")->required()->check(CLI::ExistingFile);
    sum->add_option("--out", summary_out, "summary CSV (default: <in>_summary.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitConfig;
    }

    if (*run) return cmd_run(scenario, out_dir, seed_base, parallel);
    return cmd_summarize(in_csv, summary_out);
}
