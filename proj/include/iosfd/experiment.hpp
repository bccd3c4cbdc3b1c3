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

#pragma once

#include "iosfd/channel_model.hpp"
#include "iosfd/config.hpp"
#include "iosfd/optimizer.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#ifndef IOSFD_BUILD_ID
#define IOSFD_BUILD_ID "unknown"
#endif

namespace iosfd {

/// Sweep axes of a scenario. An axis left out of the scenario file collapses
/// to the single value taken from the base configuration.
struct SweepAxes {
    std::vector<SurfaceMode> surface{SurfaceMode::ES};
    std::vector<int> L, M, N;
    std::vector<double> P_th_dBm;
    std::vector<double> R_th;
    std::vector<double> tx_rx_distance;   ///< meters between the first tx and first rx antenna
    std::vector<double> tx_ios_distance;  ///< meters between the first tx antenna and the first element
    std::vector<double> eta{1.0};         ///< CSI quality; 1 is perfect
    std::vector<int> quant_bits{0};       ///< 0 keeps continuous phases
};

struct Scenario {
    std::string id = "scenario";
    SystemConfig base;
    OptConfig opt;
    SweepAxes axes;
    int seeds = 1;
    bool traces = false;
};

struct SweepPoint {
    SurfaceMode surface = SurfaceMode::ES;
    int L = 0, M = 0, N = 0;
    double P_th_dBm = 0.0;
    double R_th = 0.0;
    double tx_rx_distance = 0.0;
    double tx_ios_distance = 0.0;
    double eta = 1.0;
    int quant_bits = 0;
};

struct ResultRecord {
    std::string scenario;
    Objective objective = Objective::maximize_rate;
    SweepPoint point;
    std::size_t point_index = 0;
    std::uint64_t seed = 0;
    double rate = 0.0;
    double si_w = 0.0;
    int iterations = 0;
    std::string status;
    double wall_time = 0.0;
    std::string note;
    nlohmann::json trace;  ///< optimizer result, filled when the scenario asks for traces
};

namespace detail {

[[noreturn]] inline void scenario_error(const std::string& field, const std::string& what)
{
    throw std::invalid_argument("scenario field '" + field + "': " + what);
}

template <class T, class Conv>
std::vector<T> axis_values(const nlohmann::json& sweep, const std::string& name, Conv conv)
{
    const auto& j = sweep.at(name);
    if (!j.is_array()) scenario_error("sweep." + name, "expected an array");
    if (j.empty()) scenario_error("sweep." + name, "sweep axis is empty");
    std::vector<T> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(conv(j[i], "sweep." + name + "[" + std::to_string(i) + "]"));
    return out;
}

inline double json_number(const nlohmann::json& j, const std::string& field)
{
    if (!j.is_number()) scenario_error(field, "expected a number");
    return j.get<double>();
}

inline int json_int(const nlohmann::json& j, const std::string& field)
{
    if (!j.is_number_integer()) scenario_error(field, "expected an integer");
    return j.get<int>();
}

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where)
{
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) scenario_error(where.empty() ? key : where + "." + key, "unknown field");
}

inline std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

/// Scenario schema:
///   id        string (letters, digits, '-', '_')
///   system    SystemConfig object, see system_config_from_json
///   optimizer {objective, epsilon, max_outer_iters, G}
///   sweep     {surface, L, M, N, P_th_dBm, R_th, tx_rx_distance, tx_ios_distance, eta, quant_bits}
///             each an array; P_th_dBm also accepts the string "inf"
///   seeds     integer >= 1
///   traces    bool, write one JSON trace per (point, seed)
inline Scenario scenario_from_json(const nlohmann::json& j)
{
    using namespace detail;
    if (!j.is_object()) throw std::invalid_argument("scenario: expected a JSON object");
    reject_unknown(j, {"id", "system", "optimizer", "sweep", "seeds", "traces"}, "");

    Scenario s;
    if (j.contains("id")) {
        if (!j["id"].is_string()) scenario_error("id", "expected a string");
        s.id = j["id"].get<std::string>();
        const bool ok = !s.id.empty() && std::all_of(s.id.begin(), s.id.end(), [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_';
        });
        if (!ok) scenario_error("id", "use letters, digits, '-' or '_'");
    }
    if (j.contains("system")) {
        try {
            s.base = system_config_from_json(j["system"]);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(std::string("scenario section 'system': ") + e.what());
        }
    }
    if (j.contains("optimizer")) {
        const auto& o = j["optimizer"];
        if (!o.is_object()) scenario_error("optimizer", "expected an object");
        reject_unknown(o, {"objective", "epsilon", "max_outer_iters", "G"}, "optimizer");
        if (o.contains("objective")) {
            if (!o["objective"].is_string()) scenario_error("optimizer.objective", "expected a string");
            try {
                s.opt.objective = objective_from_string(o["objective"].get<std::string>());
            } catch (const std::invalid_argument& e) {
                scenario_error("optimizer.objective", e.what());
            }
        }
        if (o.contains("epsilon")) s.opt.epsilon = json_number(o["epsilon"], "optimizer.epsilon");
        if (o.contains("max_outer_iters")) s.opt.max_outer_iters = json_int(o["max_outer_iters"], "optimizer.max_outer_iters");
        if (o.contains("G")) s.opt.G = json_int(o["G"], "optimizer.G");
    }
    if (j.contains("seeds")) s.seeds = json_int(j["seeds"], "seeds");
    if (s.seeds < 1) scenario_error("seeds", "must be >= 1");
    if (j.contains("traces")) {
        if (!j["traces"].is_boolean()) scenario_error("traces", "expected true or false");
        s.traces = j["traces"].get<bool>();
    }

    auto& ax = s.axes;
    ax.L = {s.base.L};
    ax.M = {s.base.M};
    ax.N = {s.base.N};
    ax.P_th_dBm = {std::isinf(s.opt.P_th) ? std::numeric_limits<double>::infinity() : watt_to_dbm(s.opt.P_th)};
    ax.R_th = {s.opt.R_th};
    ax.tx_rx_distance = {distance(s.base.tx_anchor, s.base.rx_anchor)};
    ax.tx_ios_distance = {distance(s.base.tx_anchor, s.base.ios_anchor)};
    if (j.contains("sweep")) {
        const auto& sw = j["sweep"];
        if (!sw.is_object()) scenario_error("sweep", "expected an object");
        reject_unknown(sw,
                       {"surface", "L", "M", "N", "P_th_dBm", "R_th", "tx_rx_distance", "tx_ios_distance", "eta",
                        "quant_bits"},
                       "sweep");
        auto positive_int = [](const nlohmann::json& v, const std::string& f) {
            const int x = json_int(v, f);
            if (x < 1) scenario_error(f, "must be >= 1");
            return x;
        };
        auto positive = [](const nlohmann::json& v, const std::string& f) {
            const double x = json_number(v, f);
            if (!(x > 0.0)) scenario_error(f, "must be > 0");
            return x;
        };
        if (sw.contains("surface"))
            ax.surface = axis_values<SurfaceMode>(sw, "surface", [](const nlohmann::json& v, const std::string& f) {
                if (!v.is_string()) scenario_error(f, "expected \"ES\", \"MS\" or \"WO\"");
                try {
                    return surface_from_string(v.get<std::string>());
                } catch (const std::invalid_argument& e) {
                    scenario_error(f, e.what());
                }
            });
        if (sw.contains("L")) ax.L = axis_values<int>(sw, "L", positive_int);
        if (sw.contains("M")) ax.M = axis_values<int>(sw, "M", positive_int);
        if (sw.contains("N")) ax.N = axis_values<int>(sw, "N", positive_int);
        if (sw.contains("P_th_dBm"))
            ax.P_th_dBm = axis_values<double>(sw, "P_th_dBm", [](const nlohmann::json& v, const std::string& f) {
                if (v.is_string() && v.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
                return json_number(v, f);
            });
        if (sw.contains("R_th"))
            ax.R_th = axis_values<double>(sw, "R_th", [](const nlohmann::json& v, const std::string& f) {
                const double x = json_number(v, f);
                if (!(x >= 0.0)) scenario_error(f, "must be >= 0");
                return x;
            });
        if (sw.contains("tx_rx_distance")) ax.tx_rx_distance = axis_values<double>(sw, "tx_rx_distance", positive);
        if (sw.contains("tx_ios_distance")) ax.tx_ios_distance = axis_values<double>(sw, "tx_ios_distance", positive);
        if (sw.contains("eta"))
            ax.eta = axis_values<double>(sw, "eta", [](const nlohmann::json& v, const std::string& f) {
                const double x = json_number(v, f);
                if (!(x >= 0.0 && x <= 1.0)) scenario_error(f, "must lie in [0, 1]");
                return x;
            });
        if (sw.contains("quant_bits"))
            ax.quant_bits = axis_values<int>(sw, "quant_bits", [](const nlohmann::json& v, const std::string& f) {
                const int x = json_int(v, f);
                if (x < 0 || x > 16) scenario_error(f, "must lie in [0, 16]");
                return x;
            });
    }
    s.opt.validate();
    return s;
}

/// Reads a scenario file; JSON syntax errors carry the byte offset reported by the parser.
inline Scenario load_scenario(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open scenario file '" + path.string() + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("scenario '" + path.string() + "': " + e.what());
    }
    return scenario_from_json(j);
}

inline nlohmann::json to_json(const Scenario& s)
{
    nlohmann::json surf = nlohmann::json::array();
    for (auto m : s.axes.surface) surf.push_back(to_string(m));
    auto dbm = nlohmann::json::array();
    for (double p : s.axes.P_th_dBm) dbm.push_back(std::isinf(p) ? nlohmann::json("inf") : nlohmann::json(p));
    return {{"id", s.id},
            {"system", to_json(s.base)},
            {"optimizer",
             {{"objective", to_string(s.opt.objective)},
              {"epsilon", s.opt.epsilon},
              {"max_outer_iters", s.opt.max_outer_iters},
              {"G", s.opt.G}}},
            {"sweep",
             {{"surface", surf},
              {"L", s.axes.L},
              {"M", s.axes.M},
              {"N", s.axes.N},
              {"P_th_dBm", dbm},
              {"R_th", s.axes.R_th},
              {"tx_rx_distance", s.axes.tx_rx_distance},
              {"tx_ios_distance", s.axes.tx_ios_distance},
              {"eta", s.axes.eta},
              {"quant_bits", s.axes.quant_bits}}},
            {"seeds", s.seeds},
            {"traces", s.traces}};
}

/// Cross product of the sweep axes. The threshold axis that the objective does
/// not use is collapsed to its first value so it does not duplicate points.
inline std::vector<SweepPoint> expand(const Scenario& s)
{
    const auto& a = s.axes;
    const bool rate_side = s.opt.objective == Objective::maximize_rate;
    const std::vector<double> pth = rate_side ? a.P_th_dBm : std::vector<double>{a.P_th_dBm.front()};
    const std::vector<double> rth = rate_side ? std::vector<double>{a.R_th.front()} : a.R_th;
    std::vector<SweepPoint> out;
    for (auto surface : a.surface)
        for (int L : a.L)
            for (int M : a.M)
                for (int N : a.N)
                    for (double p : pth)
                        for (double r : rth)
                            for (double dr : a.tx_rx_distance)
                                for (double di : a.tx_ios_distance)
                                    for (double eta : a.eta)
                                        for (int q : a.quant_bits) out.push_back({surface, L, M, N, p, r, dr, di, eta, q});
    return out;
}

/// System configuration of one sweep point. Array sizes are replaced; the rx
/// array and the surface slide along their base offset from the tx anchor to
/// the requested distances.
inline SystemConfig point_config(const SystemConfig& base, const SweepPoint& p)
{
    SystemConfig c = base;
    c.L = p.L;
    c.M = p.M;
    c.N = p.N;
    auto place = [&](const Point3& anchor, double d) {
        const double r = distance(base.tx_anchor, anchor);
        if (r == 0.0) throw std::invalid_argument("point_config: anchor coincides with the tx anchor");
        Point3 out{};
        for (int i = 0; i < 3; ++i) out[i] = base.tx_anchor[i] + (anchor[i] - base.tx_anchor[i]) * d / r;
        return out;
    };
    c.rx_anchor = place(base.rx_anchor, p.tx_rx_distance);
    c.ios_anchor = place(base.ios_anchor, p.tx_ios_distance);
    c.validate();
    return c;
}

/// Runs one (point, seed). The optimizer sees the estimated channels; rate and
/// SI are reported on the true channels after optional phase quantization.
inline ResultRecord run_point(const Scenario& s, const SweepPoint& p, std::size_t point_index, std::uint64_t seed,
                              bool keep_trace)
{
    ResultRecord rec;
    rec.scenario = s.id;
    rec.objective = s.opt.objective;
    rec.point = p;
    rec.point_index = point_index;
    rec.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        const SystemConfig cfg = point_config(s.base, p);
        const Geometry g = build_geometry(cfg);
        const ChannelSet truth = sample_channels(g, cfg, seed);
        const ChannelSet est = p.eta < 1.0 ? corrupt_csi(truth, g, cfg, p.eta, derive_seed(seed, 0x0c51)) : truth;

        OptConfig opt = s.opt;
        opt.surface = p.surface;
        opt.P_th = dbm_to_watt(p.P_th_dBm);
        opt.R_th = p.R_th;
        opt.seed = seed;
        const OptResult r = opt.objective == Objective::maximize_rate ? maximize_rate(opt, cfg, est)
                                                                      : minimize_si(opt, cfg, est);
        const SurfaceCoefficients coeffs = p.quant_bits > 0 ? quantize_phases(r.coeffs, p.quant_bits) : r.coeffs;
        const auto eff = effective_channels(truth, coeffs);
        rec.rate = data_rate(eff, r.w, cfg.sigma_d2);
        rec.si_w = si_power(eff, r.w);
        rec.iterations = r.iters;
        rec.status = to_string(r.status);
        rec.note = r.note;
        if (keep_trace) rec.trace = to_json(r);
    } catch (const std::exception& e) {
        rec.status = "error";
        rec.note = e.what();
    }
    rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

/// Executes every (point, seed) pair on a pool of `parallel` threads. Records
/// come back sorted by point, then seed, whatever the completion order.
inline std::vector<ResultRecord> run_scenario(const Scenario& s, std::uint64_t seed_base = 1, int parallel = 1,
                                              bool keep_traces = false)
{
    const auto points = expand(s);
    const std::size_t seeds = static_cast<std::size_t>(s.seeds);
    const std::size_t total = points.size() * seeds;
    std::vector<ResultRecord> out(total);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < total; k = next++) {
            const std::size_t pi = k / seeds, si = k % seeds;
            out[k] = run_point(s, points[pi], pi, seed_base + si, keep_traces || s.traces);
        }
    };
    const int n = std::max(1, std::min<int>(parallel, static_cast<int>(std::max<std::size_t>(total, 1))));
    if (n == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    }
    return out;
}

inline bool is_excluded(const std::string& status) { return status == "infeasible" || status == "error"; }

// ---- CSV -----------------------------------------------------------------

inline const std::vector<std::string>& csv_header()
{
    static const std::vector<std::string> h{"scenario", "objective", "surface",  "L",          "M",
                                            "N",        "P_th_dBm",  "R_th",     "tx_rx_distance_m",
                                            "tx_ios_distance_m",     "eta",      "quant_bits", "seed",
                                            "rate_bps_hz", "si_w",   "si_dbm",   "iterations", "status",
                                            "wall_time_s"};
    return h;
}

/// Columns before "seed" identify a sweep point.
inline constexpr std::size_t kKeyColumns = 12;

inline std::vector<std::string> csv_fields(const ResultRecord& r)
{
    using detail::fmt;
    const auto& p = r.point;
    char wall[32];
    std::snprintf(wall, sizeof wall, "%.6f", r.wall_time);
    return {r.scenario,
            to_string(r.objective),
            to_string(p.surface),
            std::to_string(p.L),
            std::to_string(p.M),
            std::to_string(p.N),
            fmt(p.P_th_dBm),
            fmt(p.R_th),
            fmt(p.tx_rx_distance),
            fmt(p.tx_ios_distance),
            fmt(p.eta),
            std::to_string(p.quant_bits),
            std::to_string(r.seed),
            fmt(r.rate),
            fmt(r.si_w),
            fmt(watt_to_dbm(r.si_w)),
            std::to_string(r.iterations),
            r.status,
            wall};
}

inline std::string join(const std::vector<std::string>& v, char sep = ',')
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += sep;
        s += v[i];
    }
    return s;
}

inline void write_csv(std::ostream& os, const std::vector<ResultRecord>& recs)
{
    os << join(csv_header()) << '\n';
    for (const auto& r : recs) os << join(csv_fields(r)) << '\n';
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const
    {
        const auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw std::invalid_argument("CSV: missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    }
};

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline CsvTable read_csv(std::istream& is)
{
    CsvTable t;
    std::string line;
    if (!std::getline(is, line)) throw std::invalid_argument("CSV: empty input");
    t.header = split_csv_line(line);
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto row = split_csv_line(line);
        if (row.size() != t.header.size())
            throw std::invalid_argument("CSV line " + std::to_string(lineno) + ": expected " +
                                        std::to_string(t.header.size()) + " fields, got " + std::to_string(row.size()));
        t.rows.push_back(std::move(row));
    }
    return t;
}

// ---- summary -------------------------------------------------------------

struct SummaryRow {
    std::vector<std::string> key;  ///< the point columns
    int used = 0;
    int excluded = 0;
    double rate_mean = 0.0, rate_std = 0.0;
    double si_w_mean = 0.0, si_w_std = 0.0;
    double iterations_mean = 0.0;
};

namespace detail {

inline std::pair<double, double> mean_std(const std::vector<double>& v)
{
    if (v.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    if (v.size() == 1) return {m, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

}  // namespace detail

/// Per-point mean and sample standard deviation over seeds. Infeasible and
/// errored records are left out of the statistics and counted in `excluded`.
inline std::vector<SummaryRow> summarize(const CsvTable& t)
{
    if (t.rows.empty()) throw std::invalid_argument("summarize: no records");
    const std::size_t c_rate = t.column("rate_bps_hz"), c_si = t.column("si_w"), c_it = t.column("iterations"),
                      c_status = t.column("status");
    const std::size_t nkey = std::min(kKeyColumns, t.column("seed"));

    std::vector<std::vector<std::string>> order;
    std::map<std::vector<std::string>, std::array<std::vector<double>, 3>> groups;
    std::map<std::vector<std::string>, int> excluded;
    for (const auto& row : t.rows) {
        std::vector<std::string> key(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(nkey));
        if (!groups.count(key)) {
            order.push_back(key);
            groups[key];
            excluded[key] = 0;
        }
        if (is_excluded(row[c_status])) {
            ++excluded[key];
            continue;
        }
        auto& g = groups[key];
        g[0].push_back(std::stod(row[c_rate]));
        g[1].push_back(std::stod(row[c_si]));
        g[2].push_back(std::stod(row[c_it]));
    }
    std::vector<SummaryRow> out;
    for (const auto& key : order) {
        const auto& g = groups[key];
        SummaryRow s;
        s.key = key;
        s.used = static_cast<int>(g[0].size());
        s.excluded = excluded[key];
        std::tie(s.rate_mean, s.rate_std) = detail::mean_std(g[0]);
        std::tie(s.si_w_mean, s.si_w_std) = detail::mean_std(g[1]);
        s.iterations_mean = detail::mean_std(g[2]).first;
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<std::string> summary_header(const CsvTable& t)
{
    const std::size_t nkey = std::min(kKeyColumns, t.column("seed"));
    std::vector<std::string> h(t.header.begin(), t.header.begin() + static_cast<std::ptrdiff_t>(nkey));
    for (const char* c : {"seeds", "excluded", "rate_mean", "rate_std", "si_w_mean", "si_w_std", "si_dbm_mean",
                          "iterations_mean"})
        h.emplace_back(c);
    return h;
}

inline std::vector<std::string> summary_fields(const SummaryRow& s)
{
    using detail::fmt;
    auto f = s.key;
    f.push_back(std::to_string(s.used));
    f.push_back(std::to_string(s.excluded));
    for (double v : {s.rate_mean, s.rate_std, s.si_w_mean, s.si_w_std, watt_to_dbm(s.si_w_mean), s.iterations_mean})
        f.push_back(fmt(v));
    return f;
}

inline void write_summary_csv(std::ostream& os, const CsvTable& t, const std::vector<SummaryRow>& rows)
{
    os << join(summary_header(t)) << '\n';
    for (const auto& r : rows) os << join(summary_fields(r)) << '\n';
}

/// Fixed-width text rendering with short number formatting.
inline void write_summary_table(std::ostream& os, const CsvTable& t, const std::vector<SummaryRow>& rows)
{
    std::vector<std::vector<std::string>> cells{summary_header(t)};
    for (const auto& r : rows) {
        auto f = summary_fields(r);
        for (auto& cell : f) {
            if (cell.find_first_of(".e") == std::string::npos) continue;
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (end == cell.c_str() || *end != '\0') continue;
            std::ostringstream ss;
            ss << std::setprecision(5) << v;
            cell = ss.str();
        }
        cells.push_back(std::move(f));
    }
    std::vector<std::size_t> width(cells.front().size(), 0);
    for (const auto& row : cells)
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    for (const auto& row : cells) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "  " : "") << std::setw(static_cast<int>(width[i])) << row[i];
        os << '\n';
    }
}

// ---- run outputs ---------------------------------------------------------

struct RunOutputs {
    std::filesystem::path csv, manifest, trace_dir;
    bool any_infeasible = false;
};

/// Writes results.csv, manifest.json and, when traces were kept, one JSON file
/// per record under traces/.
inline RunOutputs write_run(const std::filesystem::path& dir, const Scenario& s, const std::vector<ResultRecord>& recs,
                            std::uint64_t seed_base, int parallel)
{
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    RunOutputs o;
    o.csv = dir / "results.csv";
    o.manifest = dir / "manifest.json";
    {
        std::ofstream f(o.csv);
        write_csv(f, recs);
        if (!f) throw std::runtime_error("cannot write " + o.csv.string());
    }
    std::map<std::string, int> counts;
    for (const auto& r : recs) {
        ++counts[r.status];
        o.any_infeasible = o.any_infeasible || is_excluded(r.status);
    }
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& r : recs)
        if (!r.note.empty())
            failures.push_back({{"point", r.point_index}, {"seed", r.seed}, {"status", r.status}, {"note", r.note}});

    const bool traces = std::any_of(recs.begin(), recs.end(), [](const ResultRecord& r) { return !r.trace.is_null(); });
    if (traces) {
        o.trace_dir = dir / "traces";
        fs::create_directories(o.trace_dir);
        for (const auto& r : recs) {
            if (r.trace.is_null()) continue;
            std::ofstream f(o.trace_dir /
                            ("point" + std::to_string(r.point_index) + "_seed" + std::to_string(r.seed) + ".json"));
            f << r.trace.dump() << '\n';
        }
    }
    nlohmann::json m{{"build_id", IOSFD_BUILD_ID},
                     {"scenario", to_json(s)},
                     {"seed_base", seed_base},
                     {"parallel", parallel},
                     {"records", recs.size()},
                     {"points", recs.empty() ? 0 : recs.back().point_index + 1},
                     {"status_counts", counts},
                     {"notes", failures},
                     {"csv", o.csv.filename().string()},
                     {"traces", traces ? nlohmann::json("traces") : nlohmann::json(nullptr)}};
    std::ofstream f(o.manifest);
    f << m.dump(2) << '\n';
    return o;
}

}  // namespace iosfd
