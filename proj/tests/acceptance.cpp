// Acceptance driver: one PASS/FAIL line per criterion, exit status 0 only if
// every criterion passes. Suites can be selected by number on the command line.

#include "iosfd/experiment.hpp"
#include "iosfd/optimizer.hpp"
#include "iosfd/subproblems.hpp"

#include <array>
#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace iosfd;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Suite {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
};

CVec random_cvec(std::mt19937_64& rng, int n)
{
    std::normal_distribution<double> nd;
    CVec v(n);
    for (int i = 0; i < n; ++i) v(i) = cd(nd(rng), nd(rng));
    return v;
}

RVec random_phases(std::mt19937_64& rng, int n)
{
    std::uniform_real_distribution<double> u(0.0, kTwoPi);
    RVec p(n);
    for (int i = 0; i < n; ++i) p(i) = u(rng);
    return p;
}

SystemConfig config(int M, int N, int L)
{
    SystemConfig c;
    c.M = M;
    c.N = N;
    c.L = L;
    c.P_max = 1.0;
    return c;
}

ChannelSet channels(const SystemConfig& c, std::uint64_t seed) { return sample_channels(build_geometry(c), c, seed); }

double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

bool monotone(const std::vector<double>& t, bool increasing, double tol = 1e-9)
{
    for (std::size_t i = 1; i < t.size(); ++i) {
        const double slack = tol * std::abs(t[i - 1]);
        if (increasing ? t[i] < t[i - 1] - slack : t[i] > t[i - 1] + slack) return false;
    }
    return true;
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...)
{
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

// 1. Frobenius SI form against the direct norm; Hadamard/trace identity.
Outcome identity_suite()
{
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> dim(1, 8);
    double worst_si = 0.0;
    for (int t = 0; t < 100; ++t) {
        const int M = dim(rng), N = dim(rng), L = dim(rng);
        ChannelSet ch{};
        ch.H_ti = CMat(L, M);
        ch.H_tr = CMat(M, N);
        ch.H_ir = CMat(L, N);
        for (int m = 0; m < M; ++m) ch.H_ti.col(m) = random_cvec(rng, L);
        for (int n = 0; n < N; ++n) {
            ch.H_tr.col(n) = random_cvec(rng, M);
            ch.H_ir.col(n) = random_cvec(rng, L);
        }
        ch.h_id = random_cvec(rng, L);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        RVec a(L), b(L);
        for (int l = 0; l < L; ++l) {
            a(l) = u(rng);
            b(l) = std::sqrt(1.0 - a(l) * a(l)) * u(rng);
        }
        const ESCoefficients es{a, random_phases(rng, L), b, random_phases(rng, L)};
        const CVec w = random_cvec(rng, M);
        const auto eff = effective_channels(ch, es);
        const CMat Theta = es.reflection().asDiagonal();
        const CVec direct = (ch.H_tr.adjoint() + ch.H_ir.adjoint() * Theta * ch.H_ti) * w;
        worst_si = std::max(worst_si, rel(si_power_frobenius(eff, w), direct.squaredNorm()));
    }
    double worst_tr = 0.0;
    for (int t = 0; t < 100; ++t) {
        CMat X(8, 8), Y(8, 8);
        for (int j = 0; j < 8; ++j) {
            X.col(j) = random_cvec(rng, 8);
            Y.col(j) = random_cvec(rng, 8);
        }
        X = (X + X.adjoint()).eval();
        Y = (Y + Y.adjoint()).eval();
        const CVec b = random_cvec(rng, 8);
        const CMat D = b.asDiagonal();
        const cd trace = (D.adjoint() * X * D * Y).trace();
        const cd quad = b.dot(hadamard_trace_matrix(X, Y) * b);
        worst_tr = std::max(worst_tr, std::abs(trace - quad) / std::abs(trace));
    }
    return {worst_si <= 1e-12 && worst_tr <= 1e-9,
            fmt("max rel err Frobenius vs norm %.2e (tol 1e-12), trace vs Hadamard %.2e (tol 1e-9)", worst_si, worst_tr)};
}

// 2. Lifted binary forms against direct evaluation of the MS channels. The
// all-reflect vector makes the destination gain exactly zero, so each error is
// taken relative to max(|direct|, 1e-6 * largest value of that term).
Outcome lift_suite()
{
    const int L = 8;
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto c = config(4, 2, L);
        const auto ch = channels(c, seed);
        std::mt19937_64 rng(seed * 77);
        const CVec w = random_cvec(rng, c.M) * 0.3;
        const RVec alpha = random_phases(rng, L), beta = random_phases(rng, L);
        const auto sdr = build_sdr_data(ch, w, alpha, beta);
        std::vector<std::array<double, 4>> vals;
        double gain_scale = 0.0, si_scale = 0.0;
        for (int mask = 0; mask < (1 << L); ++mask) {
            Eigen::VectorXi mode(L);
            RVec a(L);
            for (int l = 0; l < L; ++l) {
                mode(l) = (mask >> l) & 1;
                a(l) = mode(l);
            }
            const auto eff = effective_channels(ch, MSCoefficients{mode, alpha, beta});
            const double gain = std::norm((eff.h_d * w)(0));
            const double si = (eff.H_r * w).squaredNorm();
            vals.push_back({sdr.lifted_rate(a), gain, sdr.lifted_si(a), si});
            gain_scale = std::max(gain_scale, gain);
            si_scale = std::max(si_scale, si);
        }
        for (const auto& v : vals) {
            worst = std::max(worst, std::abs(v[0] - v[1]) / std::max(std::abs(v[1]), 1e-6 * gain_scale));
            worst = std::max(worst, std::abs(v[2] - v[3]) / std::max(std::abs(v[3]), 1e-6 * si_scale));
        }
    }
    return {worst <= 1e-9, fmt("2560 (mode, channel) pairs, max rel err %.2e (tol 1e-9)", worst)};
}

// 3. Monotone traces, convergence and surrogate tightness of both algorithms.
Outcome sca_suite()
{
    constexpr double P_th_dbm = -30.0;
    int runs = 0, bad_mono = 0, slow = 0;
    double worst_tight = 0.0;
    int worst_iters = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto c = config(4, 1, 16);
        const auto ch = channels(c, seed);
        for (auto surface : {SurfaceMode::ES, SurfaceMode::MS}) {
            for (auto obj : {Objective::maximize_rate, Objective::minimize_si}) {
                OptConfig o;
                o.objective = obj;
                o.surface = surface;
                o.P_th = dbm_to_watt(P_th_dbm);
                o.R_th = 1.0;
                o.seed = seed;
                const auto r = obj == Objective::maximize_rate ? maximize_rate(o, c, ch) : minimize_si(o, c, ch);
                ++runs;
                if (!monotone(r.step_trace, obj == Objective::maximize_rate)) ++bad_mono;
                if (r.status != OptStatus::converged || r.iters > 50) ++slow;
                worst_iters = std::max(worst_iters, r.iters);
                worst_tight = std::max(worst_tight, r.max_tightness_error);
            }
        }
    }
    return {bad_mono == 0 && slow == 0 && worst_tight <= 1e-9,
            fmt("%d runs at P_th=%.0f dBm / R_th=1: %d non-monotone, %d not converged within 50 (max iters %d), "
                "surrogate gap %.2e (tol 1e-9)",
                runs, P_th_dbm, bad_mono, slow, worst_iters, worst_tight)};
}

// 4. SDP bound, exhaustive optimum and randomized candidate, at the starting
// point of the MS algorithms: P_th = -74 dBm with the scaled MRT beamformer on
// the rate side, R_th = 1 bps/Hz with full-power MRT on the SI side.
Outcome sandwich_suite()
{
    const int L = 10;
    const double P_th = dbm_to_watt(-74.0), R_th = 1.0;
    int order_fail = 0, near = 0, infeasible = 0, si_cases = 0;
    double worst_ratio = 1.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto c = config(4, 1, L);
        const auto ch = channels(c, seed);
        OptConfig o;
        o.surface = SurfaceMode::MS;
        o.P_th = P_th;
        o.R_th = R_th;

        o.objective = Objective::maximize_rate;
        const auto ip = default_init(o, c, ch);
        const auto sdr = build_sdr_data(ch, ip.w, std::get<MSCoefficients>(ip.coeffs));
        const auto bf_r = mode_selection_bruteforce(sdr, ModeObjective::maximize_rate, P_th);
        const auto rnd_r = mode_selection_rate(sdr, P_th, 1000, seed);
        const double tol_r = 1e-6 * std::abs(bf_r.objective);
        if (!(rnd_r.sdp_value >= bf_r.objective - tol_r && bf_r.objective >= rnd_r.objective - tol_r)) ++order_fail;
        if (!rnd_r.feasible) ++infeasible;
        const double ratio = rnd_r.objective / bf_r.objective;
        worst_ratio = std::min(worst_ratio, ratio);
        if (rnd_r.feasible && ratio >= 0.9) ++near;

        o.objective = Objective::minimize_si;
        const auto is = default_init(o, c, ch);
        if (!is.feasible) continue;
        ++si_cases;
        const auto sdr_s = build_sdr_data(ch, is.w, std::get<MSCoefficients>(is.coeffs));
        const auto bf_s = mode_selection_bruteforce(sdr_s, ModeObjective::minimize_si, rate_threshold_power(R_th, c.sigma_d2));
        const auto rnd_s = mode_selection_si(sdr_s, R_th, c.sigma_d2, 1000, seed);
        const double tol_s = 1e-6 * std::abs(bf_s.objective);
        if (!(rnd_s.sdp_value <= bf_s.objective + tol_s && bf_s.objective <= rnd_s.objective + tol_s)) ++order_fail;
        if (!rnd_s.feasible) ++infeasible;
    }
    return {order_fail == 0 && near >= 16,
            fmt("ordering violations %d/%d, randomized >= 90%% of exhaustive rate objective in %d/20 seeds (need 16), "
                "worst ratio %.3f, infeasible candidates %d",
                order_fail, 20 + si_cases, near, worst_ratio, infeasible)};
}

// 5. WO with no SI limit reduces to MRT.
Outcome mrt_suite()
{
    double worst = 0.0;
    int iters = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const auto c = config(4, 1, 16);
        const auto ch = channels(c, seed);
        OptConfig o;
        o.surface = SurfaceMode::WO;
        const auto r = maximize_rate(o, c, ch);
        const auto eff = effective_channels(ch, r.coeffs);
        const double closed = std::log2(1.0 + c.P_max * eff.h_d.squaredNorm() / c.sigma_d2);
        worst = std::max(worst, std::abs(r.rate - closed));
        iters = std::max(iters, r.iters);
    }
    return {worst <= 1e-6, fmt("20 seeds, max |rate - closed form| %.2e bps/Hz (tol 1e-6), max iters %d", worst, iters)};
}

struct PointStats {
    double mean = 0.0;
    int used = 0, excluded = 0;
};

std::map<std::pair<SurfaceMode, int>, PointStats> mean_by_surface_L(const std::vector<ResultRecord>& recs, bool si)
{
    std::map<std::pair<SurfaceMode, int>, PointStats> out;
    for (const auto& r : recs) {
        auto& s = out[{r.point.surface, r.point.L}];
        if (is_excluded(r.status)) {
            ++s.excluded;
            continue;
        }
        s.mean += si ? r.si_w : r.rate;
        ++s.used;
    }
    for (auto& [_, s] : out)
        if (s.used) s.mean /= s.used;
    return out;
}

// 6. Qualitative trends over L.
Outcome trend_suite()
{
    const std::vector<int> Ls{8, 16, 32, 64};
    Scenario rate;
    rate.id = "trend_rate";
    rate.base = config(4, 1, 16);
    rate.opt.objective = Objective::maximize_rate;
    rate.seeds = 20;
    rate.axes.surface = {SurfaceMode::ES, SurfaceMode::MS, SurfaceMode::WO};
    rate.axes.L = Ls;
    rate.axes.M = {4};
    rate.axes.N = {1};
    rate.axes.P_th_dBm = {-74.0};
    rate.axes.R_th = {1.0};
    rate.axes.tx_rx_distance = {distance(rate.base.tx_anchor, rate.base.rx_anchor)};
    rate.axes.tx_ios_distance = {distance(rate.base.tx_anchor, rate.base.ios_anchor)};
    const auto rrecs = run_scenario(rate, 1, 1);
    const auto rm = mean_by_surface_L(rrecs, false);

    Scenario si = rate;
    si.id = "trend_si";
    si.base = config(4, 4, 16);
    si.opt.objective = Objective::minimize_si;
    si.axes.surface = {SurfaceMode::ES, SurfaceMode::MS};
    si.axes.N = {4};
    const auto srecs = run_scenario(si, 1, 1);
    const auto sm = mean_by_surface_L(srecs, true);

    bool inc = true, es_ge_ms = true, dec = true, rate_ok = true;
    std::ostringstream d;
    d.precision(4);
    for (auto s : {SurfaceMode::ES, SurfaceMode::MS, SurfaceMode::WO}) {
        d << to_string(s) << " rate";
        for (int L : Ls) d << ' ' << rm.at({s, L}).mean;
        d << "; ";
    }
    for (std::size_t i = 0; i < Ls.size(); ++i) {
        for (auto s : {SurfaceMode::ES, SurfaceMode::MS})
            if (i > 0 && !(rm.at({s, Ls[i]}).mean > rm.at({s, Ls[i - 1]}).mean)) inc = false;
        if (rm.at({SurfaceMode::ES, Ls[i]}).mean < rm.at({SurfaceMode::MS, Ls[i]}).mean) es_ge_ms = false;
    }
    const double wo_ratio = rm.at({SurfaceMode::WO, 64}).mean / rm.at({SurfaceMode::ES, 64}).mean;
    for (auto s : {SurfaceMode::ES, SurfaceMode::MS}) {
        d << to_string(s) << " SI[dBm]";
        for (std::size_t i = 0; i < Ls.size(); ++i) {
            const auto& cur = sm.at({s, Ls[i]});
            d << ' ' << watt_to_dbm(cur.mean);
            if (cur.excluded) d << "(" << cur.excluded << " infeasible)";
            if (i > 0 && !(cur.mean < sm.at({s, Ls[i - 1]}).mean)) dec = false;
        }
        d << "; ";
    }
    double worst_short = 0.0;
    for (const auto& r : srecs)
        if (r.status == "converged" && r.rate < r.point.R_th - 1e-6) {
            rate_ok = false;
            worst_short = std::max(worst_short, r.point.R_th - r.rate);
        }
    d << "WO/ES at L=64 " << wo_ratio;
    const bool wo_ok = wo_ratio < 0.5;
    d << " | rate increasing " << (inc ? "yes" : "NO") << ", ES>=MS " << (es_ge_ms ? "yes" : "NO") << ", WO<50% "
      << (wo_ok ? "yes" : "NO") << ", SI decreasing " << (dec ? "yes" : "NO") << ", rate target held "
      << (rate_ok ? "yes" : "NO");
    if (!rate_ok) d << " (worst shortfall " << worst_short << ")";
    return {inc && es_ge_ms && wo_ok && dec && rate_ok, d.str()};
}

// 7. Phase quantization and imperfect CSI.
Outcome quantization_suite()
{
    constexpr int L = 64, seeds = 20;
    double cont = 0.0, quant = 0.0, perfect = 0.0, imperfect = 0.0;
    for (std::uint64_t seed = 1; seed <= seeds; ++seed) {
        const auto c = config(4, 1, L);
        const auto g = build_geometry(c);
        const auto truth = sample_channels(g, c, seed);
        OptConfig o;
        o.surface = SurfaceMode::ES;
        o.P_th = dbm_to_watt(-74.0);
        o.seed = seed;
        const auto r = maximize_rate(o, c, truth);
        cont += r.rate;
        quant += data_rate(effective_channels(truth, quantize_phases(r.coeffs, 4)), r.w, c.sigma_d2);
        perfect += r.rate;

        const auto est = corrupt_csi(truth, g, c, 0.95, derive_seed(seed, 0x0c51));
        const auto ri = maximize_rate(o, c, est);
        imperfect += data_rate(effective_channels(truth, ri.coeffs), ri.w, c.sigma_d2);
    }
    cont /= seeds;
    quant /= seeds;
    perfect /= seeds;
    imperfect /= seeds;
    const double loss = (cont - quant) / cont;
    return {loss <= 0.15 && imperfect < perfect,
            fmt("L=64 ES: continuous %.4f, 4-bit %.4f bps/Hz (loss %.2f%%, limit 15%%); perfect CSI %.4f, eta=0.95 %.4f",
                cont, quant, 100.0 * loss, perfect, imperfect)};
}

// 8. Bit-identical reruns.
Outcome determinism_suite()
{
    Scenario s;
    s.id = "determinism";
    s.base = config(4, 2, 8);
    s.seeds = 3;
    s.axes.surface = {SurfaceMode::ES, SurfaceMode::MS, SurfaceMode::WO};
    s.axes.L = {8, 12};
    s.axes.M = {4};
    s.axes.N = {2};
    s.axes.P_th_dBm = {-60.0};
    s.axes.R_th = {1.0};
    s.axes.tx_rx_distance = {0.1};
    s.axes.tx_ios_distance = {0.5};
    s.axes.eta = {1.0, 0.95};
    s.axes.quant_bits = {0, 3};
    auto dump = [](const std::vector<ResultRecord>& recs) {
        std::string out;
        for (const auto& r : recs) {
            auto f = csv_fields(r);
            f.pop_back();  // wall time
            out += join(f) + '|' + r.trace.dump() + '\n';
        }
        return out;
    };
    bool same = true;
    std::size_t n = 0;
    for (auto obj : {Objective::maximize_rate, Objective::minimize_si}) {
        s.opt.objective = obj;
        const auto a = run_scenario(s, 5, 1, true);
        const auto b = run_scenario(s, 5, 1, true);
        const auto c = run_scenario(s, 5, 3, true);
        same = same && dump(a) == dump(b) && dump(a) == dump(c);
        n += a.size();
    }
    return {same, fmt("%zu records rerun serially and on 3 workers: %s", n, same ? "bit-identical" : "MISMATCH")};
}

}  // namespace

int main(int argc, char** argv)
{
    const std::vector<Suite> suites{
        {1, "identity", 1.0, identity_suite},
        {2, "lift", 10.0, lift_suite},
        {3, "sca", 30.0, sca_suite},
        {4, "sandwich", 60.0, sandwich_suite},
        {5, "mrt", 5.0, mrt_suite},
        {6, "trend", 600.0, trend_suite},
        {7, "quantization", 120.0, quantization_suite},
        {8, "determinism", 600.0, determinism_suite},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failed = 0;
    for (const auto& s : suites) {
        if (!selected.empty() && !selected.count(s.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = s.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = dt <= s.budget_s;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::printf("%s %d %-12s %7.2fs (budget %.0fs%s) %s\n", pass ? "PASS" : "FAIL", s.id, s.name, dt, s.budget_s,
                    in_time ? "" : ", EXCEEDED", o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
