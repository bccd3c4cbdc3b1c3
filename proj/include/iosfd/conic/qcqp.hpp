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

#include "iosfd/conic/solution.hpp"
#include "iosfd/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace iosfd::conic {

/// f(x) = x_S^T P x_S + q^T x_S + r, where x_S gathers the entries of x
/// listed in `idx`. P must be symmetric positive semidefinite.
struct QuadForm {
    std::vector<int> idx;
    RMat P;
    RVec q;
    double r = 0.0;

    static QuadForm dense(RMat P, RVec q, double r = 0.0)
    {
        QuadForm f;
        f.idx.resize(static_cast<std::size_t>(q.size()));
        std::iota(f.idx.begin(), f.idx.end(), 0);
        f.P = std::move(P);
        f.q = std::move(q);
        f.r = r;
        return f;
    }

    static QuadForm linear(std::vector<int> idx, RVec q, double r = 0.0)
    {
        QuadForm f;
        const auto k = static_cast<Eigen::Index>(idx.size());
        f.idx = std::move(idx);
        f.P = RMat::Zero(k, k);
        f.q = std::move(q);
        f.r = r;
        return f;
    }

    Eigen::Index local_size() const { return static_cast<Eigen::Index>(idx.size()); }

    RVec gather(const RVec& x) const
    {
        RVec xs(local_size());
        for (Eigen::Index k = 0; k < xs.size(); ++k) xs(k) = x(idx[static_cast<std::size_t>(k)]);
        return xs;
    }

    double eval(const RVec& x) const
    {
        const RVec xs = gather(x);
        return xs.dot(P * xs) + q.dot(xs) + r;
    }

    /// Gradient restricted to the support.
    RVec local_gradient(const RVec& x) const
    {
        const RVec xs = gather(x);
        return 2.0 * (P * xs) + q;
    }

    bool is_quadratic() const { return P.size() > 0 && P.cwiseAbs().maxCoeff() > 0.0; }

    double scale() const
    {
        double s = std::abs(r);
        if (P.size() > 0) s = std::max(s, P.cwiseAbs().maxCoeff());
        if (q.size() > 0) s = std::max(s, q.cwiseAbs().maxCoeff());
        return s;
    }
};

/// Convex constraint f(x) <= upper.
struct QuadConstraint {
    QuadForm f;
    double upper = 0.0;
};

/// minimize f0(x) subject to f_i(x) <= upper_i and A x = b.
struct QCQPProblem {
    int n = 0;
    QuadForm objective;
    std::vector<QuadConstraint> constraints;
    RMat A_eq;
    RVec b_eq;

    void validate() const
    {
        auto check = [this](const QuadForm& f, const std::string& what) {
            const auto k = f.local_size();
            if (f.P.rows() != k || f.P.cols() != k || f.q.size() != k)
                throw std::invalid_argument("QCQP " + what + ": inconsistent form dimensions");
            for (int i : f.idx)
                if (i < 0 || i >= n) throw std::invalid_argument("QCQP " + what + ": index out of range");
            if (k == 0 || !f.is_quadratic()) return;
            if ((f.P - f.P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, f.P.cwiseAbs().maxCoeff()))
                throw std::invalid_argument("QCQP " + what + ": quadratic form is not symmetric");
            const double shift = 1e-8 * std::max(1.0, f.P.cwiseAbs().maxCoeff());
            Eigen::LLT<RMat> llt(f.P + shift * RMat::Identity(k, k));
            if (llt.info() != Eigen::Success) throw std::invalid_argument("QCQP " + what + ": quadratic form is not PSD");
        };
        if (n < 1) throw std::invalid_argument("QCQP: n must be >= 1");
        check(objective, "objective");
        for (std::size_t i = 0; i < constraints.size(); ++i) check(constraints[i].f, "constraint " + std::to_string(i));
        if (A_eq.rows() != b_eq.size() || (A_eq.rows() > 0 && A_eq.cols() != n))
            throw std::invalid_argument("QCQP: equality block has wrong shape");
    }
};

namespace detail {

/// Problem after scaling: all constraints are f_i(x) <= 0 with O(1) data.
struct ScaledQCQP {
    int n = 0;
    QuadForm objective;
    double objective_scale = 1.0;
    std::vector<QuadForm> cons;
    RMat A;
    RVec b;
};

struct IpmResult {
    enum class Exit { converged, early, max_iters, failure } exit = Exit::failure;
    int iters = 0;
    double gap = 0.0;
    double dual_res = 0.0;
};

inline void add_local(RMat& H, const std::vector<int>& idx, const RMat& block)
{
    const auto k = static_cast<Eigen::Index>(idx.size());
    for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index c = 0; c < k; ++c) H(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(c)]) += block(a, c);
}

inline void add_local(RVec& v, const std::vector<int>& idx, const RVec& local, double w)
{
    for (std::size_t a = 0; a < idx.size(); ++a) v(idx[a]) += w * local(static_cast<Eigen::Index>(a));
}

inline void add_outer(RMat& H, const std::vector<int>& idx, const RVec& g, double w)
{
    const auto k = static_cast<Eigen::Index>(idx.size());
    for (Eigen::Index a = 0; a < k; ++a) {
        const double ga = w * g(a);
        for (Eigen::Index c = 0; c < k; ++c) H(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(c)]) += ga * g(c);
    }
}

/// Primal-dual interior-point method for a convex QCQP started from a
/// strictly feasible x (Boyd and Vandenberghe, Sec. 11.7). `early` may stop
/// the iteration as soon as a caller-side condition is met.
inline IpmResult pdipm(const ScaledQCQP& p, RVec& x, const ConicOptions& opt,
                       const std::function<bool(const RVec&)>& early = {})
{
    constexpr double kMu = 10.0;
    constexpr double kAlpha = 0.01;
    constexpr double kBeta = 0.5;

    const int n = p.n;
    const auto m = static_cast<Eigen::Index>(p.cons.size());
    const auto pe = p.A.rows();

    RVec f(m);
    for (Eigen::Index i = 0; i < m; ++i) f(i) = p.cons[static_cast<std::size_t>(i)].eval(x);
    RVec lam(m);
    for (Eigen::Index i = 0; i < m; ++i) lam(i) = 1.0 / std::max(-f(i), 1e-12);
    RVec nu = RVec::Zero(pe);

    auto full_gradient = [](const QuadForm& q, const RVec& xx, int nn) {
        RVec g = RVec::Zero(nn);
        add_local(g, q.idx, q.local_gradient(xx), 1.0);
        return g;
    };

    // Residual vector norm for the line search.
    auto residual_norm = [&](const RVec& xx, const RVec& ll, const RVec& vv, double t, const RVec& ff) {
        RVec rd = full_gradient(p.objective, xx, n);
        for (Eigen::Index i = 0; i < m; ++i)
            add_local(rd, p.cons[static_cast<std::size_t>(i)].idx, p.cons[static_cast<std::size_t>(i)].local_gradient(xx), ll(i));
        double s = 0.0;
        if (pe > 0) {
            rd += p.A.transpose() * vv;
            s += (p.A * xx - p.b).squaredNorm();
        }
        s += rd.squaredNorm();
        for (Eigen::Index i = 0; i < m; ++i) {
            const double rc = -ll(i) * ff(i) - 1.0 / t;
            s += rc * rc;
        }
        return std::sqrt(s);
    };

    constexpr int kStallWindow = 15;
    IpmResult res;
    std::vector<double> gap_history;
    std::vector<RVec> g(static_cast<std::size_t>(m));
    for (int it = 0; it < opt.max_iters; ++it) {
        res.iters = it;
        RVec g0 = full_gradient(p.objective, x, n);
        for (Eigen::Index i = 0; i < m; ++i) g[static_cast<std::size_t>(i)] = p.cons[static_cast<std::size_t>(i)].local_gradient(x);

        const double eta = m > 0 ? -f.dot(lam) : 0.0;
        const double t = m > 0 ? kMu * static_cast<double>(m) / std::max(eta, 1e-300) : 1.0;

        RVec r_dual = g0;
        for (Eigen::Index i = 0; i < m; ++i) add_local(r_dual, p.cons[static_cast<std::size_t>(i)].idx, g[static_cast<std::size_t>(i)], lam(i));
        RVec r_pri;
        if (pe > 0) {
            r_dual += p.A.transpose() * nu;
            r_pri = p.A * x - p.b;
        }
        res.gap = eta;
        res.dual_res = r_dual.norm();
        const double pri_res = pe > 0 ? r_pri.norm() : 0.0;
        const double gap_target = std::max(opt.gap_tol, opt.rel_gap_tol * std::abs(p.objective.eval(x)));
        if (pri_res <= opt.feas_tol && res.dual_res <= opt.feas_tol && eta <= gap_target) {
            res.exit = IpmResult::Exit::converged;
            return res;
        }
        // Give up once the gap has stopped shrinking; x is still strictly feasible.
        if (it >= kStallWindow) {
            if (eta > 0.5 * gap_history[static_cast<std::size_t>(it - kStallWindow)]) {
                res.exit = IpmResult::Exit::failure;
                return res;
            }
        }
        gap_history.push_back(eta);
        if (early && early(x)) {
            res.exit = IpmResult::Exit::early;
            return res;
        }

        RMat H = RMat::Zero(n, n);
        if (p.objective.is_quadratic()) add_local(H, p.objective.idx, 2.0 * p.objective.P);
        RVec rhs = -g0;
        if (pe > 0) rhs -= p.A.transpose() * nu;
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto& c = p.cons[static_cast<std::size_t>(i)];
            const double nf = -f(i);
            if (c.is_quadratic()) add_local(H, c.idx, (2.0 * lam(i)) * c.P);
            add_outer(H, c.idx, g[static_cast<std::size_t>(i)], lam(i) / nf);
            add_local(rhs, c.idx, g[static_cast<std::size_t>(i)], -1.0 / (t * nf));
        }

        RVec dx, dnu;
        if (pe == 0) {
            Eigen::LLT<RMat> llt(H);
            if (llt.info() == Eigen::Success) {
                dx = llt.solve(rhs);
            } else {
                const double reg = 1e-12 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
                Eigen::LDLT<RMat> ldlt(H + reg * RMat::Identity(n, n));
                dx = ldlt.solve(rhs);
            }
        } else {
            RMat K = RMat::Zero(n + pe, n + pe);
            K.topLeftCorner(n, n) = H;
            K.topRightCorner(n, pe) = p.A.transpose();
            K.bottomLeftCorner(pe, n) = p.A;
            RVec kr(n + pe);
            kr << rhs, -r_pri;
            const RVec sol = K.partialPivLu().solve(kr);
            dx = sol.head(n);
            dnu = sol.tail(pe);
        }
        if (!dx.allFinite()) {
            res.exit = IpmResult::Exit::failure;
            return res;
        }

        RVec dlam(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto& c = p.cons[static_cast<std::size_t>(i)];
            double gdx = 0.0;
            for (std::size_t a = 0; a < c.idx.size(); ++a) gdx += g[static_cast<std::size_t>(i)](static_cast<Eigen::Index>(a)) * dx(c.idx[a]);
            const double nf = -f(i);
            dlam(i) = lam(i) / nf * gdx - lam(i) + 1.0 / (t * nf);
        }

        double s_max = 1.0;
        for (Eigen::Index i = 0; i < m; ++i)
            if (dlam(i) < 0.0) s_max = std::min(s_max, -lam(i) / dlam(i));
        double s = 0.99 * s_max;

        const double r0 = residual_norm(x, lam, nu, t, f);
        RVec xn, ln, vn, fn(m);
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            xn = x + s * dx;
            bool inside = true;
            for (Eigen::Index i = 0; i < m && inside; ++i) {
                fn(i) = p.cons[static_cast<std::size_t>(i)].eval(xn);
                inside = fn(i) < 0.0;
            }
            if (inside) {
                ln = lam + s * dlam;
                vn = pe > 0 ? RVec(nu + s * dnu) : nu;
                if (residual_norm(xn, ln, vn, t, fn) <= (1.0 - kAlpha * s) * r0) {
                    accepted = true;
                    break;
                }
            }
            s *= kBeta;
        }
        if (!accepted) {
            // Residual cannot be decreased further; report where we are.
            res.exit = IpmResult::Exit::failure;
            return res;
        }
        x = xn;
        lam = ln;
        nu = vn;
        f = fn;
    }
    res.iters = opt.max_iters;
    res.exit = IpmResult::Exit::max_iters;
    return res;
}

}  // namespace detail

inline double max_violation(const QCQPProblem& p, const RVec& x)
{
    double v = 0.0;
    for (const auto& c : p.constraints) v = std::max(v, c.f.eval(x) - c.upper);
    if (p.A_eq.rows() > 0) v = std::max(v, (p.A_eq * x - p.b_eq).cwiseAbs().maxCoeff());
    return v;
}

/// Solves a convex QCQP. `x0` is an optional starting guess; it does not
/// need to be feasible.
inline ConicSolution solve_qcqp(const QCQPProblem& prob, const ConicOptions& opt = {}, const RVec& x0 = RVec())
{
    prob.validate();
    ConicSolution sol;
    const int n = prob.n;

    detail::ScaledQCQP sp;
    sp.n = n;
    sp.objective = prob.objective;
    {
        double s = 0.0;
        if (sp.objective.P.size() > 0) s = std::max(s, sp.objective.P.cwiseAbs().maxCoeff());
        if (sp.objective.q.size() > 0) s = std::max(s, sp.objective.q.cwiseAbs().maxCoeff());
        sp.objective_scale = s > 0.0 ? s : 1.0;
    }
    sp.objective.P /= sp.objective_scale;
    sp.objective.q /= sp.objective_scale;
    sp.objective.r = 0.0;
    for (const auto& c : prob.constraints) {
        QuadForm f = c.f;
        f.r -= c.upper;
        const bool constant = !f.is_quadratic() && (f.q.size() == 0 || f.q.cwiseAbs().maxCoeff() == 0.0);
        if (constant) {
            if (f.r > opt.feas_tol * std::max(1.0, std::abs(c.upper))) {
                sol.status = ConicStatus::infeasible;
                sol.diagnostics = "constant constraint violated";
                sol.x = x0.size() == n ? x0 : RVec::Zero(n);
                return sol;
            }
            continue;
        }
        const double s = f.scale();
        f.P /= s;
        f.q /= s;
        f.r /= s;
        sp.cons.push_back(std::move(f));
    }
    if (prob.A_eq.rows() > 0) {
        sp.A = prob.A_eq;
        sp.b = prob.b_eq;
        for (Eigen::Index i = 0; i < sp.A.rows(); ++i) {
            const double s = std::max(sp.A.row(i).cwiseAbs().maxCoeff(), std::abs(sp.b(i)));
            if (s > 0.0) {
                sp.A.row(i) /= s;
                sp.b(i) /= s;
            }
        }
    } else {
        sp.A.resize(0, n);
        sp.b.resize(0);
    }

    RVec x = x0.size() == n ? x0 : RVec::Zero(n);
    const auto m = sp.cons.size();
    double fmax = -std::numeric_limits<double>::infinity();
    for (const auto& c : sp.cons) fmax = std::max(fmax, c.eval(x));
    int iters = 0;

    if (m > 0 && !(fmax < -1e-3)) {
        // Phase I: minimize s subject to f_i(x) <= s and s >= -1.
        detail::ScaledQCQP ph;
        ph.n = n + 1;
        ph.objective = QuadForm::linear({n}, RVec::Ones(1));
        for (const auto& c : sp.cons) {
            QuadForm f;
            f.idx = c.idx;
            f.idx.push_back(n);
            const auto k = c.local_size();
            f.P = RMat::Zero(k + 1, k + 1);
            f.P.topLeftCorner(k, k) = c.P;
            f.q.resize(k + 1);
            f.q << c.q, -1.0;
            f.r = c.r;
            ph.cons.push_back(std::move(f));
        }
        ph.cons.push_back(QuadForm::linear({n}, -RVec::Ones(1), -1.0));
        ph.A = RMat::Zero(sp.A.rows(), n + 1);
        ph.A.leftCols(n) = sp.A;
        ph.b = sp.b;

        RVec xs(n + 1);
        xs << x, std::max(fmax, -1.0) + 1.0;
        const auto r1 = detail::pdipm(ph, xs, opt, [n](const RVec& v) { return v(n) < -1e-2; });
        iters += r1.iters;
        const double s_star = xs(n);
        x = xs.head(n);
        if (s_star > 1e-8 && r1.exit != detail::IpmResult::Exit::failure) {
            sol.status = ConicStatus::infeasible;
            sol.x = x;
            sol.iterations = iters;
            sol.max_violation = max_violation(prob, x);
            sol.objective = prob.objective.eval(x);
            std::ostringstream os;
            os << "phase I optimum " << s_star << " > 0";
            sol.diagnostics = os.str();
            return sol;
        }
        if (!(s_star < -1e-10)) {
            sol.status = s_star > 1e-8 ? ConicStatus::infeasible : ConicStatus::numerical_failure;
            sol.x = x;
            sol.iterations = iters;
            sol.max_violation = max_violation(prob, x);
            sol.objective = prob.objective.eval(x);
            std::ostringstream os;
            os << "phase I ended at s = " << s_star << " (no strictly feasible point found)";
            sol.diagnostics = os.str();
            return sol;
        }
    }

    const auto r2 = detail::pdipm(sp, x, opt);
    iters += r2.iters;
    sol.x = x;
    sol.iterations = iters;
    sol.objective = prob.objective.eval(x);
    sol.max_violation = max_violation(prob, x);
    std::ostringstream os;
    os << "gap " << r2.gap << ", dual residual " << r2.dual_res;
    sol.diagnostics = os.str();
    switch (r2.exit) {
        case detail::IpmResult::Exit::converged: sol.status = ConicStatus::optimal; break;
        case detail::IpmResult::Exit::max_iters: sol.status = ConicStatus::max_iters; break;
        default: sol.status = ConicStatus::numerical_failure; break;
    }
    if (sol.status == ConicStatus::optimal && sol.max_violation > opt.feas_tol) sol.status = ConicStatus::numerical_failure;
    return sol;
}

/// Plain-text dump: one block per form listing support, P, q and r.
inline void write_qcqp_text(const QCQPProblem& p, std::ostream& os)
{
    os.precision(17);
    auto form = [&os](const QuadForm& f) {
        os << "support " << f.idx.size();
        for (int i : f.idx) os << ' ' << i;
        os << "\nP\n" << f.P << "\nq\n" << f.q.transpose() << "\nr " << f.r << '\n';
    };
    os << "qcqp n " << p.n << " constraints " << p.constraints.size() << " equalities " << p.A_eq.rows() << '\n';
    os << "objective minimize\n";
    form(p.objective);
    for (std::size_t i = 0; i < p.constraints.size(); ++i) {
        os << "constraint " << i << " upper " << p.constraints[i].upper << '\n';
        form(p.constraints[i].f);
    }
    if (p.A_eq.rows() > 0) os << "A\n" << p.A_eq << "\nb\n" << p.b_eq.transpose() << '\n';
}

}  // namespace iosfd::conic
