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
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace iosfd::conic {

struct SDPInequality {
    enum class Sense { less_equal, greater_equal };
    RMat A;  ///< symmetric n x n
    double rhs = 0.0;
    Sense sense = Sense::less_equal;
};

/// Optimize <C, X> + constant over symmetric X >= 0 with diag(X) = diag_rhs
/// and a list of trace inequalities <A_k, X> (<= or >=) rhs_k.
struct SDPProblem {
    RMat C;
    bool maximize = true;
    double constant = 0.0;
    RVec diag_rhs;
    std::vector<SDPInequality> ineqs;

    Eigen::Index n() const { return C.rows(); }

    void validate() const
    {
        const auto k = n();
        if (k < 1 || C.cols() != k) throw std::invalid_argument("SDP: C must be square and nonempty");
        if (diag_rhs.size() != k) throw std::invalid_argument("SDP: diag_rhs has wrong length");
        if ((diag_rhs.array() <= 0.0).any()) throw std::invalid_argument("SDP: diagonal right-hand sides must be positive");
        auto sym = [](const RMat& A) {
            return (A - A.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff());
        };
        if (!sym(C)) throw std::invalid_argument("SDP: C is not symmetric");
        for (const auto& q : ineqs)
            if (q.A.rows() != k || q.A.cols() != k || !sym(q.A))
                throw std::invalid_argument("SDP: inequality matrix must be symmetric n x n");
    }
};

inline double trace_product(const RMat& A, const RMat& B) { return A.cwiseProduct(B).sum(); }

namespace detail {

inline RMat sym(const RMat& A) { return 0.5 * (A + A.transpose()); }

/// Largest step in [0, 1] keeping X + a dX positive definite, times 0.98.
inline double psd_step(const Eigen::LLT<RMat>& Lx, const RMat& dX)
{
    const RMat Linv_dX = Lx.matrixL().solve(dX);
    const RMat W = Lx.matrixL().solve(Linv_dX.transpose());
    Eigen::SelfAdjointEigenSolver<RMat> es(sym(W), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff();
    if (lmin >= 0.0) return 1.0;
    return std::min(1.0, 0.98 * (-1.0 / lmin));
}

inline double lp_step(const RVec& s, const RVec& ds)
{
    double a = 1.0;
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (ds(i) < 0.0) a = std::min(a, 0.98 * (-s(i) / ds(i)));
    return a;
}

/// Normalized minimization form: min <C, X> s.t. diag(X) = d, <A_k, X> + s_k = b_k, s >= 0.
struct StdSDP {
    RMat C;
    RVec d;
    std::vector<RMat> A;
    RVec b;
};

struct SdpRun {
    RMat X;
    RVec y;
    ConicStatus status = ConicStatus::numerical_failure;
    int iters = 0;
    double pinf = 0.0, dinf = 0.0, gap = 0.0;
};

/// Infeasible primal-dual path following with the HKM direction and a
/// Mehrotra predictor-corrector.
inline SdpRun hkm(const StdSDP& P, const ConicOptions& opt, double tol)
{
    const auto n = P.C.rows();
    const auto p = static_cast<Eigen::Index>(P.A.size());
    const auto m = n + p;

    RVec b(m);
    b << P.d, P.b;
    const double bnorm = b.norm();
    const double cnorm = P.C.norm();

    RMat X = P.d.asDiagonal();
    RMat Z = (1.0 + cnorm) * RMat::Identity(n, n);
    RVec s = RVec::Ones(p);
    RVec z = RVec::Ones(p);
    RVec y = RVec::Zero(m);

    auto A_adj = [&](const RVec& v) {
        RMat S = RMat::Zero(n, n);
        S.diagonal() = v.head(n);
        for (Eigen::Index k = 0; k < p; ++k) S += v(n + k) * P.A[static_cast<std::size_t>(k)];
        return S;
    };
    auto A_op = [&](const RMat& Y) {
        RVec v(m);
        v.head(n) = Y.diagonal();
        for (Eigen::Index k = 0; k < p; ++k) v(n + k) = trace_product(P.A[static_cast<std::size_t>(k)], Y);
        return v;
    };

    SdpRun run;
    for (int it = 0; it < opt.max_iters; ++it) {
        run.iters = it;
        RVec rp = b - A_op(X);
        rp.tail(p) -= s;
        const RMat Rd = P.C - A_adj(y) - Z;
        const RVec rz = -y.tail(p) - z;

        const double pobj = trace_product(P.C, X);
        const double dobj = b.dot(y);
        run.pinf = rp.norm() / (1.0 + bnorm);
        run.dinf = (Rd.norm() + rz.norm()) / (1.0 + cnorm);
        run.gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
        const double mu = (trace_product(X, Z) + s.dot(z)) / static_cast<double>(n + p);
        if (run.pinf <= tol && run.dinf <= tol && run.gap <= tol) {
            run.status = ConicStatus::optimal;
            break;
        }
        if (!X.allFinite() || !Z.allFinite()) {
            run.status = ConicStatus::numerical_failure;
            break;
        }

        Eigen::LLT<RMat> Lz(Z);
        Eigen::LLT<RMat> Lx(X);
        if (Lz.info() != Eigen::Success || Lx.info() != Eigen::Success) {
            run.status = ConicStatus::numerical_failure;
            break;
        }
        const RMat Zi = Lz.solve(RMat::Identity(n, n));

        // Schur complement M_ij = Tr(A_i Z^-1 A_j X) plus the slack terms.
        RMat M(m, m);
        M.topLeftCorner(n, n) = Zi.cwiseProduct(X);
        std::vector<RMat> ZiAX(static_cast<std::size_t>(p));
        for (Eigen::Index k = 0; k < p; ++k) {
            ZiAX[static_cast<std::size_t>(k)] = Zi * P.A[static_cast<std::size_t>(k)] * X;
            const RVec dg = ZiAX[static_cast<std::size_t>(k)].diagonal();
            M.block(0, n + k, n, 1) = dg;
            M.block(n + k, 0, 1, n) = dg.transpose();
        }
        for (Eigen::Index k = 0; k < p; ++k)
            for (Eigen::Index l = k; l < p; ++l) {
                const double v = trace_product(P.A[static_cast<std::size_t>(l)], ZiAX[static_cast<std::size_t>(k)].transpose());
                M(n + k, n + l) = v;
                M(n + l, n + k) = v;
            }
        for (Eigen::Index k = 0; k < p; ++k) M(n + k, n + k) += s(k) / z(k);
        M = sym(M);
        Eigen::LLT<RMat> Lm(M);
        Eigen::LDLT<RMat> Lm_fallback;
        const bool use_llt = Lm.info() == Eigen::Success;
        if (!use_llt) Lm_fallback.compute(M + 1e-14 * M.diagonal().cwiseAbs().maxCoeff() * RMat::Identity(m, m));

        const RMat ZiRdX = Zi * Rd * X;
        auto direction = [&](double sigma_mu, const RMat& corrX, const RVec& corrS, RMat& dX, RMat& dZ, RVec& dy,
                             RVec& ds, RVec& dz) {
            const RMat G = sigma_mu * Zi - X - corrX;
            RVec gs(p);
            for (Eigen::Index k = 0; k < p; ++k) gs(k) = sigma_mu / z(k) - s(k) - corrS(k);
            RVec rhs = rp - A_op(G) + A_op(ZiRdX);
            for (Eigen::Index k = 0; k < p; ++k) rhs(n + k) -= gs(k) - s(k) / z(k) * rz(k);
            dy = use_llt ? RVec(Lm.solve(rhs)) : RVec(Lm_fallback.solve(rhs));
            dZ = Rd - A_adj(dy);
            dX = sym(G - Zi * dZ * X);
            dz = rz - dy.tail(p);
            ds.resize(p);
            for (Eigen::Index k = 0; k < p; ++k) ds(k) = gs(k) - s(k) / z(k) * dz(k);
        };

        RMat dXa, dZa, dX, dZ;
        RVec dya, dsa, dza, dy, ds, dz;
        direction(0.0, RMat::Zero(n, n), RVec::Zero(p), dXa, dZa, dya, dsa, dza);
        const double ap_a = std::min(psd_step(Lx, dXa), lp_step(s, dsa));
        const double ad_a = std::min(psd_step(Lz, dZa), lp_step(z, dza));
        const double mu_aff =
            (trace_product(X + ap_a * dXa, Z + ad_a * dZa) + (s + ap_a * dsa).dot(z + ad_a * dza)) / static_cast<double>(n + p);
        const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3.0);

        const RMat corrX = sym(Zi * dZa * dXa);
        RVec corrS(p);
        for (Eigen::Index k = 0; k < p; ++k) corrS(k) = dza(k) * dsa(k) / z(k);
        direction(sigma * mu, corrX, corrS, dX, dZ, dy, ds, dz);
        if (!dX.allFinite() || !dy.allFinite()) {
            run.status = ConicStatus::numerical_failure;
            break;
        }
        const double ap = std::min(psd_step(Lx, dX), lp_step(s, ds));
        const double ad = std::min(psd_step(Lz, dZ), lp_step(z, dz));
        X = sym(X + ap * dX);
        s += ap * ds;
        Z = sym(Z + ad * dZ);
        z += ad * dz;
        y += ad * dy;
        run.status = ConicStatus::max_iters;
        run.iters = it + 1;
    }
    run.X = X;
    run.y = y;
    return run;
}

inline StdSDP standardize(const SDPProblem& prob, double& cscale, std::vector<double>& row_scale)
{
    StdSDP s;
    const double sign = prob.maximize ? -1.0 : 1.0;
    const double cmax = prob.C.cwiseAbs().maxCoeff();
    cscale = cmax > 0.0 ? cmax : 1.0;
    s.C = sign * prob.C / cscale;
    s.d = prob.diag_rhs;
    s.b.resize(static_cast<Eigen::Index>(prob.ineqs.size()));
    row_scale.clear();
    for (std::size_t k = 0; k < prob.ineqs.size(); ++k) {
        const auto& q = prob.ineqs[k];
        const double sg = q.sense == SDPInequality::Sense::less_equal ? 1.0 : -1.0;
        const double sc = std::max({q.A.cwiseAbs().maxCoeff(), std::abs(q.rhs), 1e-300});
        s.A.push_back(sg * q.A / sc);
        s.b(static_cast<Eigen::Index>(k)) = sg * q.rhs / sc;
        row_scale.push_back(sc);
    }
    return s;
}

}  // namespace detail

inline double max_violation(const SDPProblem& p, const RMat& X)
{
    double v = (X.diagonal() - p.diag_rhs).cwiseAbs().maxCoeff();
    for (const auto& q : p.ineqs) {
        const double lhs = trace_product(q.A, X);
        const double e = q.sense == SDPInequality::Sense::less_equal ? lhs - q.rhs : q.rhs - lhs;
        v = std::max(v, e);
    }
    return v;
}

/// Solves the SDP. Each inequality is first checked on its own against the
/// elliptope {X >= 0, diag(X) = d}; an inequality that cannot be met there
/// makes the whole problem infeasible.
inline ConicSolution solve_sdp(const SDPProblem& prob, const ConicOptions& opt = {})
{
    prob.validate();
    ConicSolution sol;
    const double tol = std::min(opt.gap_tol, 1e-8);

    for (std::size_t k = 0; k < prob.ineqs.size(); ++k) {
        const auto& q = prob.ineqs[k];
        SDPProblem aux;
        aux.C = q.A;
        aux.maximize = q.sense == SDPInequality::Sense::greater_equal;
        aux.diag_rhs = prob.diag_rhs;
        const auto best = solve_sdp(aux, opt);
        if (best.status != ConicStatus::optimal) continue;
        const double scale = std::max({1.0, std::abs(q.rhs), q.A.cwiseAbs().maxCoeff()});
        const bool violated = aux.maximize ? best.objective < q.rhs - opt.feas_tol * scale
                                           : best.objective > q.rhs + opt.feas_tol * scale;
        if (violated) {
            sol.status = ConicStatus::infeasible;
            sol.X = best.X;
            std::ostringstream os;
            os << "inequality " << k << " cannot be satisfied: best value " << best.objective << " vs rhs " << q.rhs;
            sol.diagnostics = os.str();
            sol.max_violation = max_violation(prob, best.X);
            return sol;
        }
    }

    double cscale = 1.0;
    std::vector<double> row_scale;
    const auto sp = detail::standardize(prob, cscale, row_scale);
    const auto run = detail::hkm(sp, opt, tol);

    sol.X = run.X;
    sol.iterations = run.iters;
    sol.status = run.status;
    sol.objective = trace_product(prob.C, run.X) + prob.constant;
    sol.max_violation = max_violation(prob, run.X);
    std::ostringstream os;
    os << "pinf " << run.pinf << ", dinf " << run.dinf << ", gap " << run.gap;
    sol.diagnostics = os.str();
    if (sol.status == ConicStatus::optimal && sol.max_violation > opt.feas_tol) sol.status = ConicStatus::numerical_failure;
    return sol;
}

/// SDPA sparse format. The problem is written as the SDPA dual
/// max <F0, Y> s.t. <F_i, Y> = c_i, with one PSD block and one diagonal
/// block for the inequality slacks; F0 = -C for minimization and C for
/// maximization.
inline void write_sdpa(const SDPProblem& prob, std::ostream& os)
{
    const auto n = prob.n();
    const auto p = static_cast<Eigen::Index>(prob.ineqs.size());
    const auto m = n + p;
    os.precision(17);
    os << "* iosfd SDP dump, constant term " << prob.constant << '\n';
    os << m << '\n' << (p > 0 ? 2 : 1) << '\n' << n;
    if (p > 0) os << ' ' << -p;
    os << '\n';
    for (Eigen::Index i = 0; i < n; ++i) os << prob.diag_rhs(i) << ' ';
    for (const auto& q : prob.ineqs) os << (q.sense == SDPInequality::Sense::less_equal ? q.rhs : -q.rhs) << ' ';
    os << '\n';
    const double sign = prob.maximize ? 1.0 : -1.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j)
            if (prob.C(i, j) != 0.0) os << "0 1 " << i + 1 << ' ' << j + 1 << ' ' << sign * prob.C(i, j) << '\n';
    for (Eigen::Index i = 0; i < n; ++i) os << i + 1 << " 1 " << i + 1 << ' ' << i + 1 << " 1\n";
    for (Eigen::Index k = 0; k < p; ++k) {
        const auto& q = prob.ineqs[static_cast<std::size_t>(k)];
        const double sg = q.sense == SDPInequality::Sense::less_equal ? 1.0 : -1.0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i; j < n; ++j)
                if (q.A(i, j) != 0.0) os << n + k + 1 << " 1 " << i + 1 << ' ' << j + 1 << ' ' << sg * q.A(i, j) << '\n';
        os << n + k + 1 << " 2 " << k + 1 << ' ' << k + 1 << " 1\n";
    }
}

}  // namespace iosfd::conic
