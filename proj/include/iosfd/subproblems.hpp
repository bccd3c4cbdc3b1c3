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
#include "iosfd/conic/embedding.hpp"
#include "iosfd/conic/qcqp.hpp"
#include "iosfd/conic/sdp.hpp"
#include "iosfd/ios_surface.hpp"
#include "iosfd/types.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace iosfd {

/// Relative slack used when re-checking side constraints on solver output.
inline constexpr double kSideTol = 1e-9;

template <class T>
struct StepResult {
    T value;                  ///< updated block (the previous one if the step was rejected)
    double surrogate = 0.0;   ///< surrogate objective at the solver output
    double objective = 0.0;   ///< true objective at `value`
    conic::ConicStatus status = conic::ConicStatus::optimal;
    bool accepted = false;    ///< solver output replaced the previous block
    bool guarded = false;     ///< zero-expansion guard replaced the expansion point
};

/// Tolerances for the SCA subproblems. The SI objective can approach zero,
/// so the gap is driven far below the default.
inline conic::ConicOptions sca_options()
{
    conic::ConicOptions o;
    o.feas_tol = 1e-9;
    o.gap_tol = 1e-12;
    o.rel_gap_tol = 1e-10;
    o.max_iters = 200;
    return o;
}

inline bool is_infinite(double v) { return std::isinf(v) && v > 0.0; }

/// Sum-of-squares threshold (2^R - 1) sigma^2 for a rate target R.
inline double rate_threshold_power(double R_th, double sigma_d2) { return (std::exp2(R_th) - 1.0) * sigma_d2; }

// ---------------------------------------------------------------------------
// Beamforming steps
// ---------------------------------------------------------------------------

/// First-order lower bound of |h w|^2 around w_tilde.
inline double rate_surrogate(const CRow& h, const CVec& w_tilde, const CVec& w)
{
    const cd hwt = (h * w_tilde)(0);
    const cd hw = (h * w)(0);
    return 2.0 * std::real(std::conj(hw) * hwt) - std::norm(hwt);
}

inline CVec mrt(const CRow& h, double P_max)
{
    const double nh = h.norm();
    if (nh == 0.0) return CVec::Zero(h.size());
    return std::sqrt(P_max) * h.adjoint() / nh;
}

inline StepResult<CVec> beamforming_step_rate(const EffectiveChannels& eff, const CVec& w_prev, double P_max, double P_th)
{
    const auto M = eff.h_d.size();
    const int n = static_cast<int>(2 * M);
    const CRow& h = eff.h_d;
    const double prev_obj = std::norm((h * w_prev)(0));
    const double prev_si = si_power(eff, w_prev);

    StepResult<CVec> out;
    out.value = w_prev;
    out.objective = prev_obj;
    out.surrogate = prev_obj;
    if (h.norm() == 0.0) return out;

    CVec w_tilde = w_prev;
    if (std::abs((h * w_prev)(0)) == 0.0) {
        w_tilde = mrt(h, P_max);
        out.guarded = true;
    }
    const CVec g = h.adjoint() * (h * w_tilde)(0);
    const double sP = std::sqrt(P_max);

    conic::QCQPProblem p;
    p.n = n;
    p.objective = conic::QuadForm::dense(RMat::Zero(n, n), -sP * conic::embed_linear(g));
    p.constraints.push_back({conic::QuadForm::dense(RMat::Identity(n, n), RVec::Zero(n)), 1.0});
    if (!is_infinite(P_th)) {
        const CMat Q = eff.H_r.adjoint() * eff.H_r;
        p.constraints.push_back({conic::QuadForm::dense(P_max * conic::embed_hermitian(Q), RVec::Zero(n)), P_th});
    }
    const auto sol = conic::solve_qcqp(p, sca_options(), conic::stack(w_prev) / sP);
    out.status = sol.status;
    if (sol.status == conic::ConicStatus::infeasible) return out;

    const CVec w = sP * conic::unstack(sol.x);
    const double obj = std::norm((h * w)(0));
    const bool feasible = w.squaredNorm() <= P_max * (1.0 + kSideTol) &&
                          (is_infinite(P_th) || si_power(eff, w) <= P_th * (1.0 + kSideTol));
    const bool prev_feasible = w_prev.squaredNorm() <= P_max * (1.0 + kSideTol) &&
                               (is_infinite(P_th) || prev_si <= P_th * (1.0 + kSideTol));
    if (feasible && (obj >= prev_obj || !prev_feasible)) {
        out.value = w;
        out.objective = obj;
        out.surrogate = rate_surrogate(h, w_tilde, w);
        out.accepted = true;
    }
    return out;
}

inline StepResult<CVec> beamforming_step_si(const EffectiveChannels& eff, const CVec& w_prev, double P_max, double R_th,
                                            double sigma_d2)
{
    const auto M = eff.h_d.size();
    const int n = static_cast<int>(2 * M);
    const CRow& h = eff.h_d;
    const double tau = rate_threshold_power(R_th, sigma_d2);
    const double prev_obj = si_power(eff, w_prev);
    const double prev_gain = std::norm((h * w_prev)(0));

    StepResult<CVec> out;
    out.value = w_prev;
    out.objective = prev_obj;
    out.surrogate = prev_obj;

    CVec w_tilde = w_prev;
    if (tau > 0.0 && std::abs((h * w_prev)(0)) == 0.0) {
        if (h.norm() == 0.0) {
            out.status = conic::ConicStatus::infeasible;
            return out;
        }
        w_tilde = mrt(h, P_max);
        out.guarded = true;
    }
    const double sP = std::sqrt(P_max);
    const CMat Q = eff.H_r.adjoint() * eff.H_r;

    conic::QCQPProblem p;
    p.n = n;
    p.objective = conic::QuadForm::dense(P_max * conic::embed_hermitian(Q), RVec::Zero(n));
    p.constraints.push_back({conic::QuadForm::dense(RMat::Identity(n, n), RVec::Zero(n)), 1.0});
    if (tau > 0.0) {
        // 2 Re{w^H h^H h w~} - |h w~|^2 >= tau
        const cd hwt = (h * w_tilde)(0);
        const CVec g = h.adjoint() * hwt;
        p.constraints.push_back(
            {conic::QuadForm::dense(RMat::Zero(n, n), -2.0 * sP * conic::embed_linear(g)), -(std::norm(hwt) + tau)});
    }
    const auto sol = conic::solve_qcqp(p, sca_options(), conic::stack(w_prev) / sP);
    out.status = sol.status;
    if (sol.status == conic::ConicStatus::infeasible) return out;

    const CVec w = sP * conic::unstack(sol.x);
    const double obj = si_power(eff, w);
    const double gain = std::norm((h * w)(0));
    const bool feasible = w.squaredNorm() <= P_max * (1.0 + kSideTol) && gain >= tau * (1.0 - kSideTol);
    const bool prev_feasible = w_prev.squaredNorm() <= P_max * (1.0 + kSideTol) && prev_gain >= tau * (1.0 - kSideTol);
    if (feasible && (obj <= prev_obj || !prev_feasible)) {
        out.value = w;
        out.objective = obj;
        out.surrogate = obj;
        out.accepted = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Quantities shared by the surface steps
// ---------------------------------------------------------------------------

/// Per-element data for fixed w. With u = H_ti w:
///   refraction: |h_d w|^2 = |v^T beta|^2,                     v_l = conj(h_id,l) u_l
///   reflection: ||H_r w||^2 = ||c0 + K alpha||^2,             K = H_ir^H diag(u), c0 = H_tr^H w
/// where alpha, beta are the complex per-element coefficients.
struct SurfaceTerms {
    CVec u, v, c0;
    CMat K;

    SurfaceTerms(const ChannelSet& ch, const CVec& w)
    {
        u = ch.H_ti * w;
        v = ch.h_id.conjugate().cwiseProduct(u);
        c0 = ch.H_tr.adjoint() * w;
        K = ch.H_ir.adjoint() * u.asDiagonal();
    }

    /// Xi_1 = conj(v) v^T, so that beta^H Xi_1 beta = |v^T beta|^2.
    CMat xi1() const { return v.conjugate() * v.transpose(); }
    /// Xi_2 = K^H K = (H_ir H_ir^H) (.) (u u^H)^T.
    CMat xi2() const { return K.adjoint() * K; }
    /// z_l = u_l (w^H H_tr H_ir^H)_l, so that 2 Re{c0^H K alpha} = 2 Re{alpha^T z}.
    CVec z() const { return (c0.adjoint() * K).transpose(); }
    double d() const { return c0.squaredNorm(); }

    double rate_gain(const CVec& beta) const { return std::norm(v.dot(beta.conjugate())); }
    double si(const CVec& alpha) const { return (c0 + K * alpha).squaredNorm(); }
};

/// Matrix Xi with Tr(diag(x)^H X diag(x) Y) = x^H Xi x, namely X (.) Y^T.
inline CMat hadamard_trace_matrix(const CMat& X, const CMat& Y) { return X.cwiseProduct(Y.transpose()); }

/// First-order lower bound of beta^H Xi beta around beta_tilde.
inline double quadratic_surrogate(const CMat& Xi, const CVec& beta_tilde, const CVec& beta)
{
    const cd lin = beta.dot(Xi * beta_tilde);  // beta^H Xi beta~
    return 2.0 * std::real(lin) - std::real(beta_tilde.dot(Xi * beta_tilde));
}

/// Refraction phases that co-phase every term v_l e^{j beta_l}.
inline RVec aligned_phases(const CVec& v)
{
    RVec beta(v.size());
    for (Eigen::Index l = 0; l < v.size(); ++l) beta(l) = wrap_phase(-std::arg(v(l)));
    return beta;
}

namespace detail {

/// Variable layout of the surface steps: [Re alpha; Im alpha; Re beta; Im beta].
struct SurfaceLayout {
    int L;
    int n() const { return 4 * L; }
    std::vector<int> alpha_idx() const
    {
        std::vector<int> i(static_cast<std::size_t>(2 * L));
        std::iota(i.begin(), i.end(), 0);
        return i;
    }
    std::vector<int> beta_idx() const
    {
        std::vector<int> i(static_cast<std::size_t>(2 * L));
        std::iota(i.begin(), i.end(), 2 * L);
        return i;
    }
    RVec pack(const CVec& alpha, const CVec& beta) const
    {
        RVec x(n());
        x << conic::stack(alpha), conic::stack(beta);
        return x;
    }
    CVec alpha(const RVec& x) const { return conic::unstack(x.head(2 * L)); }
    CVec beta(const RVec& x) const { return conic::unstack(x.tail(2 * L)); }
};

inline conic::QuadForm element_norm(std::vector<int> idx)
{
    conic::QuadForm f;
    const auto k = static_cast<Eigen::Index>(idx.size());
    f.idx = std::move(idx);
    f.P = RMat::Identity(k, k);
    f.q = RVec::Zero(k);
    return f;
}

/// |alpha_l|^2 + |beta_l|^2 <= 1 for every element.
inline void add_joint_budget(conic::QCQPProblem& p, int L)
{
    for (int l = 0; l < L; ++l) p.constraints.push_back({element_norm({l, L + l, 2 * L + l, 3 * L + l}), 1.0});
}

/// |alpha_l|^2 <= 1 and |beta_l|^2 <= 1 separately.
inline void add_unit_discs(conic::QCQPProblem& p, int L)
{
    for (int l = 0; l < L; ++l) {
        p.constraints.push_back({element_norm({l, L + l}), 1.0});
        p.constraints.push_back({element_norm({2 * L + l, 3 * L + l}), 1.0});
    }
}

inline conic::QuadForm si_form(const CMat& Xi2, const CVec& z, double d, int L)
{
    SurfaceLayout lay{L};
    conic::QuadForm f;
    f.idx = lay.alpha_idx();
    f.P = conic::embed_hermitian(Xi2);
    f.q = 2.0 * conic::embed_linear_transpose(z);
    f.r = d;
    return f;
}

/// Linear term -Re{beta^H g} scaled by `scale`, on the beta block.
inline conic::QuadForm beta_linear(const CVec& g, double scale, double r, int L)
{
    SurfaceLayout lay{L};
    return conic::QuadForm::linear(lay.beta_idx(), scale * conic::embed_linear(g), r);
}

/// Projects onto unit modulus by phase extraction, keeping the previous
/// phase where the relaxed magnitude vanishes.
inline RVec project_phases(const CVec& x, const RVec& prev)
{
    RVec ph(x.size());
    for (Eigen::Index l = 0; l < x.size(); ++l) ph(l) = std::abs(x(l)) < 1e-6 ? prev(l) : wrap_phase(std::arg(x(l)));
    return ph;
}

inline CVec unit_phasors(const RVec& ph)
{
    CVec c(ph.size());
    for (Eigen::Index l = 0; l < ph.size(); ++l) c(l) = std::polar(1.0, ph(l));
    return c;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ES surface steps
// ---------------------------------------------------------------------------

inline StepResult<ESCoefficients> es_phase_step_rate(const ChannelSet& ch, const CVec& w, const ESCoefficients& prev,
                                                     double P_th)
{
    const int L = prev.size();
    const SurfaceTerms st(ch, w);
    const CVec alpha_prev = prev.reflection(), beta_prev = prev.refraction();
    const double prev_obj = st.rate_gain(beta_prev);

    StepResult<ESCoefficients> out;
    out.value = prev;
    out.objective = prev_obj;
    out.surrogate = prev_obj;
    if (st.v.norm() == 0.0) return out;

    const CMat Xi1 = st.xi1();
    CVec beta_tilde = beta_prev;
    if (std::abs(st.v.dot(beta_prev.conjugate())) == 0.0) {
        beta_tilde = detail::unit_phasors(aligned_phases(st.v)) / std::sqrt(2.0);
        out.guarded = true;
    }
    const CVec g = Xi1 * beta_tilde;

    detail::SurfaceLayout lay{L};
    conic::QCQPProblem p;
    p.n = lay.n();
    p.objective = detail::beta_linear(g, -1.0, 0.0, L);
    detail::add_joint_budget(p, L);
    if (!is_infinite(P_th)) p.constraints.push_back({detail::si_form(st.xi2(), st.z(), st.d(), L), P_th});

    const auto sol = conic::solve_qcqp(p, sca_options(), lay.pack(alpha_prev, beta_prev));
    out.status = sol.status;
    if (sol.status == conic::ConicStatus::infeasible) return out;

    const CVec alpha = lay.alpha(sol.x), beta = lay.beta(sol.x);
    const auto cand = ESCoefficients::from_complex(alpha, beta);
    const CVec a_c = cand.reflection(), b_c = cand.refraction();
    const double obj = st.rate_gain(b_c);
    const bool feasible = is_infinite(P_th) || st.si(a_c) <= P_th * (1.0 + kSideTol);
    if (feasible && obj >= prev_obj) {
        out.value = cand;
        out.objective = obj;
        out.surrogate = quadratic_surrogate(Xi1, beta_tilde, b_c);
        out.accepted = true;
    }
    return out;
}

inline StepResult<ESCoefficients> es_phase_step_si(const ChannelSet& ch, const CVec& w, const ESCoefficients& prev,
                                                   double R_th, double sigma_d2)
{
    const int L = prev.size();
    const SurfaceTerms st(ch, w);
    const double tau = rate_threshold_power(R_th, sigma_d2);
    const CVec alpha_prev = prev.reflection(), beta_prev = prev.refraction();
    const double prev_obj = st.si(alpha_prev);

    StepResult<ESCoefficients> out;
    out.value = prev;
    out.objective = prev_obj;
    out.surrogate = prev_obj;

    const CMat Xi1 = st.xi1();
    CVec beta_tilde = beta_prev;
    if (tau > 0.0 && std::abs(st.v.dot(beta_prev.conjugate())) == 0.0) {
        if (st.v.norm() == 0.0) {
            out.status = conic::ConicStatus::infeasible;
            return out;
        }
        beta_tilde = detail::unit_phasors(aligned_phases(st.v)) / std::sqrt(2.0);
        out.guarded = true;
    }

    detail::SurfaceLayout lay{L};
    conic::QCQPProblem p;
    p.n = lay.n();
    p.objective = detail::si_form(st.xi2(), st.z(), 0.0, L);
    detail::add_joint_budget(p, L);
    if (tau > 0.0) {
        // 2 Re{beta^H Xi1 beta~} - beta~^H Xi1 beta~ >= tau
        const CVec g = Xi1 * beta_tilde;
        const double q0 = std::real(beta_tilde.dot(g));
        p.constraints.push_back({detail::beta_linear(g, -2.0, 0.0, L), -(q0 + tau)});
    }

    const auto sol = conic::solve_qcqp(p, sca_options(), lay.pack(alpha_prev, beta_prev));
    out.status = sol.status;
    if (sol.status == conic::ConicStatus::infeasible) return out;

    const auto cand = ESCoefficients::from_complex(lay.alpha(sol.x), lay.beta(sol.x));
    const CVec a_c = cand.reflection(), b_c = cand.refraction();
    const double obj = st.si(a_c);
    const bool feasible = st.rate_gain(b_c) >= tau * (1.0 - kSideTol);
    const bool prev_feasible = st.rate_gain(beta_prev) >= tau * (1.0 - kSideTol);
    if (feasible && (obj <= prev_obj || !prev_feasible)) {
        out.value = cand;
        out.objective = obj;
        out.surrogate = obj;
        out.accepted = true;
    }
    return out;
}

// ---------------------------------------------------------------------------
// MS surface steps (mode vector fixed)
// ---------------------------------------------------------------------------

namespace detail {

/// Restricts the per-element terms to the current modes: refraction data
/// only on refracting elements, reflection data only on reflecting ones.
inline void mask_terms(SurfaceTerms& st, const Eigen::VectorXi& mode)
{
    for (Eigen::Index l = 0; l < mode.size(); ++l) {
        if (mode(l) == 1)
            st.v(l) = 0.0;
        else
            st.K.col(l).setZero();
    }
}

}  // namespace detail

inline StepResult<MSCoefficients> ms_phase_step_rate(const ChannelSet& ch, const CVec& w, const MSCoefficients& prev,
                                                     double P_th)
{
    const int L = prev.size();
    SurfaceTerms st(ch, w);
    detail::mask_terms(st, prev.mode);
    const CVec alpha_prev = prev.alpha_unit(), beta_prev = prev.beta_unit();
    const double prev_obj = st.rate_gain(beta_prev);

    StepResult<MSCoefficients> out;
    out.value = prev;
    out.objective = prev_obj;
    out.surrogate = prev_obj;
    if (st.v.norm() == 0.0) return out;

    const CMat Xi1 = st.xi1();
    CVec beta_tilde = beta_prev;
    if (std::abs(st.v.dot(beta_prev.conjugate())) == 0.0) {
        beta_tilde = detail::unit_phasors(aligned_phases(st.v));
        out.guarded = true;
    }
    const CVec g = Xi1 * beta_tilde;

    detail::SurfaceLayout lay{L};
    conic::QCQPProblem p;
    p.n = lay.n();
    p.objective = detail::beta_linear(g, -1.0, 0.0, L);
    detail::add_unit_discs(p, L);
    if (!is_infinite(P_th) && st.K.norm() > 0.0)
        p.constraints.push_back({detail::si_form(st.xi2(), st.z(), st.d(), L), P_th});

    const auto sol = conic::solve_qcqp(p, sca_options(), lay.pack(0.5 * alpha_prev, 0.5 * beta_prev));
    out.status = sol.status;
    if (sol.status == conic::ConicStatus::infeasible) return out;

    MSCoefficients cand = prev;
    cand.alpha = detail::project_phases(lay.alpha(sol.x), prev.alpha);
    cand.beta = detail::project_phases(lay.beta(sol.x), prev.beta);
    const double prev_si = st.si(alpha_prev);
    if (!is_infinite(P_th) && st.si(cand.alpha_unit()) > std::max(P_th, prev_si) * (1.0 + kSideTol)) cand.alpha = prev.alpha;
    if (st.rate_gain(cand.beta_unit()) < prev_obj) cand.beta = prev.beta;

    const double obj = st.rate_gain(cand.beta_unit());
    out.value = cand;
    out.objective = obj;
    out.surrogate = quadratic_surrogate(Xi1, beta_tilde, cand.beta_unit());
    out.accepted = cand.alpha != prev.alpha || cand.beta != prev.beta;
    return out;
}

inline StepResult<MSCoefficients> ms_phase_step_si(const ChannelSet& ch, const CVec& w, const MSCoefficients& prev,
                                                   double R_th, double sigma_d2)
{
    const int L = prev.size();
    SurfaceTerms st(ch, w);
    detail::mask_terms(st, prev.mode);
    const double tau = rate_threshold_power(R_th, sigma_d2);
    const CVec alpha_prev = prev.alpha_unit(), beta_prev = prev.beta_unit();
    const double prev_obj = st.si(alpha_prev);
    const double prev_gain = st.rate_gain(beta_prev);

    StepResult<MSCoefficients> out;
    out.value = prev;
    out.objective = prev_obj;
    out.surrogate = prev_obj;

    const CMat Xi1 = st.xi1();
    CVec beta_tilde = beta_prev;
    const bool rate_active = tau > 0.0 && st.v.norm() > 0.0;
    if (rate_active && std::abs(st.v.dot(beta_prev.conjugate())) == 0.0) {
        beta_tilde = detail::unit_phasors(aligned_phases(st.v));
        out.guarded = true;
    }
    if (st.K.norm() == 0.0 && !rate_active) return out;

    detail::SurfaceLayout lay{L};
    conic::QCQPProblem p;
    p.n = lay.n();
    p.objective = detail::si_form(st.xi2(), st.z(), 0.0, L);
    detail::add_unit_discs(p, L);
    if (rate_active) {
        const CVec g = Xi1 * beta_tilde;
        const double q0 = std::real(beta_tilde.dot(g));
        p.constraints.push_back({detail::beta_linear(g, -2.0, 0.0, L), -(q0 + tau)});
    }

    const auto sol = conic::solve_qcqp(p, sca_options(), lay.pack(0.5 * alpha_prev, 0.5 * beta_prev));
    out.status = sol.status;
    if (sol.status == conic::ConicStatus::infeasible) return out;

    MSCoefficients cand = prev;
    cand.alpha = detail::project_phases(lay.alpha(sol.x), prev.alpha);
    cand.beta = detail::project_phases(lay.beta(sol.x), prev.beta);
    if (st.si(cand.alpha_unit()) > prev_obj) cand.alpha = prev.alpha;
    const double gain = st.rate_gain(cand.beta_unit());
    if (gain < tau * (1.0 - kSideTol) && gain < prev_gain) cand.beta = prev.beta;

    out.value = cand;
    out.objective = st.si(cand.alpha_unit());
    out.surrogate = out.objective;
    out.accepted = cand.alpha != prev.alpha || cand.beta != prev.beta;
    return out;
}

// ---------------------------------------------------------------------------
// Mode selection by semidefinite relaxation
// ---------------------------------------------------------------------------

/// Binary-mode data for fixed w and phases. With a in {0,1}^L (1 = reflect):
///   rate term  f1(a) = a^T Xi1 a - 2 Re{a^T w1} + d1 = |h_d w|^2
///   SI term    f2(a) = a^T Xi2 a + 2 Re{a^T w2} + d2 = ||H_r w||^2
/// Lifting b = 2a - 1, x = [b; 1] gives f_k = 1/4 x^T Xi_k' x + c_k.
struct SDRData {
    int L = 0;
    CVec p;        ///< refraction terms conj(h_id,l) e^{j beta_l} u_l
    CMat k;        ///< reflection columns H_ir^H[:, l] e^{j alpha_l} u_l  (N x L)
    CVec c0;       ///< H_tr^H w
    RMat Xi1, Xi2; ///< L x L
    CVec w1, w2;
    double d1 = 0.0, d2 = 0.0;
    RVec h, g;     ///< bordering vectors of the lifted matrices
    RMat Xi1p, Xi2p;
    double c1 = 0.0, c2 = 0.0;

    double rate_term(const RVec& a) const { return a.dot(Xi1 * a) - 2.0 * a.dot(w1.real()) + d1; }
    double si_term(const RVec& a) const { return a.dot(Xi2 * a) + 2.0 * a.dot(w2.real()) + d2; }

    static RVec lift(const RVec& a)
    {
        RVec x(a.size() + 1);
        x << 2.0 * a.array() - 1.0, 1.0;
        return x;
    }
    double lifted_rate(const RVec& a) const
    {
        const RVec x = lift(a);
        return 0.25 * x.dot(Xi1p * x) + c1;
    }
    double lifted_si(const RVec& a) const
    {
        const RVec x = lift(a);
        return 0.25 * x.dot(Xi2p * x) + c2;
    }
};

namespace detail {

inline RMat bordered(const RMat& Xi, const RVec& v)
{
    const auto L = Xi.rows();
    RMat B = RMat::Zero(L + 1, L + 1);
    B.topLeftCorner(L, L) = Xi;
    B.topRightCorner(L, 1) = v;
    B.bottomLeftCorner(1, L) = v.transpose();
    return B;
}

}  // namespace detail

/// Relative mismatch between the lifted and the direct forms on `count`
/// random binary vectors.
inline double lift_mismatch(const SDRData& s, std::mt19937_64& rng, int count)
{
    std::bernoulli_distribution bit(0.5);
    double worst = 0.0;
    for (int t = 0; t < count; ++t) {
        RVec a(s.L);
        for (int l = 0; l < s.L; ++l) a(l) = bit(rng) ? 1.0 : 0.0;
        const double r = s.rate_term(a), q = s.si_term(a);
        worst = std::max(worst, std::abs(s.lifted_rate(a) - r) / std::max(std::abs(r), 1e-300));
        worst = std::max(worst, std::abs(s.lifted_si(a) - q) / std::max(std::abs(q), 1e-300));
    }
    return worst;
}

inline SDRData build_sdr_data(const ChannelSet& ch, const CVec& w, const RVec& alpha, const RVec& beta)
{
    const int L = static_cast<int>(ch.H_ti.rows());
    if (alpha.size() != L || beta.size() != L || w.size() != ch.H_ti.cols())
        throw std::invalid_argument("build_sdr_data: dimension mismatch");
    const SurfaceTerms st(ch, w);
    SDRData s;
    s.L = L;
    s.p = st.v.cwiseProduct(detail::unit_phasors(beta));
    s.k = st.K * detail::unit_phasors(alpha).asDiagonal();
    s.c0 = st.c0;

    const cd P = s.p.sum();
    s.Xi1 = (s.p * s.p.adjoint()).real();
    s.w1 = std::conj(P) * s.p;
    s.d1 = std::norm(P);

    s.Xi2 = (s.k.adjoint() * s.k).real();
    s.w2 = (s.c0.adjoint() * s.k).transpose();
    s.d2 = s.c0.squaredNorm();

    const RVec ones = RVec::Ones(L);
    s.h = -2.0 * s.w1.real() + s.Xi1 * ones;
    s.g = 2.0 * s.w2.real() + s.Xi2 * ones;
    s.c1 = 0.25 * ones.dot(s.Xi1 * ones) - s.w1.real().sum() + s.d1;
    s.c2 = 0.25 * ones.dot(s.Xi2 * ones) + s.w2.real().sum() + s.d2;
    s.Xi1p = detail::bordered(s.Xi1, s.h);
    s.Xi2p = detail::bordered(s.Xi2, s.g);

#ifndef NDEBUG
    std::mt19937_64 rng(0x5eed);
    if (lift_mismatch(s, rng, 16) > 1e-9) throw std::logic_error("build_sdr_data: lifted forms disagree with direct evaluation");
#endif
    return s;
}

inline SDRData build_sdr_data(const ChannelSet& ch, const CVec& w, const MSCoefficients& c)
{
    return build_sdr_data(ch, w, c.alpha, c.beta);
}

struct ModeSelection {
    Eigen::VectorXi mode;
    double objective = 0.0;   ///< rate term (rate side) or SI term (SI side) of the chosen mode
    double side_value = 0.0;  ///< the constrained term of the chosen mode
    bool feasible = false;
    double sdp_value = std::numeric_limits<double>::quiet_NaN();
    conic::ConicStatus sdp_status = conic::ConicStatus::optimal;
    int candidates_feasible = 0;
};

enum class ModeObjective { maximize_rate, minimize_si };

namespace detail {

struct ModeProblem {
    ModeObjective sense;
    double bound;  ///< P_th for the rate side, tau for the SI side

    double objective(const SDRData& s, const RVec& a) const
    {
        return sense == ModeObjective::maximize_rate ? s.rate_term(a) : s.si_term(a);
    }
    double side(const SDRData& s, const RVec& a) const
    {
        return sense == ModeObjective::maximize_rate ? s.si_term(a) : s.rate_term(a);
    }
    /// Amount by which a violates the side constraint (<= 0 when feasible).
    double violation(const SDRData& s, const RVec& a) const
    {
        if (sense == ModeObjective::maximize_rate) return is_infinite(bound) ? -1.0 : s.si_term(a) - bound;
        return bound - s.rate_term(a);
    }
    bool feasible(const SDRData& s, const RVec& a) const
    {
        const double v = violation(s, a);
        return v <= kSideTol * std::max(std::abs(bound), 1e-300) || v <= 0.0;
    }
    bool better(double x, double y) const { return sense == ModeObjective::maximize_rate ? x > y : x < y; }
};

/// Scans candidates in order and keeps the best feasible one; ties keep the
/// earlier candidate. Falls back to the least violating candidate.
struct CandidatePicker {
    CandidatePicker(const ModeProblem& m, const SDRData& d) : mp(m), s(d) {}

    const ModeProblem& mp;
    const SDRData& s;
    RVec best_a, fallback_a;
    double best_obj = 0.0, best_violation = std::numeric_limits<double>::infinity();
    bool have_best = false;
    int feasible_count = 0;

    void offer(const RVec& a)
    {
        if (mp.feasible(s, a)) {
            ++feasible_count;
            const double obj = mp.objective(s, a);
            if (!have_best || mp.better(obj, best_obj)) {
                best_a = a;
                best_obj = obj;
                have_best = true;
            }
        } else {
            const double v = mp.violation(s, a);
            if (v < best_violation) {
                best_violation = v;
                fallback_a = a;
            }
        }
    }

    ModeSelection result() const
    {
        ModeSelection r;
        const RVec& a = have_best ? best_a : fallback_a;
        r.mode = a.unaryExpr([](double x) { return x > 0.5 ? 1.0 : 0.0; }).cast<int>();
        r.objective = mp.objective(s, a);
        r.side_value = mp.side(s, a);
        r.feasible = have_best;
        r.candidates_feasible = feasible_count;
        return r;
    }
};

inline conic::SDPProblem mode_sdp(const SDRData& s, const ModeProblem& mp)
{
    conic::SDPProblem p;
    p.diag_rhs = RVec::Ones(s.L + 1);
    if (mp.sense == ModeObjective::maximize_rate) {
        p.C = 0.25 * s.Xi1p;
        p.constant = s.c1;
        p.maximize = true;
        if (!is_infinite(mp.bound))
            p.ineqs.push_back({0.25 * s.Xi2p, mp.bound - s.c2, conic::SDPInequality::Sense::less_equal});
    } else {
        p.C = 0.25 * s.Xi2p;
        p.constant = s.c2;
        p.maximize = false;
        if (mp.bound > 0.0)
            p.ineqs.push_back({0.25 * s.Xi1p, mp.bound - s.c1, conic::SDPInequality::Sense::greater_equal});
    }
    return p;
}

inline ModeSelection select_modes(const SDRData& s, const ModeProblem& mp, int G, std::uint64_t seed)
{
    const auto prob = mode_sdp(s, mp);
    const auto sol = conic::solve_sdp(prob);
    const int n = s.L + 1;

    CandidatePicker pick(mp, s);
    ModeSelection out;
    if (sol.status == conic::ConicStatus::infeasible) {
        out = ModeSelection{};
        out.sdp_status = sol.status;
        return out;
    }

    Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (sol.X + sol.X.transpose()));
    const RMat F = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    RVec zeta(n), a(s.L);
    for (int gi = 0; gi < G; ++gi) {
        for (int i = 0; i < n; ++i) zeta(i) = nd(rng);
        const RVec xi = F * zeta;
        const double last = xi(s.L) >= 0.0 ? 1.0 : -1.0;
        for (int l = 0; l < s.L; ++l) {
            const double b = (xi(l) >= 0.0 ? 1.0 : -1.0) * last;
            a(l) = 0.5 * (b + 1.0);
        }
        pick.offer(a);
    }
    out = pick.result();
    out.sdp_value = sol.objective;
    out.sdp_status = sol.status;
    return out;
}

}  // namespace detail

/// SDR plus Gaussian randomization for the rate side: maximize the rate
/// term subject to the SI term staying below P_th.
inline ModeSelection mode_selection_rate(const SDRData& s, double P_th, int G, std::uint64_t seed)
{
    return detail::select_modes(s, {ModeObjective::maximize_rate, P_th}, G, seed);
}

/// SI side: minimize the SI term subject to the rate target R_th.
inline ModeSelection mode_selection_si(const SDRData& s, double R_th, double sigma_d2, int G, std::uint64_t seed)
{
    return detail::select_modes(s, {ModeObjective::minimize_si, rate_threshold_power(R_th, sigma_d2)}, G, seed);
}

/// Exact optimum by enumeration of all 2^L mode vectors.
inline ModeSelection mode_selection_bruteforce(const SDRData& s, ModeObjective sense, double bound, int limit = 14)
{
    if (s.L > limit)
        throw std::invalid_argument("mode_selection_bruteforce: L = " + std::to_string(s.L) + " exceeds limit " +
                                    std::to_string(limit));
    const detail::ModeProblem mp{sense, bound};
    detail::CandidatePicker pick(mp, s);
    RVec a(s.L);
    const std::uint64_t total = std::uint64_t{1} << s.L;
    for (std::uint64_t mask = 0; mask < total; ++mask) {
        for (int l = 0; l < s.L; ++l) a(l) = static_cast<double>((mask >> l) & 1U);
        pick.offer(a);
    }
    return pick.result();
}

inline nlohmann::json to_json(const SDRData& s)
{
    auto dense = [](const RMat& M) {
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < M.rows(); ++i) {
            std::vector<double> r(static_cast<std::size_t>(M.cols()));
            for (Eigen::Index j = 0; j < M.cols(); ++j) r[static_cast<std::size_t>(j)] = M(i, j);
            rows.push_back(r);
        }
        return rows;
    };
    auto cvec = [](const CVec& v) {
        nlohmann::json a = nlohmann::json::array();
        for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back({v(i).real(), v(i).imag()});
        return a;
    };
    return {{"L", s.L},         {"Xi1", dense(s.Xi1)}, {"Xi2", dense(s.Xi2)}, {"w1", cvec(s.w1)},
            {"w2", cvec(s.w2)}, {"d1", s.d1},          {"d2", s.d2},          {"Xi1_lifted", dense(s.Xi1p)},
            {"Xi2_lifted", dense(s.Xi2p)},             {"c1", s.c1},          {"c2", s.c2}};
}

}  // namespace iosfd
