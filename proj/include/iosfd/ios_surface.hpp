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
#include "iosfd/types.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace iosfd {

inline constexpr double kAmplitudeTol = 1e-9;

/// Energy-splitting surface: every element reflects with a_l e^{j alpha_l}
/// and refracts with b_l e^{j beta_l}, subject to a_l^2 + b_l^2 <= 1.
struct ESCoefficients {
    RVec a, alpha, b, beta;

    int size() const { return static_cast<int>(a.size()); }

    void validate() const
    {
        const auto L = a.size();
        if (alpha.size() != L || b.size() != L || beta.size() != L)
            throw std::invalid_argument("ESCoefficients: inconsistent lengths");
        for (Eigen::Index l = 0; l < L; ++l) {
            if (!(a(l) >= -kAmplitudeTol && a(l) <= 1.0 + kAmplitudeTol && b(l) >= -kAmplitudeTol &&
                  b(l) <= 1.0 + kAmplitudeTol))
                throw std::invalid_argument("ESCoefficients: amplitude outside [0, 1] at element " + std::to_string(l));
            if (a(l) * a(l) + b(l) * b(l) > 1.0 + kAmplitudeTol)
                throw std::invalid_argument("ESCoefficients: a^2 + b^2 > 1 at element " + std::to_string(l));
            if (!std::isfinite(alpha(l)) || !std::isfinite(beta(l)))
                throw std::invalid_argument("ESCoefficients: non-finite phase");
        }
    }

    /// Builds from complex per-element coefficients (amplitude and phase of each).
    static ESCoefficients from_complex(const CVec& refl, const CVec& refr)
    {
        ESCoefficients c;
        const auto L = refl.size();
        c.a.resize(L);
        c.alpha.resize(L);
        c.b.resize(L);
        c.beta.resize(L);
        for (Eigen::Index l = 0; l < L; ++l) {
            c.a(l) = std::abs(refl(l));
            c.alpha(l) = wrap_phase(std::arg(refl(l)));
            c.b(l) = std::abs(refr(l));
            c.beta(l) = wrap_phase(std::arg(refr(l)));
        }
        c.normalize();
        return c;
    }

    /// Clamps round-off (amplitudes and the joint budget) and wraps phases.
    void normalize()
    {
        for (Eigen::Index l = 0; l < a.size(); ++l) {
            a(l) = std::clamp(a(l), 0.0, 1.0);
            b(l) = std::clamp(b(l), 0.0, 1.0);
            const double s = a(l) * a(l) + b(l) * b(l);
            if (s > 1.0) {
                a(l) /= std::sqrt(s);
                b(l) /= std::sqrt(s);
            }
            alpha(l) = wrap_phase(alpha(l));
            beta(l) = wrap_phase(beta(l));
        }
    }

    CVec reflection() const
    {
        CVec t(a.size());
        for (Eigen::Index l = 0; l < a.size(); ++l) t(l) = std::polar(a(l), alpha(l));
        return t;
    }
    CVec refraction() const
    {
        CVec t(b.size());
        for (Eigen::Index l = 0; l < b.size(); ++l) t(l) = std::polar(b(l), beta(l));
        return t;
    }
};

/// Mode-switching surface: element l reflects (mode 1) or refracts (mode 0)
/// with unit amplitude; alpha and beta are the phases used in each mode.
struct MSCoefficients {
    Eigen::VectorXi mode;
    RVec alpha, beta;

    int size() const { return static_cast<int>(mode.size()); }

    void validate() const
    {
        const auto L = mode.size();
        if (alpha.size() != L || beta.size() != L) throw std::invalid_argument("MSCoefficients: inconsistent lengths");
        for (Eigen::Index l = 0; l < L; ++l) {
            if (mode(l) != 0 && mode(l) != 1)
                throw std::invalid_argument("MSCoefficients: mode must be 0 or 1 at element " + std::to_string(l));
            if (!std::isfinite(alpha(l)) || !std::isfinite(beta(l)))
                throw std::invalid_argument("MSCoefficients: non-finite phase");
        }
    }

    void normalize()
    {
        for (Eigen::Index l = 0; l < alpha.size(); ++l) {
            alpha(l) = wrap_phase(alpha(l));
            beta(l) = wrap_phase(beta(l));
        }
    }

    RVec a() const { return mode.cast<double>(); }

    /// Unit-modulus phase vectors before the mode mask is applied.
    CVec alpha_unit() const
    {
        CVec t(alpha.size());
        for (Eigen::Index l = 0; l < alpha.size(); ++l) t(l) = std::polar(1.0, alpha(l));
        return t;
    }
    CVec beta_unit() const
    {
        CVec t(beta.size());
        for (Eigen::Index l = 0; l < beta.size(); ++l) t(l) = std::polar(1.0, beta(l));
        return t;
    }

    CVec reflection() const
    {
        CVec t = alpha_unit();
        for (Eigen::Index l = 0; l < t.size(); ++l)
            if (mode(l) == 0) t(l) = 0.0;
        return t;
    }
    CVec refraction() const
    {
        CVec t = beta_unit();
        for (Eigen::Index l = 0; l < t.size(); ++l)
            if (mode(l) == 1) t(l) = 0.0;
        return t;
    }
};

using SurfaceCoefficients = std::variant<ESCoefficients, MSCoefficients>;

struct EffectiveChannels {
    CRow h_d;  ///< 1 x M
    CMat H_r;  ///< N x M
};

/// h_d = h_id^H diag(refr) H_ti and H_r = H_tr^H + H_ir^H diag(refl) H_ti.
inline EffectiveChannels effective_channels_from(const ChannelSet& ch, const CVec& refl, const CVec& refr)
{
    const auto L = ch.H_ti.rows();
    if (refl.size() != L || refr.size() != L || ch.h_id.size() != L || ch.H_ir.rows() != L)
        throw std::invalid_argument("effective_channels: dimension mismatch");
    EffectiveChannels e;
    const CVec hd_weights = ch.h_id.conjugate().cwiseProduct(refr);
    e.h_d = hd_weights.transpose() * ch.H_ti;
    e.H_r = ch.H_tr.adjoint() + ch.H_ir.adjoint() * refl.asDiagonal() * ch.H_ti;
    return e;
}

inline EffectiveChannels effective_channels(const ChannelSet& ch, const ESCoefficients& c)
{
    c.validate();
    return effective_channels_from(ch, c.reflection(), c.refraction());
}

inline EffectiveChannels effective_channels(const ChannelSet& ch, const MSCoefficients& c)
{
    c.validate();
    return effective_channels_from(ch, c.reflection(), c.refraction());
}

inline EffectiveChannels effective_channels(const ChannelSet& ch, const SurfaceCoefficients& c)
{
    return std::visit([&](const auto& x) { return effective_channels(ch, x); }, c);
}

inline double data_rate(const EffectiveChannels& e, const CVec& w, double sigma_d2)
{
    const double g = std::norm((e.h_d * w)(0));
    return std::log2(1.0 + g / sigma_d2);
}

/// Received self-interference power, evaluated through the rank-one
/// identity ||H_r w w^H H_r^H||_F = ||H_r w||^2.
inline double si_power(const EffectiveChannels& e, const CVec& w) { return (e.H_r * w).squaredNorm(); }

/// Same quantity as si_power, computed from the explicit N x N matrix.
inline double si_power_frobenius(const EffectiveChannels& e, const CVec& w)
{
    const CMat R = e.H_r * w * w.adjoint() * e.H_r.adjoint();
    return R.norm();
}

inline double quantize_phase(double phi, int bits)
{
    if (bits < 1) throw std::invalid_argument("quantize_phases: bits must be >= 1");
    const double step = kTwoPi / std::ldexp(1.0, bits);
    return wrap_phase(std::round(wrap_phase(phi) / step) * step);
}

inline ESCoefficients quantize_phases(ESCoefficients c, int bits)
{
    for (Eigen::Index l = 0; l < c.a.size(); ++l) {
        c.alpha(l) = quantize_phase(c.alpha(l), bits);
        c.beta(l) = quantize_phase(c.beta(l), bits);
    }
    return c;
}

inline MSCoefficients quantize_phases(MSCoefficients c, int bits)
{
    for (Eigen::Index l = 0; l < c.alpha.size(); ++l) {
        c.alpha(l) = quantize_phase(c.alpha(l), bits);
        c.beta(l) = quantize_phase(c.beta(l), bits);
    }
    return c;
}

inline SurfaceCoefficients quantize_phases(const SurfaceCoefficients& c, int bits)
{
    return std::visit([bits](const auto& x) -> SurfaceCoefficients { return quantize_phases(x, bits); }, c);
}

namespace detail {

inline nlohmann::json vec_json(const RVec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline RVec json_vec(const nlohmann::json& j, const char* field)
{
    if (!j.contains(field) || !j[field].is_array())
        throw std::invalid_argument(std::string("coefficients: missing array '") + field + "'");
    const auto v = j[field].get<std::vector<double>>();
    return Eigen::Map<const RVec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline nlohmann::json to_json(const ESCoefficients& c)
{
    return {{"type", "ES"}, {"a", detail::vec_json(c.a)}, {"alpha", detail::vec_json(c.alpha)},
            {"b", detail::vec_json(c.b)}, {"beta", detail::vec_json(c.beta)}};
}

inline nlohmann::json to_json(const MSCoefficients& c)
{
    return {{"type", "MS"}, {"mode", std::vector<int>(c.mode.data(), c.mode.data() + c.mode.size())},
            {"alpha", detail::vec_json(c.alpha)}, {"beta", detail::vec_json(c.beta)}};
}

inline nlohmann::json to_json(const SurfaceCoefficients& c)
{
    return std::visit([](const auto& x) { return to_json(x); }, c);
}

inline SurfaceCoefficients surface_from_json(const nlohmann::json& j)
{
    const std::string type = j.value("type", "");
    if (type == "ES") {
        ESCoefficients c{detail::json_vec(j, "a"), detail::json_vec(j, "alpha"), detail::json_vec(j, "b"),
                         detail::json_vec(j, "beta")};
        c.validate();
        c.normalize();
        return c;
    }
    if (type == "MS") {
        if (!j.contains("mode") || !j["mode"].is_array()) throw std::invalid_argument("coefficients: missing 'mode'");
        const auto m = j["mode"].get<std::vector<int>>();
        MSCoefficients c{Eigen::Map<const Eigen::VectorXi>(m.data(), static_cast<Eigen::Index>(m.size())),
                         detail::json_vec(j, "alpha"), detail::json_vec(j, "beta")};
        c.validate();
        c.normalize();
        return c;
    }
    throw std::invalid_argument("coefficients: 'type' must be \"ES\" or \"MS\"");
}

}  // namespace iosfd
