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

#include "iosfd/config.hpp"
#include "iosfd/types.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace iosfd {

/// Range and angle pair of a target as seen from an origin. The local frame
/// of every node has its boresight along +x, so the elevation is measured
/// from the x axis and the azimuth lives in the y-z plane.
struct Spherical {
    double r = 0.0;
    double theta = 0.0;  ///< elevation in [0, pi/2]
    double phi = 0.0;    ///< azimuth in [0, 2*pi)
};

inline Spherical spherical_between(const Point3& origin, const Point3& target)
{
    const double vx = target[0] - origin[0];
    const double vy = target[1] - origin[1];
    const double vz = target[2] - origin[2];
    Spherical s;
    s.r = std::sqrt(vx * vx + vy * vy + vz * vz);
    if (!(s.r > 0.0)) throw std::invalid_argument("build_geometry: coincident positions (zero range)");
    s.theta = std::acos(std::min(1.0, std::abs(vx) / s.r));
    s.phi = wrap_phase(std::atan2(vz, vy));
    return s;
}

/// Pairwise table of spherical coordinates, rows indexed by origin.
struct PairTable {
    RMat r, theta, phi;

    PairTable() = default;
    PairTable(Eigen::Index rows, Eigen::Index cols) : r(rows, cols), theta(rows, cols), phi(rows, cols) {}

    void set(Eigen::Index i, Eigen::Index j, const Spherical& s)
    {
        r(i, j) = s.r;
        theta(i, j) = s.theta;
        phi(i, j) = s.phi;
    }
};

struct Geometry {
    std::vector<Point3> tx_positions;
    std::vector<Point3> rx_positions;
    std::vector<Point3> ios_positions;
    Point3 dest_position{};

    PairTable ios_tx;   ///< L x M, tx antenna m seen from element l
    PairTable tx_rx;    ///< M x N, rx antenna n seen from tx antenna m
    PairTable rx_tx;    ///< N x M, tx antenna m seen from rx antenna n
    PairTable ios_rx;   ///< L x N, rx antenna n seen from element l
    PairTable ios_dest; ///< L x 1

    int M() const { return static_cast<int>(tx_positions.size()); }
    int N() const { return static_cast<int>(rx_positions.size()); }
    int L() const { return static_cast<int>(ios_positions.size()); }
};

/// Side length of the planar surface layout, or 0 when L is not a perfect square.
inline int planar_side(int L)
{
    const int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(L))));
    return s * s == L ? s : 0;
}

inline Geometry build_geometry(const SystemConfig& cfg)
{
    cfg.validate();
    Geometry g;
    const double d = cfg.spacing;

    auto linear_y = [d](const Point3& anchor, int count) {
        std::vector<Point3> pts(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i) pts[static_cast<std::size_t>(i)] = {anchor[0], anchor[1] + i * d, anchor[2]};
        return pts;
    };

    g.tx_positions = linear_y(cfg.tx_anchor, cfg.M);
    g.rx_positions = linear_y(cfg.rx_anchor, cfg.N);
    if (const int side = planar_side(cfg.L); side > 0) {
        g.ios_positions.reserve(static_cast<std::size_t>(cfg.L));
        for (int i = 0; i < side; ++i)
            for (int j = 0; j < side; ++j)
                g.ios_positions.push_back({cfg.ios_anchor[0], cfg.ios_anchor[1] + i * d, cfg.ios_anchor[2] + j * d});
    } else {
        g.ios_positions = linear_y(cfg.ios_anchor, cfg.L);
    }
    g.dest_position = cfg.dest;

    const int M = cfg.M, N = cfg.N, L = cfg.L;
    g.ios_tx = PairTable(L, M);
    g.tx_rx = PairTable(M, N);
    g.rx_tx = PairTable(N, M);
    g.ios_rx = PairTable(L, N);
    g.ios_dest = PairTable(L, 1);

    const auto at = [](const std::vector<Point3>& v, int i) -> const Point3& { return v[static_cast<std::size_t>(i)]; };
    for (int l = 0; l < L; ++l) {
        for (int m = 0; m < M; ++m) g.ios_tx.set(l, m, spherical_between(at(g.ios_positions, l), at(g.tx_positions, m)));
        for (int n = 0; n < N; ++n) g.ios_rx.set(l, n, spherical_between(at(g.ios_positions, l), at(g.rx_positions, n)));
        g.ios_dest.set(l, 0, spherical_between(at(g.ios_positions, l), g.dest_position));
    }
    for (int m = 0; m < M; ++m) {
        for (int n = 0; n < N; ++n) {
            g.tx_rx.set(m, n, spherical_between(at(g.tx_positions, m), at(g.rx_positions, n)));
            g.rx_tx.set(n, m, spherical_between(at(g.rx_positions, n), at(g.tx_positions, m)));
        }
    }
    return g;
}

/// Elevation-only power pattern G0 * cos(theta)^q.
inline double antenna_gain(double theta, double /*phi*/, double exponent, double peak)
{
    if (exponent == 0.0) return peak;
    return peak * std::pow(std::max(0.0, std::cos(theta)), exponent);
}

struct ChannelSet {
    CMat H_ti;  ///< L x M
    CMat H_tr;  ///< M x N, so that H_tr^H maps an M-vector to the N receive antennas
    CVec h_id;  ///< L
    CMat H_ir;  ///< L x N

    bool operator==(const ChannelSet& o) const
    {
        return H_ti == o.H_ti && H_tr == o.H_tr && h_id == o.h_id && H_ir == o.H_ir;
    }
};

namespace detail {

/// One CN(0,1) sample: real and imaginary parts are independent N(0, 1/2).
inline cd standard_cn(std::mt19937_64& rng)
{
    std::normal_distribution<double> nd(0.0, std::sqrt(0.5));
    const double re = nd(rng);
    const double im = nd(rng);
    return {re, im};
}

inline cd los_phase(double r, double lambda) { return std::polar(1.0, -kTwoPi * r / lambda); }

struct RicianWeights {
    double los, nlos;
};

inline RicianWeights rician_weights(double K)
{
    if (std::isinf(K)) return {1.0, 0.0};
    return {std::sqrt(K / (K + 1.0)), std::sqrt(1.0 / (K + 1.0))};
}

}  // namespace detail

/// Draws the channel set. H_ti and H_ir are deterministic; the NLoS parts of
/// H_tr (row-major over (m, n)) and then h_id (over l) come from one
/// mt19937_64 stream seeded with `seed`.
inline ChannelSet sample_channels(const Geometry& g, const SystemConfig& cfg, std::uint64_t seed)
{
    if (g.M() != cfg.M || g.N() != cfg.N || g.L() != cfg.L)
        throw std::invalid_argument("sample_channels: geometry dimensions do not match config");

    const int M = cfg.M, N = cfg.N, L = cfg.L;
    const double lam = cfg.wavelength;
    const double half_kappa = cfg.pathloss_exp / 2.0;
    const auto w = detail::rician_weights(cfg.rician_K);
    const auto gain_t = [&](double th) { return antenna_gain(th, 0.0, cfg.gain_exponent_tx, cfg.gain_peak); };
    const auto gain_r = [&](double th) { return antenna_gain(th, 0.0, cfg.gain_exponent_rx, cfg.gain_peak); };

    ChannelSet ch;
    ch.H_ti.resize(L, M);
    ch.H_ir.resize(L, N);
    ch.H_tr.resize(M, N);
    ch.h_id.resize(L);

    for (int l = 0; l < L; ++l) {
        for (int m = 0; m < M; ++m) {
            const double r = g.ios_tx.r(l, m);
            ch.H_ti(l, m) = lam * std::sqrt(gain_t(g.ios_tx.theta(l, m))) / (4.0 * kPi * r) * detail::los_phase(r, lam);
        }
        for (int n = 0; n < N; ++n) {
            const double r = g.ios_rx.r(l, n);
            ch.H_ir(l, n) = lam * std::sqrt(gain_r(g.ios_rx.theta(l, n))) / (4.0 * kPi * r) * detail::los_phase(r, lam);
        }
    }

    std::mt19937_64 rng(seed);
    for (int m = 0; m < M; ++m) {
        for (int n = 0; n < N; ++n) {
            const double r = g.tx_rx.r(m, n);
            const double amp = lam * std::sqrt(gain_t(g.tx_rx.theta(m, n)) * gain_r(g.rx_tx.theta(n, m))) /
                               (4.0 * kPi * std::pow(r, half_kappa));
            const cd nlos = detail::standard_cn(rng);
            ch.H_tr(m, n) = amp * (w.los * detail::los_phase(r, lam) + w.nlos * nlos);
        }
    }
    for (int l = 0; l < L; ++l) {
        const double r = g.ios_dest.r(l, 0);
        const double amp = lam / (4.0 * kPi * std::pow(r, half_kappa));
        const cd nlos = detail::standard_cn(rng);
        ch.h_id(l) = amp * (w.los * detail::los_phase(r, lam) + w.nlos * nlos);
    }
    return ch;
}

/// Imperfect-CSI model: mixes the nominal H_tr and h_id with an independent
/// draw of the same statistics, weighted by sqrt(eta) and sqrt(1 - eta).
inline ChannelSet corrupt_csi(const ChannelSet& ch, const Geometry& g, const SystemConfig& cfg, double eta,
                              std::uint64_t seed)
{
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("corrupt_csi: eta must lie in [0, 1]");
    if (eta == 1.0) return ch;
    const ChannelSet delta = sample_channels(g, cfg, seed);
    ChannelSet out = ch;
    const double a = std::sqrt(eta), b = std::sqrt(1.0 - eta);
    out.h_id = a * ch.h_id + b * delta.h_id;
    out.H_tr = a * ch.H_tr + b * delta.H_tr;
    return out;
}

}  // namespace iosfd
