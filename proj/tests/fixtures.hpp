#pragma once

#include "iosfd/channel_model.hpp"
#include "iosfd/config.hpp"
#include "iosfd/ios_surface.hpp"

#include <random>

namespace fixtures {

inline iosfd::SystemConfig config(int M, int N, int L)
{
    iosfd::SystemConfig c;
    c.M = M;
    c.N = N;
    c.L = L;
    return c;
}

inline iosfd::ChannelSet channels(const iosfd::SystemConfig& c, std::uint64_t seed)
{
    return iosfd::sample_channels(iosfd::build_geometry(c), c, seed);
}

inline iosfd::CVec random_cvec(std::mt19937_64& rng, int n)
{
    std::normal_distribution<double> nd;
    iosfd::CVec v(n);
    for (int i = 0; i < n; ++i) v(i) = iosfd::cd(nd(rng), nd(rng));
    return v;
}

inline iosfd::RVec random_phases(std::mt19937_64& rng, int n)
{
    std::uniform_real_distribution<double> u(0.0, iosfd::kTwoPi);
    iosfd::RVec p(n);
    for (int i = 0; i < n; ++i) p(i) = u(rng);
    return p;
}

inline iosfd::ESCoefficients uniform_es(int L, double amp = 1.0 / std::sqrt(2.0))
{
    return {iosfd::RVec::Constant(L, amp), iosfd::RVec::Zero(L), iosfd::RVec::Constant(L, amp), iosfd::RVec::Zero(L)};
}

}  // namespace fixtures
