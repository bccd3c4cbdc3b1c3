#include "iosfd/channel_model.hpp"
#include "iosfd/ios_surface.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace iosfd;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ChannelSet test_channels(int M, int N, int L, std::uint64_t seed)
{
    SystemConfig c;
    c.M = M;
    c.N = N;
    c.L = L;
    return sample_channels(build_geometry(c), c, seed);
}

ESCoefficients random_es(std::mt19937_64& rng, int L)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ESCoefficients c;
    c.a.resize(L);
    c.b.resize(L);
    c.alpha.resize(L);
    c.beta.resize(L);
    for (int l = 0; l < L; ++l) {
        const double t = u(rng) * kPi / 2;
        const double rho = u(rng);
        c.a(l) = rho * std::cos(t);
        c.b(l) = rho * std::sin(t);
        c.alpha(l) = kTwoPi * u(rng);
        c.beta(l) = kTwoPi * u(rng);
    }
    return c;
}

CVec random_w(std::mt19937_64& rng, int M)
{
    std::normal_distribution<double> nd;
    CVec w(M);
    for (int m = 0; m < M; ++m) w(m) = cd(nd(rng), nd(rng));
    return w;
}

}  // namespace

TEST_CASE("ES coefficient validation")
{
    ESCoefficients c{RVec::Constant(2, 0.8), RVec::Zero(2), RVec::Constant(2, 0.6), RVec::Zero(2)};
    CHECK_NOTHROW(c.validate());
    c.b(1) = 0.61;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c.b(1) = 0.6 + 1e-12;
    CHECK_NOTHROW(c.validate());
    c.a(0) = -0.1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("MS coefficient validation")
{
    MSCoefficients c{Eigen::VectorXi::Zero(3), RVec::Zero(3), RVec::Zero(3)};
    CHECK_NOTHROW(c.validate());
    c.mode(1) = 2;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("effective channels: zero amplitudes and all-reflect MS")
{
    const auto ch = test_channels(3, 2, 4, 1);
    ESCoefficients z{RVec::Zero(4), RVec::Zero(4), RVec::Zero(4), RVec::Zero(4)};
    const auto e = effective_channels(ch, z);
    CHECK(e.h_d.norm() == 0.0);
    CHECK((e.H_r - ch.H_tr.adjoint()).norm() == 0.0);

    MSCoefficients ms{Eigen::VectorXi::Ones(4), RVec::Constant(4, 1.0), RVec::Constant(4, 2.0)};
    CHECK(effective_channels(ch, ms).h_d.norm() == 0.0);
}

TEST_CASE("effective channels: entrywise expansion oracle")
{
    std::mt19937_64 rng(3);
    const auto ch = test_channels(4, 1, 9, 2);
    const auto c = random_es(rng, 9);
    const auto e = effective_channels(ch, c);
    for (int m = 0; m < 4; ++m) {
        cd hd = 0.0;
        for (int l = 0; l < 9; ++l) hd += std::conj(ch.h_id(l)) * std::polar(c.b(l), c.beta(l)) * ch.H_ti(l, m);
        CHECK(std::abs(e.h_d(m) - hd) <= 1e-12 * std::abs(hd));
    }
}

TEST_CASE("effective channels: refraction scaling is linear")
{
    std::mt19937_64 rng(4);
    const auto ch = test_channels(4, 1, 4, 2);
    auto c = random_es(rng, 4);
    const auto e1 = effective_channels(ch, c);
    c.b *= 0.5;
    const auto e2 = effective_channels(ch, c);
    CHECK((e2.h_d - 0.5 * e1.h_d).norm() <= 1e-14 * e1.h_d.norm());
}

TEST_CASE("MS single-element flip identity")
{
    const auto ch = test_channels(3, 2, 6, 5);
    MSCoefficients ms{Eigen::VectorXi::Zero(6), RVec::LinSpaced(6, 0.1, 2.0), RVec::LinSpaced(6, 3.0, 5.0)};
    ms.mode(0) = 1;
    ms.mode(3) = 1;
    const auto before = effective_channels(ch, ms);
    const int l = 2;
    ms.mode(l) = 1;
    const auto after = effective_channels(ch, ms);
    const CRow refr_term = std::conj(ch.h_id(l)) * std::polar(1.0, ms.beta(l)) * ch.H_ti.row(l);
    const CMat refl_term = ch.H_ir.row(l).adjoint() * std::polar(1.0, ms.alpha(l)) * ch.H_ti.row(l);
    CHECK((before.h_d - after.h_d - refr_term).norm() <= 1e-14 * before.h_d.norm());
    CHECK((after.H_r - before.H_r - refl_term).norm() <= 1e-14 * before.H_r.norm());
}

TEST_CASE("data rate evaluation")
{
    EffectiveChannels e;
    e.h_d = CRow::Zero(2);
    e.h_d(0) = 1.0;
    e.H_r = CMat::Identity(2, 2);
    const double s2 = 1e-11;
    CHECK(data_rate(e, CVec::Zero(2), s2) == 0.0);
    CVec w = CVec::Zero(2);
    w(0) = std::sqrt(s2);
    CHECK_THAT(data_rate(e, w, s2), WithinAbs(1.0, 1e-12));
    w(0) = std::sqrt(3 * s2);
    CHECK_THAT(data_rate(e, w, s2), WithinAbs(2.0, 1e-12));
    double prev = 0.0;
    for (double g = 0.0; g < 10.0; g += 0.5) {
        w(0) = std::sqrt(g * s2);
        const double r = data_rate(e, w, s2);
        CHECK(r >= prev);
        prev = r;
    }
}

TEST_CASE("SI power: identity and rank-one Frobenius form")
{
    EffectiveChannels e;
    e.h_d = CRow::Zero(3);
    e.H_r = CMat::Identity(3, 3);
    CHECK(si_power(e, CVec::Zero(3)) == 0.0);
    CHECK_THAT(si_power(e, CVec::Unit(3, 1)), WithinAbs(1.0, 1e-15));

    std::mt19937_64 rng(8);
    const auto ch = test_channels(4, 3, 16, 9);
    for (int rep = 0; rep < 100; ++rep) {
        const auto eff = effective_channels(ch, random_es(rng, 16));
        const CVec w = random_w(rng, 4);
        const double a = si_power(eff, w), b = si_power_frobenius(eff, w);
        CHECK(std::abs(a - b) <= 1e-12 * a);
    }
}

TEST_CASE("phase quantization")
{
    CHECK_THAT(quantize_phase(0.9 * kPi, 1), WithinAbs(kPi, 1e-12));
    CHECK_THAT(quantize_phase(0.2, 4), WithinAbs(kTwoPi / 16, 1e-12));
    CHECK_THAT(quantize_phase(kTwoPi / 16 * 5, 4), WithinAbs(kTwoPi / 16 * 5, 1e-12));
    CHECK(quantize_phase(kTwoPi - 1e-3, 3) == 0.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, kTwoPi);
    for (int bits = 1; bits <= 6; ++bits)
        for (int rep = 0; rep < 200; ++rep) {
            const double p = u(rng);
            double d = std::abs(quantize_phase(p, bits) - p);
            d = std::min(d, kTwoPi - d);
            CHECK(d <= kPi / std::ldexp(1.0, bits) + 1e-12);
        }

    MSCoefficients ms{Eigen::VectorXi::Ones(2), RVec::Constant(2, 0.2), RVec::Constant(2, 0.9 * kPi)};
    const auto q = quantize_phases(ms, 1);
    CHECK(q.mode == ms.mode);
    CHECK_THAT(q.beta(0), WithinAbs(kPi, 1e-12));
}

TEST_CASE("coefficient JSON round trip")
{
    std::mt19937_64 rng(2);
    const auto es = random_es(rng, 5);
    const auto back = std::get<ESCoefficients>(surface_from_json(to_json(es)));
    CHECK((back.a - es.a).norm() == 0.0);
    CHECK((back.beta - es.beta).norm() < 1e-15);
    MSCoefficients ms{Eigen::VectorXi::Zero(3), RVec::Constant(3, 1.0), RVec::Constant(3, 2.0)};
    ms.mode(2) = 1;
    const auto ms2 = std::get<MSCoefficients>(surface_from_json(to_json(ms)));
    CHECK(ms2.mode == ms.mode);
    CHECK_THROWS_AS(surface_from_json(nlohmann::json::parse(R"({"type":"XX"})")), std::invalid_argument);
}
