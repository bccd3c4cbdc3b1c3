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

#include "iosfd/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>

namespace iosfd {

/// Physical and array parameters of one full-duplex link. All quantities are
/// stored in SI units (meters, watts, linear ratios); dBm only appears at the
/// JSON boundary.
struct SystemConfig {
    int M = 4;  ///< transmit antennas
    int N = 1;  ///< receive antennas
    int L = 16; ///< surface elements

    double wavelength = 0.05;
    double spacing = 0.025;
    double rician_K = db_to_linear(3.0);
    double pathloss_exp = 2.5;
    double sigma_d2 = dbm_to_watt(-80.0);
    double sigma_r2 = dbm_to_watt(-80.0);
    double P_max = 1.0;

    double gain_exponent_tx = 0.0;
    double gain_exponent_rx = 0.0;
    double gain_peak = 1.0;

    Point3 tx_anchor{0.0, 0.0, 5.0};
    Point3 rx_anchor{0.0, 0.1, 5.0};
    Point3 ios_anchor{0.5, 0.0, 5.0};
    Point3 dest{20.0, -10.0, 1.5};

    std::uint64_t rng_seed = 1;

    void validate() const
    {
        auto fail = [](const std::string& what) { throw std::invalid_argument("SystemConfig: " + what); };
        if (M < 1) fail("M must be >= 1");
        if (N < 1) fail("N must be >= 1");
        if (L < 1) fail("L must be >= 1");
        if (!(wavelength > 0.0)) fail("wavelength must be > 0");
        if (!(spacing > 0.0)) fail("spacing must be > 0");
        if (!(rician_K >= 0.0)) fail("rician_K must be >= 0");
        if (!(pathloss_exp >= 2.0)) fail("pathloss_exp must be >= 2");
        if (!(sigma_d2 > 0.0)) fail("sigma_d2 must be > 0");
        if (!(sigma_r2 > 0.0)) fail("sigma_r2 must be > 0");
        if (!(P_max > 0.0)) fail("P_max must be > 0");
        if (!(gain_peak > 0.0)) fail("gain_peak must be > 0");
        if (gain_exponent_tx < 0.0 || gain_exponent_rx < 0.0) fail("gain exponents must be >= 0");
    }
};

namespace detail {

inline Point3 point_from_json(const nlohmann::json& j, const std::string& field)
{
    if (!j.is_array() || j.size() != 3)
        throw std::invalid_argument("field '" + field + "': expected an array of 3 numbers");
    Point3 p{};
    for (std::size_t i = 0; i < 3; ++i) {
        if (!j[i].is_number()) throw std::invalid_argument("field '" + field + "': expected numbers");
        p[i] = j[i].get<double>();
    }
    return p;
}

inline double number_field(const nlohmann::json& j, const std::string& field)
{
    if (!j.is_number()) throw std::invalid_argument("field '" + field + "': expected a number");
    return j.get<double>();
}

inline int int_field(const nlohmann::json& j, const std::string& field)
{
    if (!j.is_number_integer()) throw std::invalid_argument("field '" + field + "': expected an integer");
    return j.get<int>();
}

}  // namespace detail

/// JSON schema (all keys optional, unknown keys rejected):
///   M, N, L                       integers
///   wavelength_m, spacing_m       meters (spacing defaults to wavelength/2)
///   rician_K_dB, pathloss_exp
///   noise_dest_dBm, noise_rx_dBm, P_max_dBm
///   gain_exponent_tx, gain_exponent_rx, gain_peak
///   tx_anchor, rx_anchor, ios_anchor, dest   [x, y, z] meters
///   seed                          unsigned integer
inline SystemConfig system_config_from_json(const nlohmann::json& j)
{
    static const std::set<std::string> known{
        "M", "N", "L", "wavelength_m", "spacing_m", "rician_K_dB", "pathloss_exp", "noise_dest_dBm",
        "noise_rx_dBm", "P_max_dBm", "gain_exponent_tx", "gain_exponent_rx", "gain_peak", "tx_anchor",
        "rx_anchor", "ios_anchor", "dest", "seed"};
    if (!j.is_object()) throw std::invalid_argument("system config: expected a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw std::invalid_argument("system config: unknown field '" + key + "'");

    SystemConfig c;
    using detail::number_field;
    if (j.contains("M")) c.M = detail::int_field(j["M"], "M");
    if (j.contains("N")) c.N = detail::int_field(j["N"], "N");
    if (j.contains("L")) c.L = detail::int_field(j["L"], "L");
    if (j.contains("wavelength_m")) c.wavelength = number_field(j["wavelength_m"], "wavelength_m");
    c.spacing = j.contains("spacing_m") ? number_field(j["spacing_m"], "spacing_m") : c.wavelength / 2.0;
    if (j.contains("rician_K_dB")) c.rician_K = db_to_linear(number_field(j["rician_K_dB"], "rician_K_dB"));
    if (j.contains("pathloss_exp")) c.pathloss_exp = number_field(j["pathloss_exp"], "pathloss_exp");
    if (j.contains("noise_dest_dBm")) c.sigma_d2 = dbm_to_watt(number_field(j["noise_dest_dBm"], "noise_dest_dBm"));
    if (j.contains("noise_rx_dBm")) c.sigma_r2 = dbm_to_watt(number_field(j["noise_rx_dBm"], "noise_rx_dBm"));
    if (j.contains("P_max_dBm")) c.P_max = dbm_to_watt(number_field(j["P_max_dBm"], "P_max_dBm"));
    if (j.contains("gain_exponent_tx")) c.gain_exponent_tx = number_field(j["gain_exponent_tx"], "gain_exponent_tx");
    if (j.contains("gain_exponent_rx")) c.gain_exponent_rx = number_field(j["gain_exponent_rx"], "gain_exponent_rx");
    if (j.contains("gain_peak")) c.gain_peak = number_field(j["gain_peak"], "gain_peak");
    if (j.contains("tx_anchor")) c.tx_anchor = detail::point_from_json(j["tx_anchor"], "tx_anchor");
    if (j.contains("rx_anchor")) c.rx_anchor = detail::point_from_json(j["rx_anchor"], "rx_anchor");
    if (j.contains("ios_anchor")) c.ios_anchor = detail::point_from_json(j["ios_anchor"], "ios_anchor");
    if (j.contains("dest")) c.dest = detail::point_from_json(j["dest"], "dest");
    if (j.contains("seed")) {
        if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer())
            throw std::invalid_argument("field 'seed': expected an unsigned integer");
        c.rng_seed = j["seed"].get<std::uint64_t>();
    }
    c.validate();
    return c;
}

inline nlohmann::json to_json(const SystemConfig& c)
{
    return {
        {"M", c.M},
        {"N", c.N},
        {"L", c.L},
        {"wavelength_m", c.wavelength},
        {"spacing_m", c.spacing},
        {"rician_K_dB", 10.0 * std::log10(c.rician_K)},
        {"pathloss_exp", c.pathloss_exp},
        {"noise_dest_dBm", watt_to_dbm(c.sigma_d2)},
        {"noise_rx_dBm", watt_to_dbm(c.sigma_r2)},
        {"P_max_dBm", watt_to_dbm(c.P_max)},
        {"gain_exponent_tx", c.gain_exponent_tx},
        {"gain_exponent_rx", c.gain_exponent_rx},
        {"gain_peak", c.gain_peak},
        {"tx_anchor", c.tx_anchor},
        {"rx_anchor", c.rx_anchor},
        {"ios_anchor", c.ios_anchor},
        {"dest", c.dest},
        {"seed", c.rng_seed},
    };
}

}  // namespace iosfd
