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
// Draws one channel realization and compares the three surface types on
// rate maximization at a fixed SI budget.
#include "iosfd/iosfd.hpp"

#include <cstdio>
#include <cstdlib>

int main(int argc, char** argv)
{
    using namespace iosfd;
    const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;

    SystemConfig sys;
    sys.M = 4;
    sys.N = 1;
    sys.L = 32;
    const auto ch = sample_channels(build_geometry(sys), sys, seed);

    std::printf("%-3s %10s %12s %6s  %s\n", "IOS", "rate", "SI [dBm]", "iters", "status");
    for (auto s : {SurfaceMode::ES, SurfaceMode::MS, SurfaceMode::WO}) {
        OptConfig opt;
        opt.surface = s;
        opt.P_th = dbm_to_watt(-30.0);
        opt.seed = seed;
        const auto r = maximize_rate(opt, sys, ch);
        std::printf("%-3s %10.4f %12.2f %6d  %s\n", to_string(s), r.rate, watt_to_dbm(r.si), r.iters, to_string(r.status));
    }
}
