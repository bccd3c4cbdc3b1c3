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

#include <string>

namespace iosfd::conic {

enum class ConicStatus { optimal, infeasible, max_iters, numerical_failure };

inline const char* to_string(ConicStatus s)
{
    switch (s) {
        case ConicStatus::optimal: return "optimal";
        case ConicStatus::infeasible: return "infeasible";
        case ConicStatus::max_iters: return "max_iters";
        case ConicStatus::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

struct ConicOptions {
    double feas_tol = 1e-7;
    double gap_tol = 1e-7;
    double rel_gap_tol = 0.0;  ///< also stop once gap <= rel_gap_tol * |objective|
    int max_iters = 200;
};

struct ConicSolution {
    ConicStatus status = ConicStatus::numerical_failure;
    RVec x;              ///< primal point of a QCQP
    RMat X;              ///< primal matrix of an SDP
    double objective = 0.0;
    double max_violation = 0.0;
    int iterations = 0;
    std::string diagnostics;

    bool ok() const { return status == ConicStatus::optimal; }
};

}  // namespace iosfd::conic
