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

namespace iosfd::conic {

// Complex vectors z in C^n are handled as [Re z; Im z] in R^{2n}. Every
// subproblem goes through these four maps.

inline RVec stack(const CVec& z)
{
    RVec x(2 * z.size());
    x << z.real(), z.imag();
    return x;
}

inline CVec unstack(const RVec& x)
{
    const auto n = x.size() / 2;
    CVec z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = cd(x(i), x(n + i));
    return z;
}

/// Real symmetric matrix with z^H A z = stack(z)^T result * stack(z) for Hermitian A.
inline RMat embed_hermitian(const CMat& A)
{
    const auto n = A.rows();
    RMat R(2 * n, 2 * n);
    R.topLeftCorner(n, n) = A.real();
    R.topRightCorner(n, n) = -A.imag();
    R.bottomLeftCorner(n, n) = A.imag();
    R.bottomRightCorner(n, n) = A.real();
    return 0.5 * (R + R.transpose());
}

/// Coefficients of Re{g^H z} as a linear functional of stack(z).
inline RVec embed_linear(const CVec& g) { return stack(g); }

/// Coefficients of Re{z^T c} as a linear functional of stack(z).
inline RVec embed_linear_transpose(const CVec& c)
{
    RVec x(2 * c.size());
    x << c.real(), -c.imag();
    return x;
}

}  // namespace iosfd::conic
