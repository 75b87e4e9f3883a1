// SPDX-License-Identifier: Apache-2.0
//
// sblu: sparse Bayesian learning and its deep-unfolded variants for wideband
// hybrid mmWave massive MIMO channel estimation.
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

#include <Eigen/Dense>

#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace sblu {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0; // m/s, SI exact

/// Shapes of two operands do not agree.
struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A configuration value violates its documented invariant.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// A linear system that must be solved is singular.
struct DegenerateSystemError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require_dims(bool ok, const std::string& what)
{
    if (!ok)
        throw DimensionError(what);
}

/// Stack of K per-subcarrier matrices, element k holding the (rows x cols) matrix of subcarrier k+1.
using MatrixStack = std::vector<CMatrix>;

inline double frobenius_sq(const MatrixStack& s)
{
    double acc = 0.0;
    for (const auto& m : s)
        acc += m.squaredNorm();
    return acc;
}

} // namespace sblu
