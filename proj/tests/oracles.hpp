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

// Test-only reference implementations. These deliberately avoid the library's fast paths.
#pragma once

#include "sblu/core.hpp"

namespace oracle {

using sblu::CMatrix;
using sblu::RVector;

/// Explicit (F^T kron W^H)(A_T^* kron A_R).
inline CMatrix phi_double_kron(const CMatrix& w, const CMatrix& f, const CMatrix& a_rx, const CMatrix& a_tx)
{
    auto kron = [](const CMatrix& a, const CMatrix& b) {
        CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = 0; j < a.cols(); ++j)
                for (Eigen::Index r = 0; r < b.rows(); ++r)
                    for (Eigen::Index c = 0; c < b.cols(); ++c)
                        out(i * b.rows() + r, j * b.cols() + c) = a(i, j) * b(r, c);
        return out;
    };
    return kron(f.transpose(), w.adjoint()) * kron(a_tx.conjugate(), a_rx);
}

/// Posterior mean and covariance diagonal from the full G^2 x G^2 posterior covariance.
struct Posterior {
    CMatrix mu;
    RVector omega;
};

inline Posterior dense_posterior(const RVector& gamma, const CMatrix& phi, const CMatrix& noise_cov, const CMatrix& y)
{
    const CMatrix rx = gamma.cast<sblu::cplx>().asDiagonal();
    const CMatrix inner = (phi * rx * phi.adjoint() + noise_cov).inverse();
    const CMatrix omega_full = rx - rx * phi.adjoint() * inner * phi * rx;
    return {rx * phi.adjoint() * inner * y, omega_full.diagonal().real()};
}

} // namespace oracle
