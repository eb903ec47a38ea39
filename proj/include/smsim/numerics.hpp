// SPDX-License-Identifier: Apache-2.0
//
// Complex linear-algebra kernels shared by the channel model and the detectors.

#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace smsim {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;

// A pivot is treated as zero when |pivot| <= kRankTolerance * |largest pivot|.
inline constexpr double kRankTolerance = 1e-10;
// Maximum |R - R^*| entry (relative to max(1, max|R|)) accepted as Hermitian.
inline constexpr double kHermitianTolerance = 1e-12;

/// Thrown by ls_solve when the system matrix does not have full column rank.
class RankDeficientError : public std::runtime_error {
public:
    RankDeficientError(std::size_t rank, std::size_t cols);

    std::size_t rank() const noexcept { return rank_; }
    std::size_t cols() const noexcept { return cols_; }

private:
    std::size_t rank_;
    std::size_t cols_;
};

bool all_finite(const CMatrix& m);

/// Least-squares solution of min ||b - A x||_2 via column-pivoted Householder QR.
///
/// Requires rows >= cols and full column rank; throws RankDeficientError otherwise
/// and std::invalid_argument on shape mismatch or non-finite input. An empty A
/// (zero columns) yields an empty solution.
CVector ls_solve(const CMatrix& a, const CVector& b);

/// Numerical rank of A under kRankTolerance.
std::size_t numerical_rank(const CMatrix& a);

/// Hermitian PSD square root S (S = S^*, S S^* = R) via eigendecomposition.
/// Eigenvalues down to -1e-12 are clamped to zero; non-Hermitian input is rejected.
CMatrix hermitian_sqrt(const CMatrix& r);

}  // namespace smsim
