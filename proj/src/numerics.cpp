// SPDX-License-Identifier: Apache-2.0

#include "smsim/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace smsim {

namespace {

constexpr double kNegativeEigenvalueFloor = -1e-12;

Eigen::ColPivHouseholderQR<CMatrix> pivoted_qr(const CMatrix& a)
{
    Eigen::ColPivHouseholderQR<CMatrix> qr(a.rows(), a.cols());
    qr.setThreshold(kRankTolerance);
    qr.compute(a);
    return qr;
}

}  // namespace

RankDeficientError::RankDeficientError(std::size_t rank, std::size_t cols)
    : std::runtime_error("rank-deficient least-squares system: rank " + std::to_string(rank) +
                         " < " + std::to_string(cols) + " columns"),
      rank_(rank),
      cols_(cols)
{
}

bool all_finite(const CMatrix& m)
{
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        const cplx v = m.data()[i];
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    }
    return true;
}

CVector ls_solve(const CMatrix& a, const CVector& b)
{
    if (a.rows() != b.size())
        throw std::invalid_argument("ls_solve: A has " + std::to_string(a.rows()) + " rows but b has " +
                                    std::to_string(b.size()) + " entries");
    if (!all_finite(a) || !all_finite(b)) throw std::invalid_argument("ls_solve: non-finite input");
    if (a.cols() == 0) return CVector(0);
    if (a.rows() < a.cols())
        throw RankDeficientError(static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(a.cols()));

    const auto qr = pivoted_qr(a);
    const auto rank = static_cast<std::size_t>(qr.rank());
    if (rank < static_cast<std::size_t>(a.cols())) throw RankDeficientError(rank, static_cast<std::size_t>(a.cols()));
    return qr.solve(b);
}

std::size_t numerical_rank(const CMatrix& a)
{
    if (a.size() == 0) return 0;
    return static_cast<std::size_t>(pivoted_qr(a).rank());
}

CMatrix hermitian_sqrt(const CMatrix& r)
{
    if (r.rows() != r.cols()) throw std::invalid_argument("hermitian_sqrt: matrix must be square");
    if (!all_finite(r)) throw std::invalid_argument("hermitian_sqrt: non-finite input");
    if (r.size() == 0) return r;

    const double scale = std::max(1.0, r.cwiseAbs().maxCoeff());
    const double asym = (r - r.adjoint()).cwiseAbs().maxCoeff();
    if (asym > kHermitianTolerance * scale)
        throw std::invalid_argument("hermitian_sqrt: input is not Hermitian (max |R - R^*| = " +
                                    std::to_string(asym) + ")");

    // Symmetrize so the solver sees an exactly Hermitian matrix.
    const CMatrix h = 0.5 * (r + r.adjoint());
    Eigen::SelfAdjointEigenSolver<CMatrix> eig(h);
    if (eig.info() != Eigen::Success) throw std::runtime_error("hermitian_sqrt: eigendecomposition failed");

    Eigen::VectorXd lambda = eig.eigenvalues();
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        if (lambda[i] < kNegativeEigenvalueFloor * scale)
            throw std::invalid_argument("hermitian_sqrt: input is not positive semidefinite");
        lambda[i] = std::sqrt(std::max(0.0, lambda[i]));
    }
    const CMatrix& v = eig.eigenvectors();
    CMatrix s = v * lambda.asDiagonal() * v.adjoint();
    return 0.5 * (s + s.adjoint());
}

}  // namespace smsim
