// SPDX-License-Identifier: Apache-2.0
//
// Multi-user SM detectors. All detectors return a DetectionResult with one
// SmSymbol per (block, slot, user) and one active-antenna decision per
// (user, slot). Every argmax breaks ties toward the lowest index.

#pragma once

#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "smsim/channel.hpp"
#include "smsim/modem.hpp"
#include "smsim/numerics.hpp"

namespace smsim {

/// One active antenna per (k, q) segment. Segment s = q K + k; the global
/// (0-based) aggregate column is s n_t + antenna - 1.
class SupportSet {
public:
    SupportSet() = default;
    SupportSet(int K, int Q, int n_t, std::vector<int> antennas);

    static SupportSet from_columns(int K, int Q, int n_t, std::span<const int> columns);
    static SupportSet of(const GroupFrame& frame);

    int K() const noexcept { return K_; }
    int Q() const noexcept { return Q_; }
    int n_t() const noexcept { return n_t_; }
    int size() const noexcept { return static_cast<int>(antennas_.size()); }
    int antenna(int segment) const { return antennas_.at(static_cast<std::size_t>(segment)); }
    int column(int segment) const { return segment * n_t_ + antenna(segment) - 1; }
    std::vector<int> columns() const;
    const std::vector<int>& antennas() const noexcept { return antennas_; }

    friend bool operator==(const SupportSet&, const SupportSet&) = default;

private:
    int K_ = 0, Q_ = 0, n_t_ = 0;
    std::vector<int> antennas_;
};

struct DetectionDiagnostics {
    int iterations = 0;
    std::vector<double> residual_norms;                    // final, per block
    std::vector<std::vector<double>> residual_trajectory;  // per iteration, per block
    bool degenerate_support = false;  // a least-squares solve hit rank deficiency
    bool restricted_union = false;    // union support trimmed to fit the row count
};

struct DetectionResult {
    FrameDims dims;
    std::vector<SmSymbol> symbols;  // index (j Q + q) K + k, as in GroupFrame
    SupportSet support;
    DetectionDiagnostics diagnostics;

    const SmSymbol& at(int j, int q, int k) const
    {
        return symbols.at(static_cast<std::size_t>((j * dims.Q + q) * dims.K + k));
    }
};

/// Working state of group subspace pursuit, exposed to observers after every
/// iteration. Column sets are sorted ascending.
struct GspState {
    int t = 1;                              // iteration index after the update
    std::vector<int> gamma;                 // preliminary support, one column per segment
    std::vector<int> omega_prev;            // support of the previous iteration (empty at first)
    std::vector<int> omega;                 // final support of this iteration
    std::vector<int> union_support;         // columns used for the pruning least squares
    std::vector<CVector> correlation;       // a^(j) = H^(j)* r^(j), full length
    std::vector<CVector> union_estimate;    // b^(j) restricted to union_support
    std::vector<CVector> estimate;          // c^(j) restricted to omega
    std::vector<CVector> residual;          // r^(j)
};

using GspObserver = std::function<void(const GspState&)>;

/// Nearest constellation point; ties go to the lowest point index.
int quantize_symbol(cplx rough, const SignalConstellation& constellation);

/// Group subspace pursuit over J blocks that share one support, followed by
/// per-entry nearest-point quantization of the final least-squares estimates.
DetectionResult detect_gsp(std::span<const CVector> y, std::span<const EffectiveChannel> h,
                           const SignalConstellation& constellation, const GspObserver& observer = {});

/// Classical subspace pursuit with global top-s selection on one block,
/// followed by a per-segment mapping to SM decisions.
///
/// Iterates until the residual norm stops decreasing, at most `max_iterations`
/// refinements (default: the sparsity). With max_iterations = 0 the support is
/// the matched-filter top-s selection.
DetectionResult detect_sp_classical(const CVector& y, const EffectiveChannel& h, int sparsity,
                                    const SignalConstellation& constellation);
DetectionResult detect_sp_classical(const CVector& y, const EffectiveChannel& h, int sparsity,
                                    const SignalConstellation& constellation, int max_iterations);

/// Linear MMSE x = H^* (H H^* + sigma^2 I)^{-1} y, then per-segment argmax and quantization.
DetectionResult detect_mmse(const CVector& y, const EffectiveChannel& h, double noise_variance,
                            const SignalConstellation& constellation);

/// Thrown when the exhaustive ML search set exceeds kMlSearchLimit.
class SearchSpaceTooLarge : public std::invalid_argument {
public:
    explicit SearchSpaceTooLarge(double size);
    double size() const noexcept { return size_; }

private:
    double size_;
};

inline constexpr double kMlSearchLimit = 1e6;

/// (n_t L)^{K Q}, the per-block ML search-set size.
double ml_search_size(int K, int Q, int n_t, int L);

/// Exhaustive ML over sum_j ||y^(j) - H^(j) x^(j)||^2 with spatial hypotheses
/// shared across blocks and signal points chosen per block.
DetectionResult detect_ml(std::span<const CVector> y, std::span<const EffectiveChannel> h,
                          const SignalConstellation& constellation);

/// Least squares on the known true support, then quantization.
/// Throws RankDeficientError if the support columns are dependent.
DetectionResult detect_oracle_ls(std::span<const CVector> y, std::span<const EffectiveChannel> h,
                                 const SupportSet& true_support, const SignalConstellation& constellation);

}  // namespace smsim
