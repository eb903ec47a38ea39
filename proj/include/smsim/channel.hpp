// SPDX-License-Identifier: Apache-2.0
//
// Kronecker-correlated multipath Rayleigh channel, BS receive-antenna
// selection, and the post-CP-removal CPSC block model
//
//     y_q = sum_{p=0}^{P-1} H_p x_{mod(q - p, Q)} + w_q,   q = 1..Q,
//
// where H_p = [H_{1,p} ... H_{K,p}] holds the selected BS rows of every user's
// p-th tap. Stacking the Q slots gives y = H x + w with H block circulant.

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smsim/modem.hpp"
#include "smsim/numerics.hpp"
#include "smsim/rng.hpp"

namespace smsim {

/// mod(x, y) with the result wrapped into [1, y] (a zero remainder maps to y).
long long cyclic_index(long long x, long long y);

/// Exponential correlation matrix, element (m, n) = rho^|m - n|, 0 <= rho < 1.
RMatrix exp_correlation_matrix(int n, double rho);

struct CorrelationSpec {
    double rho_bs = 0.0;
    double rho_us = 0.0;
};

/// Per-user, per-tap M x n_t gain matrices H_{k,p}.
struct MultipathChannel {
    int K = 0;
    int M = 0;
    int n_t = 0;
    int P = 0;
    std::vector<CMatrix> taps;  // index k * P + p

    const CMatrix& tap(int k, int p) const { return taps.at(static_cast<std::size_t>(k * P + p)); }
};

/// Draws channels H_{k,p} = P^{-1/2} R_BS^{1/2} G R_US^{1/2} with G i.i.d. CN(0, 1).
/// The correlation square roots are computed once at construction.
class ChannelGenerator {
public:
    ChannelGenerator(int K, int M, int n_t, int P, CorrelationSpec spec);

    MultipathChannel operator()(Rng& rng) const;

private:
    int K_, M_, n_t_, P_;
    CMatrix sqrt_bs_;
    CMatrix sqrt_us_;
};

MultipathChannel generate_channel(int K, int M, int n_t, int P, CorrelationSpec spec, Rng& rng);

enum class AeScheme { Direct, Continuous, Random };

AeScheme parse_ae_scheme(std::string_view name);
std::string to_string(AeScheme scheme);

struct AESelection {
    std::vector<int> theta;  // ascending, 1-based BS antenna indices
    AeScheme scheme = AeScheme::Direct;
    int phi = 1;
};

/// direct: {phi + m floor(M / M_RF)}, 1 <= phi <= floor(M / M_RF) - 1
/// continuous: {phi, ..., phi + M_RF - 1}, 1 <= phi <= M - M_RF + 1
/// random: M_RF distinct uniform draws from [1, M] (phi ignored, rng consumed)
AESelection select_aes(int M, int M_RF, AeScheme scheme, int phi, Rng& rng);

/// One CPSC block's effective channel: P matrices H_p of size M_RF x (n_t K).
///
/// Aggregate (column) index of antenna a (0-based) of user k in slot q is
/// (q K + k) n_t + a; received (row) index of RF chain m in slot q is q M_RF + m.
class EffectiveChannel {
public:
    EffectiveChannel(std::vector<CMatrix> taps, int K, int n_t, int Q);

    static EffectiveChannel from(const MultipathChannel& channel, const AESelection& selection, int Q);

    int K() const noexcept { return K_; }
    int n_t() const noexcept { return n_t_; }
    int Q() const noexcept { return Q_; }
    int P() const noexcept { return static_cast<int>(taps_.size()); }
    int m_rf() const noexcept { return m_rf_; }
    Eigen::Index rows() const noexcept { return static_cast<Eigen::Index>(m_rf_) * Q_; }
    Eigen::Index cols() const noexcept { return static_cast<Eigen::Index>(K_) * n_t_ * Q_; }
    const CMatrix& tap(int p) const { return taps_.at(static_cast<std::size_t>(p)); }

    /// H x by circular convolution over the slot index; zero entries of x are skipped.
    CVector apply(const CVector& x) const;
    /// H^* r.
    CVector adjoint(const CVector& r) const;
    CVector column(Eigen::Index c) const;
    CMatrix columns(std::span<const int> cols) const;
    /// Materialized block-circulant matrix.
    CMatrix dense() const;

private:
    std::vector<CMatrix> taps_;
    int K_, n_t_, Q_, m_rf_;
};

/// y = H x + w with w ~ CN(0, noise_variance I). No noise is drawn when the
/// variance is zero.
CVector apply_cpsc_channel(const EffectiveChannel& channel, const CVector& x, double noise_variance, Rng& rng);
CVector apply_cpsc_channel(const EffectiveChannel& channel, const GroupFrame& frame, int j,
                           const SignalConstellation& constellation, double noise_variance, Rng& rng);

/// Noise variance per complex sample giving the requested receive SNR for K
/// unit-power users over unit-power links: K / 10^(snr_db / 10).
double calibrate_noise(double snr_db, int K);

}  // namespace smsim
