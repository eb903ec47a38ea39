// SPDX-License-Identifier: Apache-2.0

#include "smsim/channel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace smsim {

long long cyclic_index(long long x, long long y)
{
    if (y <= 0) throw std::invalid_argument("cyclic_index: modulus must be positive");
    long long r = x % y;
    if (r < 0) r += y;
    return r == 0 ? y : r;
}

RMatrix exp_correlation_matrix(int n, double rho)
{
    if (n < 1) throw std::invalid_argument("exp_correlation_matrix: dimension must be positive");
    if (!(rho >= 0.0 && rho < 1.0))
        throw std::invalid_argument("exp_correlation_matrix: rho must lie in [0, 1), got " + std::to_string(rho));
    RMatrix r(n, n);
    for (int m = 0; m < n; ++m)
        for (int c = 0; c < n; ++c) r(m, c) = std::pow(rho, std::abs(m - c));
    return r;
}

ChannelGenerator::ChannelGenerator(int K, int M, int n_t, int P, CorrelationSpec spec)
    : K_(K), M_(M), n_t_(n_t), P_(P)
{
    if (K < 1 || M < 1 || n_t < 1 || P < 1) throw std::invalid_argument("ChannelGenerator: dimensions must be positive");
    sqrt_bs_ = hermitian_sqrt(exp_correlation_matrix(M, spec.rho_bs).cast<cplx>());
    sqrt_us_ = hermitian_sqrt(exp_correlation_matrix(n_t, spec.rho_us).cast<cplx>());
}

MultipathChannel ChannelGenerator::operator()(Rng& rng) const
{
    MultipathChannel ch{K_, M_, n_t_, P_, {}};
    ch.taps.reserve(static_cast<std::size_t>(K_) * P_);
    const double tap_scale = 1.0 / std::sqrt(static_cast<double>(P_));
    CMatrix g(M_, n_t_);
    for (int k = 0; k < K_; ++k)
        for (int p = 0; p < P_; ++p) {
            // Column-major fill keeps the draw order fixed for a given seed.
            for (Eigen::Index c = 0; c < g.cols(); ++c)
                for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = complex_normal(rng);
            ch.taps.push_back(tap_scale * (sqrt_bs_ * g * sqrt_us_));
        }
    return ch;
}

MultipathChannel generate_channel(int K, int M, int n_t, int P, CorrelationSpec spec, Rng& rng)
{
    return ChannelGenerator(K, M, n_t, P, spec)(rng);
}

AeScheme parse_ae_scheme(std::string_view name)
{
    if (name == "direct") return AeScheme::Direct;
    if (name == "continuous") return AeScheme::Continuous;
    if (name == "random") return AeScheme::Random;
    throw std::invalid_argument("unknown AE selection scheme '" + std::string(name) +
                                "' (expected direct, continuous or random)");
}

std::string to_string(AeScheme scheme)
{
    switch (scheme) {
    case AeScheme::Direct: return "direct";
    case AeScheme::Continuous: return "continuous";
    case AeScheme::Random: return "random";
    }
    return "unknown";
}

AESelection select_aes(int M, int M_RF, AeScheme scheme, int phi, Rng& rng)
{
    if (M < 1 || M_RF < 1 || M_RF > M)
        throw std::invalid_argument("select_aes: need 1 <= M_RF <= M (M=" + std::to_string(M) +
                                    ", M_RF=" + std::to_string(M_RF) + ")");
    AESelection sel;
    sel.scheme = scheme;
    sel.phi = phi;
    sel.theta.resize(static_cast<std::size_t>(M_RF));

    switch (scheme) {
    case AeScheme::Direct: {
        const int stride = M / M_RF;
        if (phi < 1 || phi > stride - 1)
            throw std::invalid_argument("select_aes: direct selection needs 1 <= phi <= floor(M/M_RF) - 1 = " +
                                        std::to_string(stride - 1) + ", got phi=" + std::to_string(phi));
        for (int m = 0; m < M_RF; ++m) sel.theta[static_cast<std::size_t>(m)] = phi + m * stride;
        break;
    }
    case AeScheme::Continuous:
        if (phi < 1 || phi > M - M_RF + 1)
            throw std::invalid_argument("select_aes: continuous selection needs 1 <= phi <= M - M_RF + 1 = " +
                                        std::to_string(M - M_RF + 1) + ", got phi=" + std::to_string(phi));
        std::iota(sel.theta.begin(), sel.theta.end(), phi);
        break;
    case AeScheme::Random: {
        // Partial Fisher-Yates over [1, M].
        std::vector<int> pool(static_cast<std::size_t>(M));
        std::iota(pool.begin(), pool.end(), 1);
        for (int i = 0; i < M_RF; ++i) {
            std::uniform_int_distribution<int> pick(i, M - 1);
            std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
        }
        std::copy_n(pool.begin(), M_RF, sel.theta.begin());
        std::sort(sel.theta.begin(), sel.theta.end());
        break;
    }
    }
    return sel;
}

EffectiveChannel::EffectiveChannel(std::vector<CMatrix> taps, int K, int n_t, int Q)
    : taps_(std::move(taps)), K_(K), n_t_(n_t), Q_(Q), m_rf_(0)
{
    if (K < 1 || n_t < 1 || Q < 1) throw std::invalid_argument("EffectiveChannel: K, n_t, Q must be positive");
    if (taps_.empty()) throw std::invalid_argument("EffectiveChannel: at least one tap required");
    m_rf_ = static_cast<int>(taps_.front().rows());
    for (const auto& t : taps_)
        if (t.rows() != m_rf_ || t.cols() != static_cast<Eigen::Index>(K) * n_t)
            throw std::invalid_argument("EffectiveChannel: every tap must be M_RF x (n_t K)");
}

EffectiveChannel EffectiveChannel::from(const MultipathChannel& channel, const AESelection& selection, int Q)
{
    const auto m_rf = static_cast<Eigen::Index>(selection.theta.size());
    for (const int row : selection.theta)
        if (row < 1 || row > channel.M) throw std::invalid_argument("EffectiveChannel::from: selection outside [1, M]");

    std::vector<CMatrix> taps;
    taps.reserve(static_cast<std::size_t>(channel.P));
    for (int p = 0; p < channel.P; ++p) {
        CMatrix h(m_rf, static_cast<Eigen::Index>(channel.K) * channel.n_t);
        for (int k = 0; k < channel.K; ++k) {
            const CMatrix& full = channel.tap(k, p);
            for (Eigen::Index m = 0; m < m_rf; ++m)
                h.block(m, static_cast<Eigen::Index>(k) * channel.n_t, 1, channel.n_t) =
                    full.row(selection.theta[static_cast<std::size_t>(m)] - 1);
        }
        taps.push_back(std::move(h));
    }
    return EffectiveChannel(std::move(taps), channel.K, channel.n_t, Q);
}

CVector EffectiveChannel::apply(const CVector& x) const
{
    if (x.size() != cols()) throw std::invalid_argument("EffectiveChannel::apply: dimension mismatch");
    const Eigen::Index seg = static_cast<Eigen::Index>(K_) * n_t_;
    CVector y = CVector::Zero(rows());
    for (int qs = 0; qs < Q_; ++qs) {
        for (Eigen::Index i = 0; i < seg; ++i) {
            const cplx v = x[qs * seg + i];
            if (v == cplx(0.0, 0.0)) continue;
            for (int p = 0; p < P(); ++p) {
                const auto qr = static_cast<Eigen::Index>((qs + p) % Q_);
                y.segment(qr * m_rf_, m_rf_) += taps_[static_cast<std::size_t>(p)].col(i) * v;
            }
        }
    }
    return y;
}

CVector EffectiveChannel::adjoint(const CVector& r) const
{
    if (r.size() != rows()) throw std::invalid_argument("EffectiveChannel::adjoint: dimension mismatch");
    const Eigen::Index seg = static_cast<Eigen::Index>(K_) * n_t_;
    CVector a = CVector::Zero(cols());
    for (int qs = 0; qs < Q_; ++qs)
        for (int p = 0; p < P(); ++p) {
            const auto qr = static_cast<Eigen::Index>((qs + p) % Q_);
            a.segment(qs * seg, seg).noalias() += taps_[static_cast<std::size_t>(p)].adjoint() * r.segment(qr * m_rf_, m_rf_);
        }
    return a;
}

CVector EffectiveChannel::column(Eigen::Index c) const
{
    if (c < 0 || c >= cols()) throw std::out_of_range("EffectiveChannel::column index out of range");
    const Eigen::Index seg = static_cast<Eigen::Index>(K_) * n_t_;
    const Eigen::Index qs = c / seg;
    const Eigen::Index i = c % seg;
    CVector v = CVector::Zero(rows());
    for (int p = 0; p < P(); ++p) {
        const Eigen::Index qr = (qs + p) % Q_;
        v.segment(qr * m_rf_, m_rf_) += taps_[static_cast<std::size_t>(p)].col(i);
    }
    return v;
}

CMatrix EffectiveChannel::columns(std::span<const int> cols) const
{
    CMatrix out(rows(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < cols.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = column(cols[i]);
    return out;
}

CMatrix EffectiveChannel::dense() const
{
    const Eigen::Index seg = static_cast<Eigen::Index>(K_) * n_t_;
    CMatrix h = CMatrix::Zero(rows(), cols());
    for (int qs = 0; qs < Q_; ++qs)
        for (int p = 0; p < P(); ++p) {
            const Eigen::Index qr = (qs + p) % Q_;
            h.block(qr * m_rf_, qs * seg, m_rf_, seg) += taps_[static_cast<std::size_t>(p)];
        }
    return h;
}

CVector apply_cpsc_channel(const EffectiveChannel& channel, const CVector& x, double noise_variance, Rng& rng)
{
    if (!(noise_variance >= 0.0)) throw std::invalid_argument("apply_cpsc_channel: noise variance must be >= 0");
    CVector y = channel.apply(x);
    if (noise_variance > 0.0)
        for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += complex_normal(rng, noise_variance);
    return y;
}

CVector apply_cpsc_channel(const EffectiveChannel& channel, const GroupFrame& frame, int j,
                           const SignalConstellation& constellation, double noise_variance, Rng& rng)
{
    const auto& d = frame.dims();
    if (d.K != channel.K() || d.Q != channel.Q() || d.n_t != channel.n_t())
        throw std::invalid_argument("apply_cpsc_channel: frame dimensions do not match the channel");
    return apply_cpsc_channel(channel, aggregate_vector(frame, j, constellation), noise_variance, rng);
}

double calibrate_noise(double snr_db, int K)
{
    if (K < 1) throw std::invalid_argument("calibrate_noise: K must be positive");
    return static_cast<double>(K) / std::pow(10.0, snr_db / 10.0);
}

}  // namespace smsim
