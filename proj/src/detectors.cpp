// SPDX-License-Identifier: Apache-2.0

#include "smsim/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <limits>
#include <numeric>

namespace smsim {

namespace {

FrameDims check_blocks(std::span<const CVector> y, std::span<const EffectiveChannel> h)
{
    if (y.empty()) throw std::invalid_argument("detector: at least one block required");
    if (y.size() != h.size()) throw std::invalid_argument("detector: number of received blocks and channels differ");
    const EffectiveChannel& h0 = h.front();
    for (std::size_t j = 0; j < h.size(); ++j) {
        if (h[j].K() != h0.K() || h[j].Q() != h0.Q() || h[j].n_t() != h0.n_t() || h[j].m_rf() != h0.m_rf())
            throw std::invalid_argument("detector: all blocks must share dimensions");
        if (y[j].size() != h[j].rows())
            throw std::invalid_argument("detector: received block " + std::to_string(j) + " has " +
                                        std::to_string(y[j].size()) + " samples, expected " +
                                        std::to_string(h[j].rows()));
    }
    return FrameDims{h0.K(), h0.Q(), static_cast<int>(y.size()), h0.n_t()};
}

struct LsFit {
    CVector coef;    // aligned with the requested columns; dropped columns are zero
    CVector fitted;  // A coef
};

// Least squares on the given columns. On rank deficiency, columns are admitted
// in ascending order and kept only if they raise the rank; the rest get zero.
LsFit ls_fit(const EffectiveChannel& h, std::span<const int> cols, const CVector& y, bool& degenerate)
{
    const CMatrix a = h.columns(cols);
    try {
        CVector coef = ls_solve(a, y);
        CVector fitted = a * coef;
        return {std::move(coef), std::move(fitted)};
    } catch (const RankDeficientError&) {
        degenerate = true;
    }

    std::vector<Eigen::Index> kept;
    CMatrix basis(a.rows(), 0);
    for (Eigen::Index c = 0; c < a.cols(); ++c) {
        CMatrix trial(a.rows(), basis.cols() + 1);
        trial << basis, a.col(c);
        if (numerical_rank(trial) == static_cast<std::size_t>(trial.cols())) {
            basis = std::move(trial);
            kept.push_back(c);
        }
    }
    LsFit fit{CVector::Zero(a.cols()), CVector::Zero(a.rows())};
    if (kept.empty()) return fit;
    const CVector sub = ls_solve(basis, y);
    for (std::size_t i = 0; i < kept.size(); ++i) fit.coef[kept[i]] = sub[static_cast<Eigen::Index>(i)];
    fit.fitted = basis * sub;
    return fit;
}

// Indices of the `count` largest values, ties to the lowest index; returned ascending.
std::vector<int> top_indices(const Eigen::VectorXd& values, std::span<const int> candidates, std::size_t count)
{
    std::vector<int> idx(candidates.begin(), candidates.end());
    count = std::min(count, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(), [&](int a, int b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return a < b;
    });
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::vector<int> all_indices(Eigen::Index n)
{
    std::vector<int> v(static_cast<std::size_t>(n));
    std::iota(v.begin(), v.end(), 0);
    return v;
}

std::vector<int> sorted_union(const std::vector<int>& a, const std::vector<int>& b)
{
    std::vector<int> out;
    out.reserve(a.size() + b.size());
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

// Per-segment argmax of `energy` over the segment's n_t columns.
std::vector<int> segment_argmax(const Eigen::VectorXd& energy, int segments, int n_t)
{
    std::vector<int> out(static_cast<std::size_t>(segments));
    for (int s = 0; s < segments; ++s) {
        int best = s * n_t;
        for (int c = s * n_t + 1; c < (s + 1) * n_t; ++c)
            if (energy[c] > energy[best]) best = c;
        out[static_cast<std::size_t>(s)] = best;
    }
    return out;
}

DetectionResult make_result(const FrameDims& dims, const SupportSet& support,
                            const std::vector<std::vector<cplx>>& rough, const SignalConstellation& constellation)
{
    DetectionResult res;
    res.dims = dims;
    res.support = support;
    res.symbols.resize(static_cast<std::size_t>(dims.J) * dims.segments());
    for (int j = 0; j < dims.J; ++j)
        for (int s = 0; s < dims.segments(); ++s) {
            auto& sym = res.symbols[static_cast<std::size_t>(j * dims.segments() + s)];
            sym.antenna = support.antenna(s);
            sym.point_index = quantize_symbol(rough[static_cast<std::size_t>(j)][static_cast<std::size_t>(s)], constellation);
        }
    return res;
}

}  // namespace

SupportSet::SupportSet(int K, int Q, int n_t, std::vector<int> antennas)
    : K_(K), Q_(Q), n_t_(n_t), antennas_(std::move(antennas))
{
    if (K < 1 || Q < 1 || n_t < 1) throw std::invalid_argument("SupportSet: dimensions must be positive");
    if (antennas_.size() != static_cast<std::size_t>(K) * Q)
        throw std::invalid_argument("SupportSet: need exactly K Q entries");
    for (const int a : antennas_)
        if (a < 1 || a > n_t) throw std::invalid_argument("SupportSet: antenna index outside [1, n_t]");
}

SupportSet SupportSet::from_columns(int K, int Q, int n_t, std::span<const int> columns)
{
    if (columns.size() != static_cast<std::size_t>(K) * Q)
        throw std::invalid_argument("SupportSet: need exactly one column per segment");
    std::vector<int> antennas(columns.size());
    for (std::size_t s = 0; s < columns.size(); ++s) {
        const int seg = static_cast<int>(s);
        if (columns[s] < seg * n_t || columns[s] >= (seg + 1) * n_t)
            throw std::invalid_argument("SupportSet: column " + std::to_string(columns[s]) + " is not in segment " +
                                        std::to_string(seg));
        antennas[s] = columns[s] - seg * n_t + 1;
    }
    return SupportSet(K, Q, n_t, std::move(antennas));
}

SupportSet SupportSet::of(const GroupFrame& frame)
{
    const auto& d = frame.dims();
    std::vector<int> antennas(static_cast<std::size_t>(d.segments()));
    for (int q = 0; q < d.Q; ++q)
        for (int k = 0; k < d.K; ++k) antennas[static_cast<std::size_t>(q * d.K + k)] = frame.at(0, q, k).antenna;
    return SupportSet(d.K, d.Q, d.n_t, std::move(antennas));
}

std::vector<int> SupportSet::columns() const
{
    std::vector<int> out(antennas_.size());
    for (int s = 0; s < size(); ++s) out[static_cast<std::size_t>(s)] = column(s);
    return out;
}

int quantize_symbol(cplx rough, const SignalConstellation& constellation)
{
    const auto& pts = constellation.points();
    int best = 0;
    double best_d = std::norm(rough - pts[0]);
    for (int i = 1; i < constellation.order(); ++i) {
        const double d = std::norm(rough - pts[static_cast<std::size_t>(i)]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

DetectionResult detect_gsp(std::span<const CVector> y, std::span<const EffectiveChannel> h,
                           const SignalConstellation& constellation, const GspObserver& observer)
{
    const FrameDims dims = check_blocks(y, h);
    const auto J = static_cast<std::size_t>(dims.J);
    const int segs = dims.segments();
    const int n_t = dims.n_t;
    const auto rows = static_cast<std::size_t>(h.front().rows());

    DetectionDiagnostics diag;
    std::vector<CVector> residual(y.begin(), y.end());
    std::vector<CVector> estimate(J);
    std::vector<int> omega_prev;
    std::vector<int> omega;
    int t = 1;

    for (;;) {
        GspState st;
        st.omega_prev = omega_prev;

        // Correlation, summed energy over the J blocks.
        st.correlation.resize(J);
        Eigen::VectorXd corr_energy = Eigen::VectorXd::Zero(h.front().cols());
        for (std::size_t j = 0; j < J; ++j) {
            st.correlation[j] = h[j].adjoint(residual[j]);
            corr_energy += st.correlation[j].cwiseAbs2();
        }

        // Preliminary support: strongest antenna of every segment.
        st.gamma = segment_argmax(corr_energy, segs, n_t);

        st.union_support = sorted_union(omega_prev, st.gamma);
        if (st.union_support.size() > rows && !omega_prev.empty()) {
            // Keep the previous support and admit the strongest new candidates that fit.
            std::vector<int> extras;
            for (int s = 0; s < segs; ++s)
                if (st.gamma[static_cast<std::size_t>(s)] != omega_prev[static_cast<std::size_t>(s)]) extras.push_back(s);
            std::stable_sort(extras.begin(), extras.end(), [&](int a, int b) {
                return corr_energy[st.gamma[static_cast<std::size_t>(a)]] > corr_energy[st.gamma[static_cast<std::size_t>(b)]];
            });
            std::vector<int> admitted;
            for (const int s : extras) {
                if (omega_prev.size() + admitted.size() >= rows) break;
                admitted.push_back(st.gamma[static_cast<std::size_t>(s)]);
            }
            std::sort(admitted.begin(), admitted.end());
            st.union_support = sorted_union(omega_prev, admitted);
            diag.restricted_union = true;
        }

        // Least squares on the union against y, then per-segment pruning.
        st.union_estimate.resize(J);
        Eigen::VectorXd union_energy = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(st.union_support.size()));
        for (std::size_t j = 0; j < J; ++j) {
            st.union_estimate[j] = ls_fit(h[j], st.union_support, y[j], diag.degenerate_support).coef;
            union_energy += st.union_estimate[j].cwiseAbs2();
        }
        omega.assign(static_cast<std::size_t>(segs), -1);
        for (std::size_t i = 0; i < st.union_support.size(); ++i) {
            const int col = st.union_support[i];
            const auto s = static_cast<std::size_t>(col / n_t);
            if (omega[s] < 0) {
                omega[s] = static_cast<int>(i);
            } else if (union_energy[static_cast<Eigen::Index>(i)] > union_energy[omega[s]]) {
                omega[s] = static_cast<int>(i);
            }
        }
        for (int s = 0; s < segs; ++s) {
            auto& o = omega[static_cast<std::size_t>(s)];
            // A segment can only be empty when the union could not hold Gamma at all.
            o = o < 0 ? st.gamma[static_cast<std::size_t>(s)] : st.union_support[static_cast<std::size_t>(o)];
        }
        st.omega = omega;

        // Least squares on the final support and residual update.
        st.estimate.resize(J);
        st.residual.resize(J);
        std::vector<double> norms(J);
        for (std::size_t j = 0; j < J; ++j) {
            LsFit fit = ls_fit(h[j], omega, y[j], diag.degenerate_support);
            residual[j] = y[j] - fit.fitted;
            estimate[j] = std::move(fit.coef);
            st.estimate[j] = estimate[j];
            st.residual[j] = residual[j];
            norms[j] = residual[j].norm();
        }
        diag.residual_trajectory.push_back(norms);
        ++diag.iterations;

        ++t;
        st.t = t;
        if (observer) observer(st);
        // Stop on a repeated support or after Q iterations; no rollback on a growing residual.
        if (omega == omega_prev || diag.iterations >= dims.Q) break;
        omega_prev = omega;
    }

    diag.residual_norms = diag.residual_trajectory.back();
    std::vector<std::vector<cplx>> rough(J);
    for (std::size_t j = 0; j < J; ++j) rough[j].assign(estimate[j].data(), estimate[j].data() + estimate[j].size());
    DetectionResult res = make_result(dims, SupportSet::from_columns(dims.K, dims.Q, n_t, omega), rough, constellation);
    res.diagnostics = std::move(diag);
    return res;
}

DetectionResult detect_sp_classical(const CVector& y, const EffectiveChannel& h, int sparsity,
                                    const SignalConstellation& constellation, int max_iterations)
{
    const FrameDims dims = check_blocks(std::span<const CVector>(&y, 1), std::span<const EffectiveChannel>(&h, 1));
    if (sparsity < 1) throw std::invalid_argument("detect_sp_classical: sparsity must be positive");
    if (max_iterations < 0) throw std::invalid_argument("detect_sp_classical: max_iterations must be >= 0");
    const auto s = static_cast<std::size_t>(sparsity);
    const auto rows = static_cast<std::size_t>(h.rows());
    const std::vector<int> every = all_indices(h.cols());

    DetectionDiagnostics diag;
    std::vector<int> support = top_indices(h.adjoint(y).cwiseAbs(), every, s);
    LsFit fit = ls_fit(h, support, y, diag.degenerate_support);
    CVector residual = y - fit.fitted;
    double rnorm = residual.norm();
    diag.residual_trajectory.push_back({rnorm});

    for (int it = 0; it < max_iterations; ++it) {
        const Eigen::VectorXd corr = h.adjoint(residual).cwiseAbs();
        const std::vector<int> candidates = top_indices(corr, every, s);
        std::vector<int> merged = sorted_union(support, candidates);
        if (merged.size() > rows) {
            std::vector<int> fresh;
            std::set_difference(candidates.begin(), candidates.end(), support.begin(), support.end(),
                                std::back_inserter(fresh));
            fresh = top_indices(corr, fresh, rows > support.size() ? rows - support.size() : 0);
            merged = sorted_union(support, fresh);
            diag.restricted_union = true;
        }
        const LsFit wide = ls_fit(h, merged, y, diag.degenerate_support);

        Eigen::VectorXd mags = Eigen::VectorXd::Zero(h.cols());
        for (std::size_t i = 0; i < merged.size(); ++i) mags[merged[i]] = std::abs(wide.coef[static_cast<Eigen::Index>(i)]);
        std::vector<int> next = top_indices(mags, merged, s);

        LsFit next_fit = ls_fit(h, next, y, diag.degenerate_support);
        CVector next_residual = y - next_fit.fitted;
        const double next_norm = next_residual.norm();
        diag.residual_trajectory.push_back({next_norm});
        if (next_norm >= rnorm) break;
        support = std::move(next);
        fit = std::move(next_fit);
        residual = std::move(next_residual);
        rnorm = next_norm;
        ++diag.iterations;
    }
    diag.residual_norms = {rnorm};

    // Map the recovered support onto one antenna per segment.
    const int segs = dims.segments();
    const int n_t = dims.n_t;
    std::vector<int> cols(static_cast<std::size_t>(segs), -1);
    std::vector<cplx> rough(static_cast<std::size_t>(segs));
    for (std::size_t i = 0; i < support.size(); ++i) {
        const auto seg = static_cast<std::size_t>(support[i] / n_t);
        const cplx v = fit.coef[static_cast<Eigen::Index>(i)];
        if (cols[seg] < 0 || std::abs(v) > std::abs(rough[seg])) {
            cols[seg] = support[i];
            rough[seg] = v;
        }
    }
    const CVector final_corr = h.adjoint(residual);
    for (int seg = 0; seg < segs; ++seg) {
        auto& c = cols[static_cast<std::size_t>(seg)];
        if (c >= 0) continue;
        c = seg * n_t;
        for (int i = seg * n_t + 1; i < (seg + 1) * n_t; ++i)
            if (std::abs(final_corr[i]) > std::abs(final_corr[c])) c = i;
        // Single-column least squares of the residual on the chosen column.
        const double energy = h.column(c).squaredNorm();
        rough[static_cast<std::size_t>(seg)] = energy > 0.0 ? final_corr[c] / energy : cplx(0.0, 0.0);
    }

    DetectionResult res =
        make_result(dims, SupportSet::from_columns(dims.K, dims.Q, n_t, cols), {rough}, constellation);
    res.diagnostics = std::move(diag);
    return res;
}

DetectionResult detect_sp_classical(const CVector& y, const EffectiveChannel& h, int sparsity,
                                    const SignalConstellation& constellation)
{
    return detect_sp_classical(y, h, sparsity, constellation, sparsity);
}

DetectionResult detect_mmse(const CVector& y, const EffectiveChannel& h, double noise_variance,
                            const SignalConstellation& constellation)
{
    const FrameDims dims = check_blocks(std::span<const CVector>(&y, 1), std::span<const EffectiveChannel>(&h, 1));
    if (!(noise_variance > 0.0)) throw std::invalid_argument("detect_mmse: noise variance must be positive");

    const CMatrix hd = h.dense();
    CMatrix gram = hd * hd.adjoint();
    gram.diagonal().array() += noise_variance;
    const CVector x = hd.adjoint() * gram.llt().solve(y);

    const int segs = dims.segments();
    const int n_t = dims.n_t;
    const std::vector<int> cols = segment_argmax(x.cwiseAbs(), segs, n_t);
    std::vector<cplx> rough(static_cast<std::size_t>(segs));
    for (int s = 0; s < segs; ++s) rough[static_cast<std::size_t>(s)] = x[cols[static_cast<std::size_t>(s)]];

    DetectionResult res = make_result(dims, SupportSet::from_columns(dims.K, dims.Q, n_t, cols), {rough}, constellation);
    res.diagnostics.iterations = 1;
    res.diagnostics.residual_norms = {(y - hd * x).norm()};
    return res;
}

SearchSpaceTooLarge::SearchSpaceTooLarge(double size)
    : std::invalid_argument("ML search set of size " + std::to_string(size) + " exceeds the limit of " +
                            std::to_string(kMlSearchLimit)),
      size_(size)
{
}

double ml_search_size(int K, int Q, int n_t, int L)
{
    return std::pow(static_cast<double>(n_t) * L, static_cast<double>(K) * Q);
}

DetectionResult detect_ml(std::span<const CVector> y, std::span<const EffectiveChannel> h,
                          const SignalConstellation& constellation)
{
    const FrameDims dims = check_blocks(y, h);
    const int L = constellation.order();
    const double size = ml_search_size(dims.K, dims.Q, dims.n_t, L);
    if (size > kMlSearchLimit) throw SearchSpaceTooLarge(size);

    const int segs = dims.segments();
    const int n_t = dims.n_t;
    const auto J = static_cast<std::size_t>(dims.J);
    std::vector<CMatrix> dense(J);
    for (std::size_t j = 0; j < J; ++j) dense[j] = h[j].dense();

    long long spatial_count = 1;
    long long signal_count = 1;
    for (int s = 0; s < segs; ++s) {
        spatial_count *= n_t;
        signal_count *= L;
    }

    // Mixed-radix digits, segment 0 most significant, so enumeration order is lexicographic.
    auto digits = [segs](long long v, int radix) {
        std::vector<int> d(static_cast<std::size_t>(segs));
        for (int s = segs - 1; s >= 0; --s) {
            d[static_cast<std::size_t>(s)] = static_cast<int>(v % radix);
            v /= radix;
        }
        return d;
    };
    std::vector<std::vector<int>> signal_table(static_cast<std::size_t>(signal_count));
    for (long long v = 0; v < signal_count; ++v) signal_table[static_cast<std::size_t>(v)] = digits(v, L);

    double best_metric = std::numeric_limits<double>::infinity();
    std::vector<int> best_antennas;
    std::vector<long long> best_signals(J);
    CMatrix a(dense.front().rows(), segs);
    CVector x(segs);

    for (long long sp = 0; sp < spatial_count; ++sp) {
        const std::vector<int> ant = digits(sp, n_t);
        double metric = 0.0;
        std::vector<long long> per_block(J);
        for (std::size_t j = 0; j < J; ++j) {
            for (int s = 0; s < segs; ++s) a.col(s) = dense[j].col(s * n_t + ant[static_cast<std::size_t>(s)]);
            double block_best = std::numeric_limits<double>::infinity();
            for (long long sg = 0; sg < signal_count; ++sg) {
                const auto& pts = signal_table[static_cast<std::size_t>(sg)];
                for (int s = 0; s < segs; ++s) x[s] = constellation.point(pts[static_cast<std::size_t>(s)]);
                const double m = (y[j] - a * x).squaredNorm();
                if (m < block_best) {
                    block_best = m;
                    per_block[j] = sg;
                }
            }
            metric += block_best;
        }
        if (metric < best_metric) {
            best_metric = metric;
            best_antennas = ant;
            best_signals = per_block;
        }
    }

    std::vector<int> antennas(static_cast<std::size_t>(segs));
    for (int s = 0; s < segs; ++s) antennas[static_cast<std::size_t>(s)] = best_antennas[static_cast<std::size_t>(s)] + 1;

    DetectionResult res;
    res.dims = dims;
    res.support = SupportSet(dims.K, dims.Q, n_t, antennas);
    res.symbols.resize(J * static_cast<std::size_t>(segs));
    for (std::size_t j = 0; j < J; ++j) {
        const auto& pts = signal_table[static_cast<std::size_t>(best_signals[j])];
        for (int s = 0; s < segs; ++s)
            res.symbols[j * static_cast<std::size_t>(segs) + static_cast<std::size_t>(s)] =
                SmSymbol{antennas[static_cast<std::size_t>(s)], pts[static_cast<std::size_t>(s)]};
    }
    res.diagnostics.iterations = 1;
    res.diagnostics.residual_norms.assign(J, 0.0);
    for (std::size_t j = 0; j < J; ++j) {
        CVector xhat = CVector::Zero(h[j].cols());
        for (int s = 0; s < segs; ++s)
            xhat[s * n_t + antennas[static_cast<std::size_t>(s)] - 1] =
                constellation.point(res.symbols[j * static_cast<std::size_t>(segs) + static_cast<std::size_t>(s)].point_index);
        res.diagnostics.residual_norms[j] = (y[j] - dense[j] * xhat).norm();
    }
    return res;
}

DetectionResult detect_oracle_ls(std::span<const CVector> y, std::span<const EffectiveChannel> h,
                                 const SupportSet& true_support, const SignalConstellation& constellation)
{
    const FrameDims dims = check_blocks(y, h);
    if (true_support.K() != dims.K || true_support.Q() != dims.Q || true_support.n_t() != dims.n_t)
        throw std::invalid_argument("detect_oracle_ls: support dimensions do not match the channel");

    const std::vector<int> cols = true_support.columns();
    const auto J = static_cast<std::size_t>(dims.J);
    std::vector<std::vector<cplx>> rough(J);
    DetectionDiagnostics diag;
    diag.iterations = 1;
    for (std::size_t j = 0; j < J; ++j) {
        const CMatrix a = h[j].columns(cols);
        const CVector coef = ls_solve(a, y[j]);
        rough[j].assign(coef.data(), coef.data() + coef.size());
        diag.residual_norms.push_back((y[j] - a * coef).norm());
    }
    DetectionResult res = make_result(dims, true_support, rough, constellation);
    res.diagnostics = std::move(diag);
    return res;
}

}  // namespace smsim
