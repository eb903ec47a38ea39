// SPDX-License-Identifier: Apache-2.0

#include "smsim/selftest.hpp"

#include <cmath>
#include <functional>
#include <sstream>

#include "smsim/channel.hpp"
#include "smsim/detectors.hpp"
#include "smsim/harness.hpp"
#include "smsim/modem.hpp"
#include "smsim/numerics.hpp"
#include "smsim/rng.hpp"

namespace smsim {

namespace {

CheckResult check(std::string name, const std::function<std::string()>& body)
{
    CheckResult r{std::move(name), false, {}};
    try {
        r.detail = body();
        r.passed = r.detail.empty();
    } catch (const std::exception& e) {
        r.detail = std::string("exception: ") + e.what();
    }
    return r;
}

std::string fmt(const char* what, double v)
{
    std::ostringstream os;
    os << what << ' ' << v;
    return os.str();
}

CMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng)
{
    CMatrix m(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = complex_normal(rng);
    return m;
}

}  // namespace

std::vector<CheckResult> run_selftest()
{
    std::vector<CheckResult> out;

    out.push_back(check("cyclic index wraps into [1, y]", [] {
        for (long long y = 1; y <= 8; ++y)
            for (long long x = -20; x <= 20; ++x) {
                long long ref = x;
                while (ref < 1) ref += y;
                while (ref > y) ref -= y;
                if (cyclic_index(x, y) != ref) return fmt("mismatch at x =", static_cast<double>(x));
            }
        return std::string();
    }));

    out.push_back(check("constellations have unit mean energy", [] {
        for (const int L : SignalConstellation::kSupportedOrders) {
            const auto c = SignalConstellation::build(L);
            double e = 0.0;
            for (const auto& p : c.points()) e += std::norm(p);
            e /= L;
            if (std::abs(e - 1.0) >= 1e-12) return fmt("mean energy", e);
        }
        return std::string();
    }));

    out.push_back(check("group framing conserves bits", [] {
        Rng rng(7);
        const auto c = SignalConstellation::build(16);
        const FrameDims d{3, 4, 2, 4};
        Bits bits(static_cast<std::size_t>(group_payload_bits(d, 16)));
        for (auto& b : bits) b = static_cast<std::uint8_t>(rng() & 1u);
        const GroupFrame f = assemble_group(bits, d, c);
        return disassemble_group(f, c) == bits ? std::string() : std::string("payload not reproduced");
    }));

    out.push_back(check("convolution matches block-circulant matrix", [] {
        Rng rng(11);
        for (int trial = 0; trial < 20; ++trial) {
            const int K = 1 + static_cast<int>(rng() % 3), n_t = 1 << (rng() % 3), Q = 2 + static_cast<int>(rng() % 8);
            const int P = 1 + static_cast<int>(rng() % static_cast<unsigned>(Q)), m_rf = 1 + static_cast<int>(rng() % 6);
            std::vector<CMatrix> taps;
            for (int p = 0; p < P; ++p) taps.push_back(random_matrix(m_rf, static_cast<Eigen::Index>(K) * n_t, rng));
            const EffectiveChannel h(taps, K, n_t, Q);
            CVector x(h.cols());
            for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = complex_normal(rng);
            const double err = (h.apply(x) - h.dense() * x).norm() / (h.dense() * x).norm();
            if (!(err < 1e-10)) return fmt("relative error", err);
        }
        return std::string();
    }));

    out.push_back(check("hermitian square root multiplies back", [] {
        for (const double rho : {0.0, 0.5, 0.9}) {
            const CMatrix r = exp_correlation_matrix(16, rho).cast<cplx>();
            const CMatrix s = hermitian_sqrt(r);
            const double err = (s * s.adjoint() - r).norm() / r.norm();
            if (!(err < 1e-10)) return fmt("relative error", err);
        }
        return std::string();
    }));

    out.push_back(check("least-squares residual is orthogonal", [] {
        Rng rng(5);
        for (int trial = 0; trial < 10; ++trial) {
            const CMatrix a = random_matrix(20, 8, rng);
            const CVector b = random_matrix(20, 1, rng);
            const CVector x = ls_solve(a, b);
            const double err = (a.adjoint() * (b - a * x)).norm() / b.norm();
            if (!(err < 1e-9)) return fmt("orthogonality error", err);
        }
        return std::string();
    }));

    out.push_back(check("noiseless GSP recovers the transmitted frame", [] {
        SimConfig cfg;
        cfg.M = 32;
        cfg.M_RF = 12;
        cfg.K = 2;
        cfg.Q = 4;
        cfg.P = 2;
        cfg.n_t = 4;
        cfg.L = 4;
        cfg.J = 2;
        cfg.detectors = {DetectorKind::Gsp};
        cfg.snr_grid_db = {200.0};
        cfg.trials = 20;
        const TrialRunner runner(cfg);
        for (long long t = 0; t < cfg.trials; ++t) {
            const auto o = runner.run(0, t);
            if (o.detectors.front().errors.total() != 0) return fmt("errors in trial", static_cast<double>(t));
        }
        return std::string();
    }));

    out.push_back(check("trials are reproducible", [] {
        SimConfig cfg;
        cfg.M = 16;
        cfg.M_RF = 6;
        cfg.K = 2;
        cfg.Q = 4;
        cfg.P = 2;
        cfg.L = 4;
        cfg.detectors = {DetectorKind::Gsp, DetectorKind::Oracle};
        cfg.snr_grid_db = {5.0};
        const TrialRunner runner(cfg);
        const auto a = runner.run(0, 3);
        const auto b = runner.run(0, 3);
        for (std::size_t d = 0; d < a.detectors.size(); ++d)
            if (!(a.detectors[d].errors == b.detectors[d].errors)) return std::string("outcomes differ");
        return std::string();
    }));

    return out;
}

}  // namespace smsim
