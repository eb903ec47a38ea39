// SPDX-License-Identifier: Apache-2.0

#include "smsim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <stdexcept>
#include <thread>

namespace smsim {

namespace {

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <typename T>
T parse_number(std::string_view key, std::string_view text)
{
    text = trim(text);
    T value{};
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc() || ptr != end || text.empty())
        throw std::invalid_argument("config: cannot parse '" + std::string(text) + "' for key '" + std::string(key) + "'");
    return value;
}

double parse_real(std::string_view key, std::string_view text)
{
    const std::string s(trim(text));
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
        throw std::invalid_argument("config: cannot parse '" + s + "' for key '" + std::string(key) + "'");
    return v;
}

int popcount_xor(const Bits& a, const Bits& b)
{
    int n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i];
    return n;
}

std::string format_real(double v)
{
    if (std::isnan(v)) return "nan";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

std::string to_string(DetectorKind kind)
{
    switch (kind) {
    case DetectorKind::Gsp: return "gsp";
    case DetectorKind::Sp: return "sp";
    case DetectorKind::Mmse: return "mmse";
    case DetectorKind::Oracle: return "oracle";
    case DetectorKind::Ml: return "ml";
    }
    return "unknown";
}

DetectorKind parse_detector(std::string_view name)
{
    for (const auto k : {DetectorKind::Gsp, DetectorKind::Sp, DetectorKind::Mmse, DetectorKind::Oracle, DetectorKind::Ml})
        if (to_string(k) == name) return k;
    throw std::invalid_argument("unknown detector '" + std::string(name) + "' (expected gsp, sp, mmse, oracle, ml)");
}

std::vector<DetectorKind> parse_detector_list(std::string_view list)
{
    std::vector<DetectorKind> out;
    for (const auto item : split(list, ',')) {
        if (item.empty()) continue;
        const auto k = parse_detector(item);
        if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
    }
    if (out.empty()) throw std::invalid_argument("detector list is empty");
    return out;
}

std::string to_string(ChannelRedraw mode)
{
    return mode == ChannelRedraw::PerBlock ? "per-block" : "per-group";
}

ChannelRedraw parse_channel_redraw(std::string_view name)
{
    if (name == "per-block") return ChannelRedraw::PerBlock;
    if (name == "per-group") return ChannelRedraw::PerGroup;
    throw std::invalid_argument("channel_redraw must be per-block or per-group, got '" + std::string(name) + "'");
}

std::vector<double> parse_snr_grid(std::string_view text)
{
    text = trim(text);
    std::vector<double> grid;
    if (text.find(':') != std::string_view::npos) {
        const auto parts = split(text, ':');
        if (parts.size() != 3) throw std::invalid_argument("SNR range must be start:step:stop");
        const double start = parse_real("snr_grid_db", parts[0]);
        const double step = parse_real("snr_grid_db", parts[1]);
        const double stop = parse_real("snr_grid_db", parts[2]);
        if (!(step > 0.0) || stop < start) throw std::invalid_argument("SNR range needs step > 0 and stop >= start");
        const auto n = static_cast<long long>(std::floor((stop - start) / step + 1e-9));
        for (long long i = 0; i <= n; ++i) grid.push_back(start + static_cast<double>(i) * step);
    } else {
        for (const auto item : split(text, ','))
            if (!item.empty()) grid.push_back(parse_real("snr_grid_db", item));
    }
    if (grid.empty()) throw std::invalid_argument("SNR grid is empty");
    return grid;
}

void SimConfig::validate() const
{
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw std::invalid_argument("config: " + what);
    };
    require(M > 0 && M_RF > 0 && K > 0 && n_t > 0 && L > 0 && P > 0 && Q > 0 && J > 0,
            "all dimension fields must be positive");
    require(M_RF <= M, "M_RF must not exceed M");
    require(P <= Q, "P must not exceed Q");
    require(is_power_of_two(n_t), "n_t must be a power of two");
    require(is_power_of_two(L), "L must be a power of two");
    require(rho_bs >= 0.0 && rho_bs < 1.0, "rho_bs must lie in [0, 1)");
    require(rho_us >= 0.0 && rho_us < 1.0, "rho_us must lie in [0, 1)");
    require(!detectors.empty(), "at least one detector is required");
    require(!snr_grid_db.empty(), "snr_grid_db must not be empty");
    require(trials > 0, "trials must be positive");
    if (ae_scheme == AeScheme::Direct)
        require(phi >= 1 && phi <= M / M_RF - 1, "direct selection needs 1 <= phi <= floor(M/M_RF) - 1");
    if (ae_scheme == AeScheme::Continuous)
        require(phi >= 1 && phi <= M - M_RF + 1, "continuous selection needs 1 <= phi <= M - M_RF + 1");
    SignalConstellation::build(L);
}

void set_config_value(SimConfig& c, std::string_view key, std::string_view value)
{
    value = trim(value);
    if (key == "M") c.M = parse_number<int>(key, value);
    else if (key == "M_RF") c.M_RF = parse_number<int>(key, value);
    else if (key == "K") c.K = parse_number<int>(key, value);
    else if (key == "n_t") c.n_t = parse_number<int>(key, value);
    else if (key == "L") c.L = parse_number<int>(key, value);
    else if (key == "P") c.P = parse_number<int>(key, value);
    else if (key == "Q") c.Q = parse_number<int>(key, value);
    else if (key == "J") c.J = parse_number<int>(key, value);
    else if (key == "rho_bs") c.rho_bs = parse_real(key, value);
    else if (key == "rho_us") c.rho_us = parse_real(key, value);
    else if (key == "ae_scheme") c.ae_scheme = parse_ae_scheme(value);
    else if (key == "phi") c.phi = parse_number<int>(key, value);
    else if (key == "detectors") c.detectors = parse_detector_list(value);
    else if (key == "snr_grid_db") c.snr_grid_db = parse_snr_grid(value);
    else if (key == "trials") c.trials = parse_number<long long>(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "channel_redraw") c.channel_redraw = parse_channel_redraw(value);
    else throw std::invalid_argument("config: unknown key '" + std::string(key) + "'");
}

SimConfig parse_config(std::istream& in)
{
    SimConfig c;
    std::set<std::string, std::less<>> seen;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view v = line;
        if (const auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
        v = trim(v);
        if (v.empty()) continue;
        const auto eq = v.find('=');
        if (eq == std::string_view::npos)
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected 'key = value'");
        const auto key = trim(v.substr(0, eq));
        if (!seen.insert(std::string(key)).second)
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": duplicate key '" +
                                        std::string(key) + "'");
        try {
            set_config_value(c, key, v.substr(eq + 1));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    c.validate();
    return c;
}

SimConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path.string());
    return parse_config(in);
}

ErrorCounts count_bit_errors(const GroupFrame& tx, const DetectionResult& rx, const SignalConstellation& constellation)
{
    const auto& d = tx.dims();
    if (!(rx.dims == d) || rx.support.size() != d.segments() || rx.symbols.size() != tx.symbols().size())
        throw std::invalid_argument("count_bit_errors: frame and detection dimensions differ");
    ErrorCounts e;
    for (int q = 0; q < d.Q; ++q)
        for (int k = 0; k < d.K; ++k)
            e.spatial += popcount_xor(antenna_bits(tx.at(0, q, k).antenna, d.n_t),
                                      antenna_bits(rx.support.antenna(q * d.K + k), d.n_t));
    for (int j = 0; j < d.J; ++j)
        for (int q = 0; q < d.Q; ++q)
            for (int k = 0; k < d.K; ++k)
                e.signal += std::popcount(constellation.label(tx.at(j, q, k).point_index) ^
                                          constellation.label(rx.at(j, q, k).point_index));
    return e;
}

TrialRunner::TrialRunner(SimConfig config)
    : config_((config.validate(), std::move(config))),
      constellation_(SignalConstellation::build(config_.L)),
      generator_(config_.K, config_.M, config_.n_t, config_.P, CorrelationSpec{config_.rho_bs, config_.rho_us})
{
}

TrialDraw TrialRunner::draw(int snr_index, long long trial_index) const
{
    const auto& c = config_;
    if (snr_index < 0 || snr_index >= static_cast<int>(c.snr_grid_db.size()))
        throw std::out_of_range("snr_index outside the SNR grid");
    const auto si = static_cast<std::uint64_t>(snr_index);
    const auto ti = static_cast<std::uint64_t>(trial_index);
    auto stream = [&](Stream s) { return Rng(derive_seed(c.seed, {si, ti, static_cast<std::uint64_t>(s)})); };

    const FrameDims dims = c.dims();
    Rng payload_rng = stream(Stream::Payload);
    Bits payload(static_cast<std::size_t>(group_payload_bits(dims, c.L)));
    for (auto& b : payload) b = static_cast<std::uint8_t>(payload_rng() >> 63);
    GroupFrame frame = assemble_group(payload, dims, constellation_);

    Rng ae_rng = stream(Stream::AeSelection);
    const AESelection sel = select_aes(c.M, c.M_RF, c.ae_scheme, c.phi, ae_rng);

    Rng channel_rng = stream(Stream::Channel);
    std::vector<EffectiveChannel> channels;
    channels.reserve(static_cast<std::size_t>(c.J));
    for (int j = 0; j < c.J; ++j) {
        if (j > 0 && c.channel_redraw == ChannelRedraw::PerGroup) {
            channels.push_back(channels.front());
            continue;
        }
        channels.push_back(EffectiveChannel::from(generator_(channel_rng), sel, c.Q));
    }

    const double nv = calibrate_noise(c.snr_grid_db[static_cast<std::size_t>(snr_index)], c.K);
    Rng noise_rng = stream(Stream::Noise);
    std::vector<CVector> received;
    received.reserve(static_cast<std::size_t>(c.J));
    for (int j = 0; j < c.J; ++j)
        received.push_back(apply_cpsc_channel(channels[static_cast<std::size_t>(j)], frame, j, constellation_, nv, noise_rng));

    return TrialDraw{std::move(frame), std::move(channels), std::move(received), nv};
}

TrialOutcome TrialRunner::run(int snr_index, long long trial_index) const
{
    const TrialDraw d = draw(snr_index, trial_index);
    const auto& c = config_;
    const FrameDims dims = c.dims();

    TrialOutcome out;
    out.snr_index = snr_index;
    out.trial_index = trial_index;
    out.spatial_bits = group_spatial_bits(dims);
    out.signal_bits = group_signal_bits(dims, c.L);

    for (const auto kind : c.detectors) {
        DetectorOutcome o;
        o.detector = kind;
        auto skip = [&o](std::string why) {
            o.skipped = true;
            o.skip_reason = std::move(why);
        };
        try {
            std::optional<DetectionResult> r;
            switch (kind) {
            case DetectorKind::Gsp: r = detect_gsp(d.received, d.channels, constellation_); break;
            case DetectorKind::Sp:
                if (c.J != 1) skip("sp detects single blocks and requires J = 1");
                else r = detect_sp_classical(d.received[0], d.channels[0], dims.segments(), constellation_);
                break;
            case DetectorKind::Mmse:
                if (c.J != 1) skip("mmse detects single blocks and requires J = 1");
                else r = detect_mmse(d.received[0], d.channels[0], d.noise_variance, constellation_);
                break;
            case DetectorKind::Oracle:
                r = detect_oracle_ls(d.received, d.channels, SupportSet::of(d.frame), constellation_);
                break;
            case DetectorKind::Ml: r = detect_ml(d.received, d.channels, constellation_); break;
            }
            if (r) {
                o.errors = count_bit_errors(d.frame, *r, constellation_);
                o.diagnostics = std::move(r->diagnostics);
            }
        } catch (const SearchSpaceTooLarge& e) {
            skip(e.what());
        } catch (const RankDeficientError& e) {
            skip(e.what());
        }
        out.detectors.push_back(std::move(o));
    }
    return out;
}

TrialOutcome run_trial(const SimConfig& config, int snr_index, long long trial_index)
{
    return TrialRunner(config).run(snr_index, trial_index);
}

std::vector<BerRecord> run_sweep(const SimConfig& config, unsigned threads)
{
    const TrialRunner runner(config);
    const auto n_snr = config.snr_grid_db.size();
    const auto n_det = config.detectors.size();
    const long long total_jobs = static_cast<long long>(n_snr) * config.trials;

    struct Acc {
        long long trials = 0;
        long long spatial_errors = 0;
        long long signal_errors = 0;
        std::string skip_reason;
    };
    std::vector<Acc> acc(n_snr * n_det);
    std::mutex merge_mutex;
    std::atomic<long long> next{0};
    std::exception_ptr failure;

    auto worker = [&] {
        std::vector<Acc> local(acc.size());
        try {
            for (long long job = next++; job < total_jobs; job = next++) {
                const auto si = static_cast<int>(job / config.trials);
                const TrialOutcome out = runner.run(si, job % config.trials);
                for (std::size_t d = 0; d < n_det; ++d) {
                    Acc& a = local[static_cast<std::size_t>(si) * n_det + d];
                    const auto& o = out.detectors[d];
                    if (o.skipped) {
                        if (a.skip_reason.empty()) a.skip_reason = o.skip_reason;
                        continue;
                    }
                    ++a.trials;
                    a.spatial_errors += o.errors.spatial;
                    a.signal_errors += o.errors.signal;
                }
            }
        } catch (...) {
            std::lock_guard lock(merge_mutex);
            if (!failure) failure = std::current_exception();
            next = total_jobs;
        }
        std::lock_guard lock(merge_mutex);
        for (std::size_t i = 0; i < acc.size(); ++i) {
            acc[i].trials += local[i].trials;
            acc[i].spatial_errors += local[i].spatial_errors;
            acc[i].signal_errors += local[i].signal_errors;
            // Keep the lexicographically smallest reason so the result is scheduling independent.
            if (!local[i].skip_reason.empty() &&
                (acc[i].skip_reason.empty() || local[i].skip_reason < acc[i].skip_reason))
                acc[i].skip_reason = local[i].skip_reason;
        }
    };

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<long long>(threads, std::max(1LL, total_jobs)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);

    const FrameDims dims = config.dims();
    const long long spatial_bits = group_spatial_bits(dims);
    const long long signal_bits = group_signal_bits(dims, config.L);
    std::vector<BerRecord> records;
    for (std::size_t s = 0; s < n_snr; ++s)
        for (std::size_t d = 0; d < n_det; ++d) {
            const Acc& a = acc[s * n_det + d];
            BerRecord r;
            r.snr_db = config.snr_grid_db[s];
            r.detector = to_string(config.detectors[d]);
            r.trials = a.trials;
            r.spatial_bits = a.trials * spatial_bits;
            r.signal_bits = a.trials * signal_bits;
            r.total_bits = r.spatial_bits + r.signal_bits;
            r.spatial_bit_errors = a.spatial_errors;
            r.signal_bit_errors = a.signal_errors;
            r.total_bit_errors = a.spatial_errors + a.signal_errors;
            const double nan = std::nan("");
            r.ber = r.total_bits > 0 ? static_cast<double>(r.total_bit_errors) / static_cast<double>(r.total_bits) : nan;
            r.spatial_ber = r.spatial_bits > 0 ? static_cast<double>(r.spatial_bit_errors) / static_cast<double>(r.spatial_bits)
                                               : (r.trials > 0 ? 0.0 : nan);
            r.signal_ber = r.signal_bits > 0 ? static_cast<double>(r.signal_bit_errors) / static_cast<double>(r.signal_bits) : nan;
            r.seed = config.seed;
            r.skip_reason = a.skip_reason;
            records.push_back(std::move(r));
        }
    std::stable_sort(records.begin(), records.end(), [](const BerRecord& a, const BerRecord& b) {
        if (a.snr_db != b.snr_db) return a.snr_db < b.snr_db;
        return a.detector < b.detector;
    });
    return records;
}

void emit_csv(const std::vector<BerRecord>& records, std::ostream& out)
{
    if (records.empty()) throw std::invalid_argument("emit_csv: no records");
    std::vector<const BerRecord*> rows;
    for (const auto& r : records) rows.push_back(&r);
    std::stable_sort(rows.begin(), rows.end(), [](const BerRecord* a, const BerRecord* b) {
        if (a->snr_db != b->snr_db) return a->snr_db < b->snr_db;
        return a->detector < b->detector;
    });
    out << kCsvHeader << '\n';
    for (const auto* r : rows) {
        out << format_real(r->snr_db) << ',' << r->detector << ',' << r->trials << ',' << r->total_bits << ','
            << r->spatial_bit_errors << ',' << r->signal_bit_errors << ',' << r->total_bit_errors << ','
            << format_real(r->ber) << ',' << format_real(r->spatial_ber) << ',' << format_real(r->signal_ber) << ','
            << r->seed << '\n';
    }
    if (!out) throw std::runtime_error("emit_csv: write failed");
}

void emit_csv(const std::vector<BerRecord>& records, const std::filesystem::path& destination)
{
    std::ofstream out(destination, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("emit_csv: cannot open " + destination.string() + " for writing");
    emit_csv(records, out);
    out.close();
    if (!out) throw std::runtime_error("emit_csv: failed writing " + destination.string());
}

}  // namespace smsim
