// SPDX-License-Identifier: Apache-2.0
//
// Seeded Monte Carlo runner: configuration, one-trial simulation, SNR sweeps
// with bit-error accounting, and CSV output.
//
// Every random draw of a trial comes from a stream seeded by
// derive_seed(seed, {snr_index, trial_index, stream}), so results do not depend
// on thread count or scheduling.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "smsim/channel.hpp"
#include "smsim/detectors.hpp"
#include "smsim/modem.hpp"

namespace smsim {

enum class DetectorKind { Gsp, Sp, Mmse, Oracle, Ml };

std::string to_string(DetectorKind kind);
DetectorKind parse_detector(std::string_view name);
/// Comma-separated detector names; duplicates are dropped.
std::vector<DetectorKind> parse_detector_list(std::string_view list);

enum class ChannelRedraw { PerBlock, PerGroup };

std::string to_string(ChannelRedraw mode);
ChannelRedraw parse_channel_redraw(std::string_view name);

/// "start:step:stop" (inclusive) or a comma list of SNR values in dB.
std::vector<double> parse_snr_grid(std::string_view text);

struct SimConfig {
    int M = 64;
    int M_RF = 18;
    int K = 8;
    int n_t = 4;
    int L = 64;
    int P = 8;
    int Q = 64;
    int J = 2;
    double rho_bs = 0.5;
    double rho_us = 0.0;
    AeScheme ae_scheme = AeScheme::Direct;
    int phi = 1;
    std::vector<DetectorKind> detectors{DetectorKind::Gsp};
    std::vector<double> snr_grid_db{0.0, 5.0, 10.0, 15.0, 20.0};
    long long trials = 100;
    std::uint64_t seed = 1;
    ChannelRedraw channel_redraw = ChannelRedraw::PerBlock;

    FrameDims dims() const { return FrameDims{K, Q, J, n_t}; }
    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const;
};

/// Sets one field from its textual value; unknown keys are rejected.
void set_config_value(SimConfig& config, std::string_view key, std::string_view value);

/// `key = value` lines, '#' starts a comment. Keys mirror SimConfig field names;
/// fields not mentioned keep their defaults. Repeated or unknown keys are rejected.
SimConfig parse_config(std::istream& in);
SimConfig load_config(const std::filesystem::path& path);

struct ErrorCounts {
    long long spatial = 0;
    long long signal = 0;

    long long total() const noexcept { return spatial + signal; }
    friend bool operator==(const ErrorCounts&, const ErrorCounts&) = default;
};

/// Spatial errors: Hamming distance of antenna labels, once per (k, q).
/// Signal errors: Hamming distance of point labels, per (j, k, q).
ErrorCounts count_bit_errors(const GroupFrame& tx, const DetectionResult& rx, const SignalConstellation& constellation);

struct DetectorOutcome {
    DetectorKind detector = DetectorKind::Gsp;
    bool skipped = false;
    std::string skip_reason;
    ErrorCounts errors;
    DetectionDiagnostics diagnostics;
};

struct TrialOutcome {
    int snr_index = 0;
    long long trial_index = 0;
    long long spatial_bits = 0;
    long long signal_bits = 0;
    std::vector<DetectorOutcome> detectors;  // in config order
};

/// Everything a trial observes: payload frame, effective channels and received blocks.
struct TrialDraw {
    GroupFrame frame;
    std::vector<EffectiveChannel> channels;
    std::vector<CVector> received;
    double noise_variance = 0.0;
};

enum class Stream : std::uint64_t { Payload = 1, Channel = 2, AeSelection = 3, Noise = 4 };

/// Caches the per-config state (constellation, correlation square roots) so
/// repeated trials only pay for their own draws.
class TrialRunner {
public:
    explicit TrialRunner(SimConfig config);

    const SimConfig& config() const noexcept { return config_; }
    const SignalConstellation& constellation() const noexcept { return constellation_; }

    TrialDraw draw(int snr_index, long long trial_index) const;
    TrialOutcome run(int snr_index, long long trial_index) const;

private:
    SimConfig config_;
    SignalConstellation constellation_;
    ChannelGenerator generator_;
};

TrialOutcome run_trial(const SimConfig& config, int snr_index, long long trial_index);

struct BerRecord {
    double snr_db = 0.0;
    std::string detector;
    long long trials = 0;
    long long total_bits = 0;
    long long spatial_bits = 0;
    long long signal_bits = 0;
    long long spatial_bit_errors = 0;
    long long signal_bit_errors = 0;
    long long total_bit_errors = 0;
    double ber = 0.0;
    double spatial_ber = 0.0;
    double signal_ber = 0.0;
    std::uint64_t seed = 0;
    std::string skip_reason;  // non-empty when some or all trials were skipped
};

/// Aggregates config.trials trials per SNR point and detector. `threads` = 0
/// uses the hardware concurrency. Records are sorted by SNR, then detector name.
std::vector<BerRecord> run_sweep(const SimConfig& config, unsigned threads = 0);

void emit_csv(const std::vector<BerRecord>& records, std::ostream& out);
/// Throws std::runtime_error when the destination cannot be written.
void emit_csv(const std::vector<BerRecord>& records, const std::filesystem::path& destination);

inline constexpr std::string_view kCsvHeader =
    "snr_db,detector,trials,total_bits,spatial_bit_errors,signal_bit_errors,total_bit_errors,ber,spatial_ber,"
    "signal_ber,seed";

}  // namespace smsim
