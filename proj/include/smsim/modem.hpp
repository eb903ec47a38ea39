// SPDX-License-Identifier: Apache-2.0
//
// Spatial-modulation mapping: signal constellations, the bits -> (active antenna,
// constellation point) map, and joint framing of J CPSC blocks that share one
// spatial symbol per (user, slot).
//
// Bit strings are MSB-first sequences of 0/1 bytes. Antenna indices are
// 1-based, point indices 0-based.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smsim/numerics.hpp"

namespace smsim {

using Bits = std::vector<std::uint8_t>;

bool is_power_of_two(long long v) noexcept;
/// log2 of a positive power of two; throws std::invalid_argument otherwise.
int exact_log2(long long v);

/// Parses "0101" style strings; any other character is rejected.
Bits bits_from_string(std::string_view s);
std::string bits_to_string(std::span<const std::uint8_t> bits);

/// Unit average-energy BPSK or square QAM with per-axis Gray labels.
///
/// Point i carries bit label i (MSB first). For square QAM the high half of the
/// label selects the in-phase level and the low half the quadrature level; on
/// each axis an all-zero label sits at the most positive amplitude.
class SignalConstellation {
public:
    static constexpr int kSupportedOrders[] = {2, 4, 16, 64, 256};

    static SignalConstellation build(int order);

    int order() const noexcept { return static_cast<int>(points_.size()); }
    int bits_per_symbol() const noexcept { return bits_per_symbol_; }
    const std::vector<cplx>& points() const noexcept { return points_; }
    cplx point(int index) const { return points_.at(static_cast<std::size_t>(index)); }
    std::uint32_t label(int index) const;
    Bits label_bits(int index) const;
    int index_of_label(std::uint32_t label) const;

private:
    SignalConstellation(std::vector<cplx> points, int bits_per_symbol);

    std::vector<cplx> points_;
    int bits_per_symbol_;
};

/// One user's per-slot transmission: e_k s_k with a single active antenna.
struct SmSymbol {
    int antenna = 1;
    int point_index = 0;

    friend bool operator==(const SmSymbol&, const SmSymbol&) = default;
};

/// Maps log2(n_t) + log2(L) bits: the leading bits pick the antenna in natural
/// binary (antenna = 1 + value), the rest pick the constellation point.
SmSymbol sm_map(std::span<const std::uint8_t> bits, int n_t, const SignalConstellation& constellation);
Bits sm_demap(const SmSymbol& symbol, int n_t, const SignalConstellation& constellation);

/// Natural-binary label of a 1-based antenna index.
Bits antenna_bits(int antenna, int n_t);

/// Frame dimensions shared by the modem, channel and detectors.
struct FrameDims {
    int K = 1;    // users
    int Q = 1;    // slots per CPSC block
    int J = 1;    // blocks per transmission group
    int n_t = 1;  // transmit antennas per user

    int segments() const noexcept { return K * Q; }
    int aggregate_size() const noexcept { return K * Q * n_t; }
    friend bool operator==(const FrameDims&, const FrameDims&) = default;
};

/// Bits carried by one group: K Q log2(n_t) spatial bits plus J K Q log2(L) signal bits.
long long group_payload_bits(const FrameDims& dims, int L);
long long group_spatial_bits(const FrameDims& dims);
long long group_signal_bits(const FrameDims& dims, int L);

/// J blocks x Q slots x K users of SM symbols with one antenna per (k, q)
/// shared across all J blocks.
class GroupFrame {
public:
    GroupFrame(FrameDims dims, std::vector<SmSymbol> symbols, Bits source_bits);

    const FrameDims& dims() const noexcept { return dims_; }
    // j, q, k are 0-based.
    const SmSymbol& at(int j, int q, int k) const;
    const std::vector<SmSymbol>& symbols() const noexcept { return symbols_; }
    const Bits& source_bits() const noexcept { return source_bits_; }

private:
    FrameDims dims_;
    std::vector<SmSymbol> symbols_;  // index (j * Q + q) * K + k
    Bits source_bits_;
};

/// Payload layout: all K Q spatial fields first (slot-major, user-minor), then
/// the signal fields of block 1, block 2, ... in the same (q, k) order.
GroupFrame assemble_group(std::span<const std::uint8_t> bits, const FrameDims& dims,
                          const SignalConstellation& constellation);

/// Inverse of assemble_group.
Bits disassemble_group(const GroupFrame& frame, const SignalConstellation& constellation);

/// Stacked aggregate vector of block j: [x_1; ...; x_Q], x_q = [x_{1,q}; ...; x_{K,q}].
CVector aggregate_vector(const GroupFrame& frame, int j, const SignalConstellation& constellation);

struct Rational {
    long long num = 0;
    long long den = 1;

    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
    friend bool operator==(const Rational&, const Rational&) = default;
};

struct Throughput {
    Rational per_user;
    Rational overall;
};

/// bpcu with the spatial bits amortized over the J blocks of a group.
Throughput throughput_bpcu(int K, int n_t, int L, int J);

}  // namespace smsim
