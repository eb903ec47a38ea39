// SPDX-License-Identifier: Apache-2.0

#include "smsim/modem.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace smsim {

namespace {

std::uint32_t bits_value(std::span<const std::uint8_t> bits)
{
    std::uint32_t v = 0;
    for (const auto b : bits) {
        if (b > 1) throw std::invalid_argument("bit values must be 0 or 1");
        v = (v << 1) | b;
    }
    return v;
}

void append_bits(Bits& out, std::uint32_t value, int width)
{
    for (int i = width - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>((value >> i) & 1u));
}

std::uint32_t gray_decode(std::uint32_t g)
{
    std::uint32_t v = g;
    for (std::uint32_t shift = g >> 1; shift != 0; shift >>= 1) v ^= shift;
    return v;
}

// Amplitude of a Gray-labelled axis level; label 0 maps to +(side - 1).
double axis_amplitude(std::uint32_t label, int side)
{
    const auto level = static_cast<int>(gray_decode(label));
    return static_cast<double>(side - 1 - 2 * level);
}

void check_dims(const FrameDims& d)
{
    if (d.K < 1 || d.Q < 1 || d.J < 1 || d.n_t < 1)
        throw std::invalid_argument("frame dimensions K, Q, J, n_t must be positive");
    if (!is_power_of_two(d.n_t)) throw std::invalid_argument("n_t must be a power of two");
}

}  // namespace

bool is_power_of_two(long long v) noexcept { return v > 0 && (v & (v - 1)) == 0; }

int exact_log2(long long v)
{
    if (!is_power_of_two(v)) throw std::invalid_argument(std::to_string(v) + " is not a positive power of two");
    return std::countr_zero(static_cast<unsigned long long>(v));
}

Bits bits_from_string(std::string_view s)
{
    Bits out;
    out.reserve(s.size());
    for (const char c : s) {
        if (c != '0' && c != '1') throw std::invalid_argument("bit string may only contain '0' and '1'");
        out.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return out;
}

std::string bits_to_string(std::span<const std::uint8_t> bits)
{
    std::string s;
    s.reserve(bits.size());
    for (const auto b : bits) s.push_back(b ? '1' : '0');
    return s;
}

SignalConstellation::SignalConstellation(std::vector<cplx> points, int bits_per_symbol)
    : points_(std::move(points)), bits_per_symbol_(bits_per_symbol)
{
}

SignalConstellation SignalConstellation::build(int order)
{
    if (std::find(std::begin(kSupportedOrders), std::end(kSupportedOrders), order) == std::end(kSupportedOrders))
        throw std::invalid_argument("unsupported constellation order " + std::to_string(order) +
                                    "; supported orders are 2 (BPSK), 4, 16, 64, 256 (square QAM)");

    const int nbits = exact_log2(order);
    std::vector<cplx> pts(static_cast<std::size_t>(order));
    if (order == 2) {
        pts[0] = {1.0, 0.0};
        pts[1] = {-1.0, 0.0};
        return SignalConstellation(std::move(pts), nbits);
    }

    const int half = nbits / 2;
    const int side = 1 << half;
    // Mean energy of the unnormalized grid {±1, ±3, ...}^2 is 2 (L - 1) / 3.
    const double scale = 1.0 / std::sqrt(2.0 * (order - 1) / 3.0);
    const std::uint32_t mask = (1u << half) - 1u;
    for (std::uint32_t label = 0; label < static_cast<std::uint32_t>(order); ++label) {
        const double re = axis_amplitude(label >> half, side);
        const double im = axis_amplitude(label & mask, side);
        pts[label] = cplx(re, im) * scale;
    }
    return SignalConstellation(std::move(pts), nbits);
}

std::uint32_t SignalConstellation::label(int index) const
{
    if (index < 0 || index >= order())
        throw std::out_of_range("point index " + std::to_string(index) + " outside [0, " + std::to_string(order()) + ")");
    return static_cast<std::uint32_t>(index);
}

Bits SignalConstellation::label_bits(int index) const
{
    Bits out;
    append_bits(out, label(index), bits_per_symbol_);
    return out;
}

int SignalConstellation::index_of_label(std::uint32_t lab) const
{
    if (lab >= static_cast<std::uint32_t>(order())) throw std::out_of_range("label outside constellation");
    return static_cast<int>(lab);
}

Bits antenna_bits(int antenna, int n_t)
{
    const int width = exact_log2(n_t);
    if (antenna < 1 || antenna > n_t)
        throw std::out_of_range("antenna " + std::to_string(antenna) + " outside [1, " + std::to_string(n_t) + "]");
    Bits out;
    append_bits(out, static_cast<std::uint32_t>(antenna - 1), width);
    return out;
}

SmSymbol sm_map(std::span<const std::uint8_t> bits, int n_t, const SignalConstellation& constellation)
{
    const int spatial = exact_log2(n_t);
    const auto expected = static_cast<std::size_t>(spatial + constellation.bits_per_symbol());
    if (bits.size() != expected)
        throw std::invalid_argument("sm_map: expected " + std::to_string(expected) + " bits, got " +
                                    std::to_string(bits.size()));
    SmSymbol s;
    s.antenna = 1 + static_cast<int>(bits_value(bits.first(static_cast<std::size_t>(spatial))));
    s.point_index = constellation.index_of_label(bits_value(bits.subspan(static_cast<std::size_t>(spatial))));
    return s;
}

Bits sm_demap(const SmSymbol& symbol, int n_t, const SignalConstellation& constellation)
{
    Bits out = antenna_bits(symbol.antenna, n_t);
    const Bits sig = constellation.label_bits(symbol.point_index);
    out.insert(out.end(), sig.begin(), sig.end());
    return out;
}

long long group_spatial_bits(const FrameDims& d)
{
    return static_cast<long long>(d.K) * d.Q * exact_log2(d.n_t);
}

long long group_signal_bits(const FrameDims& d, int L)
{
    return static_cast<long long>(d.J) * d.K * d.Q * exact_log2(L);
}

long long group_payload_bits(const FrameDims& d, int L) { return group_spatial_bits(d) + group_signal_bits(d, L); }

GroupFrame::GroupFrame(FrameDims dims, std::vector<SmSymbol> symbols, Bits source_bits)
    : dims_(dims), symbols_(std::move(symbols)), source_bits_(std::move(source_bits))
{
    check_dims(dims_);
    if (symbols_.size() != static_cast<std::size_t>(dims_.J) * dims_.segments())
        throw std::invalid_argument("GroupFrame: symbol count does not match J * Q * K");
    for (int q = 0; q < dims_.Q; ++q)
        for (int k = 0; k < dims_.K; ++k) {
            const int a = at(0, q, k).antenna;
            if (a < 1 || a > dims_.n_t) throw std::invalid_argument("GroupFrame: antenna index out of range");
            for (int j = 1; j < dims_.J; ++j)
                if (at(j, q, k).antenna != a)
                    throw std::invalid_argument("GroupFrame: spatial symbol differs across blocks of one group");
        }
}

const SmSymbol& GroupFrame::at(int j, int q, int k) const
{
    if (j < 0 || j >= dims_.J || q < 0 || q >= dims_.Q || k < 0 || k >= dims_.K)
        throw std::out_of_range("GroupFrame::at index out of range");
    return symbols_[static_cast<std::size_t>((j * dims_.Q + q) * dims_.K + k)];
}

GroupFrame assemble_group(std::span<const std::uint8_t> bits, const FrameDims& dims,
                          const SignalConstellation& constellation)
{
    check_dims(dims);
    const long long expected = group_payload_bits(dims, constellation.order());
    if (static_cast<long long>(bits.size()) != expected)
        throw std::invalid_argument("assemble_group: payload has " + std::to_string(bits.size()) +
                                    " bits, expected " + std::to_string(expected));

    const auto sb = static_cast<std::size_t>(exact_log2(dims.n_t));
    const auto lb = static_cast<std::size_t>(constellation.bits_per_symbol());
    const auto segs = static_cast<std::size_t>(dims.segments());

    std::vector<SmSymbol> symbols(static_cast<std::size_t>(dims.J) * segs);
    for (std::size_t s = 0; s < segs; ++s) {
        const int antenna = 1 + static_cast<int>(bits_value(bits.subspan(s * sb, sb)));
        for (int j = 0; j < dims.J; ++j) symbols[static_cast<std::size_t>(j) * segs + s].antenna = antenna;
    }
    const std::size_t signal_base = segs * sb;
    for (std::size_t i = 0; i < symbols.size(); ++i)
        symbols[i].point_index = constellation.index_of_label(bits_value(bits.subspan(signal_base + i * lb, lb)));

    return GroupFrame(dims, std::move(symbols), Bits(bits.begin(), bits.end()));
}

Bits disassemble_group(const GroupFrame& frame, const SignalConstellation& constellation)
{
    const auto& d = frame.dims();
    Bits out;
    out.reserve(static_cast<std::size_t>(group_payload_bits(d, constellation.order())));
    for (int q = 0; q < d.Q; ++q)
        for (int k = 0; k < d.K; ++k) {
            const Bits a = antenna_bits(frame.at(0, q, k).antenna, d.n_t);
            out.insert(out.end(), a.begin(), a.end());
        }
    for (int j = 0; j < d.J; ++j)
        for (int q = 0; q < d.Q; ++q)
            for (int k = 0; k < d.K; ++k) {
                const Bits b = constellation.label_bits(frame.at(j, q, k).point_index);
                out.insert(out.end(), b.begin(), b.end());
            }
    return out;
}

CVector aggregate_vector(const GroupFrame& frame, int j, const SignalConstellation& constellation)
{
    const auto& d = frame.dims();
    CVector x = CVector::Zero(d.aggregate_size());
    for (int q = 0; q < d.Q; ++q)
        for (int k = 0; k < d.K; ++k) {
            const SmSymbol& s = frame.at(j, q, k);
            x[(q * d.K + k) * d.n_t + (s.antenna - 1)] = constellation.point(s.point_index);
        }
    return x;
}

Throughput throughput_bpcu(int K, int n_t, int L, int J)
{
    if (K < 1 || J < 1) throw std::invalid_argument("throughput_bpcu: K and J must be positive");
    const long long num = static_cast<long long>(J) * exact_log2(L) + exact_log2(n_t);
    const long long g = std::gcd(num, static_cast<long long>(J));
    Rational per_user{num / g, J / g};
    Rational overall{per_user.num * K, per_user.den};
    const long long g2 = std::gcd(overall.num, overall.den);
    overall.num /= g2;
    overall.den /= g2;
    return {per_user, overall};
}

}  // namespace smsim
