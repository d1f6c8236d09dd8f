#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "rsmud/channel.hpp"

namespace rsmud {

namespace {

/// Raw 0/1 output of a Fibonacci LFSR with initial fill 0..01, one full period.
std::vector<int> lfsr_bits(int degree, std::uint32_t taps) {
    if (degree < 2 || degree > 24) throw std::invalid_argument("msequence: degree must lie in [2, 24]");
    if (((taps >> degree) & 1U) == 0 || (taps & 1U) == 0 || (taps >> (degree + 1)) != 0)
        throw std::invalid_argument("msequence: taps must have degree " + std::to_string(degree) +
                                    " and a constant term");
    const std::size_t period = (std::size_t{1} << degree) - 1;
    // s_{k+n} = sum_{i<n} c_i s_{k+i}; the state holds s_k..s_{k+n-1} in bits 0..n-1.
    const std::uint32_t feedback = taps & ((1U << degree) - 1U);
    const std::uint32_t start = 1U;
    std::uint32_t state = start;
    std::vector<int> out;
    out.reserve(period);
    for (std::size_t k = 0; k < period; ++k) {
        out.push_back(static_cast<int>(state & 1U));
        const std::uint32_t next = static_cast<std::uint32_t>(std::popcount(state & feedback) & 1);
        state = (state >> 1) | (next << (degree - 1));
        if (state == start && k + 1 < period)
            throw std::invalid_argument("msequence: taps are not primitive (period " + std::to_string(k + 1) + ")");
    }
    if (state != start) throw std::invalid_argument("msequence: taps are not primitive");
    return out;
}

Eigen::VectorXd to_antipodal(const std::vector<int>& bits) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(bits.size()));
    for (std::size_t i = 0; i < bits.size(); ++i) v[static_cast<Eigen::Index>(i)] = bits[i] ? -1.0 : 1.0;
    return v / std::sqrt(static_cast<double>(bits.size()));
}

int degree_for_length(int length) {
    for (int n = 2; n <= 16; ++n)
        if ((1 << n) - 1 == length) return n;
    throw std::invalid_argument("signatures: length must be 2^n - 1");
}

}  // namespace

std::uint32_t default_primitive_taps(int degree) {
    static constexpr std::array<std::uint32_t, 17> table = {
        0,       0,      0x7,    0xB,    0x13,   0x25,   0x43,   0x83,    0x11D,
        0x211,   0x409,  0x805,  0x1053, 0x201B, 0x4443, 0x8003, 0x1100B,
    };
    if (degree < 2 || degree > 16) throw std::invalid_argument("no default primitive polynomial for this degree");
    return table[static_cast<std::size_t>(degree)];
}

Eigen::VectorXd gen_msequence(int degree, std::uint32_t taps, int shift) {
    std::vector<int> bits = lfsr_bits(degree, taps);
    const auto len = static_cast<int>(bits.size());
    const int s = ((shift % len) + len) % len;
    std::rotate(bits.begin(), bits.begin() + s, bits.end());
    return to_antipodal(bits);
}

std::vector<Eigen::VectorXd> gen_kasami_small_set(int n) {
    if (n < 2 || n % 2 != 0) throw std::invalid_argument("kasami: degree must be even");
    const std::vector<int> u = lfsr_bits(n, default_primitive_taps(n));
    const std::size_t len = u.size();
    const std::size_t q = (std::size_t{1} << (n / 2)) + 1;
    const std::size_t short_period = (std::size_t{1} << (n / 2)) - 1;
    std::vector<int> w(len);
    for (std::size_t k = 0; k < len; ++k) w[k] = u[(q * k) % len];

    std::vector<Eigen::VectorXd> family;
    family.push_back(to_antipodal(u));
    for (std::size_t j = 0; j < short_period; ++j) {
        std::vector<int> member(len);
        for (std::size_t k = 0; k < len; ++k) member[k] = u[k] ^ w[(k + j) % len];
        family.push_back(to_antipodal(member));
    }
    return family;
}

SpreadingFamily parse_spreading(const std::string& name) {
    if (name == "msequence") return SpreadingFamily::msequence;
    if (name == "kasami") return SpreadingFamily::kasami;
    throw std::invalid_argument("unknown spreading family '" + name + "' (msequence|kasami)");
}

std::string to_string(SpreadingFamily f) { return f == SpreadingFamily::kasami ? "kasami" : "msequence"; }

SignatureSet make_signatures(SpreadingFamily family, int length, int count, bool reference,
                             std::span<const int> order) {
    const int degree = degree_for_length(length);
    const auto family_size = [&]() -> int {
        if (family == SpreadingFamily::kasami) {
            if (degree % 2 != 0) throw std::invalid_argument("kasami: length must be 2^n - 1 with n even");
            return 1 << (degree / 2);
        }
        return length;
    }();
    if (count < 1 || count > family_size)
        throw std::invalid_argument("signatures: " + std::to_string(count) + " users exceed family size " +
                                    std::to_string(family_size));

    std::vector<int> members;
    if (!order.empty()) {
        if (static_cast<int>(order.size()) != count)
            throw std::invalid_argument("signatures: order must list one family member per user");
        members.assign(order.begin(), order.end());
    } else {
        const int interferers = reference ? count - 1 : count;
        if (reference) members.push_back(interferers);
        for (int i = 0; i < interferers; ++i) members.push_back(i);
    }
    for (std::size_t i = 0; i < members.size(); ++i) {
        if (members[i] < 0 || members[i] >= family_size)
            throw std::invalid_argument("signatures: family member index out of range");
        if (std::count(members.begin(), members.end(), members[i]) > 1)
            throw std::invalid_argument("signatures: duplicate family member");
    }

    SignatureSet out;
    out.length = length;
    if (family == SpreadingFamily::kasami) {
        const auto fam = gen_kasami_small_set(degree);
        for (int m : members) out.chips.push_back(fam[static_cast<std::size_t>(m)]);
    } else {
        const std::uint32_t taps = default_primitive_taps(degree);
        for (int m : members) out.chips.push_back(gen_msequence(degree, taps, m));
    }
    return out;
}

void write_signatures(std::ostream& out, const SignatureSet& s) {
    for (const auto& c : s.chips) {
        for (Eigen::Index k = 0; k < c.size(); ++k) out << (k ? " " : "") << (c[k] > 0 ? "+1" : "-1");
        out << '\n';
    }
}

}  // namespace rsmud
