#pragma once

// Discrete finite-random-set calculus over the power set of a finite user
// universe: state indexing, densities stored in the log domain, belief
// functions, Moebius inversion, set integrals and the union convolution.

#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rsmud {

using Mask = std::uint32_t;

inline constexpr int kMaxUsers = 16;
inline constexpr std::size_t kMaxTableEntries = std::size_t{1} << 26;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Raised when a filter or normalization step ends with no finite mass.
class NumericalCollapse : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Subset of the K interferers. Bit i set means interferer i+1 is active.
struct ActiveSet {
    Mask bits = 0;

    [[nodiscard]] int size() const { return std::popcount(bits); }
    [[nodiscard]] bool contains(int user) const { return ((bits >> user) & 1U) != 0; }
    [[nodiscard]] bool subset_of(ActiveSet other) const { return (bits & ~other.bits) == 0; }
    [[nodiscard]] ActiveSet operator&(ActiveSet o) const { return {bits & o.bits}; }
    [[nodiscard]] ActiveSet operator|(ActiveSet o) const { return {bits | o.bits}; }
    [[nodiscard]] ActiveSet minus(ActiveSet o) const { return {bits & ~o.bits}; }

    auto operator<=>(const ActiveSet&) const = default;
};

/// Active set plus the data it carries in one slot.
///
/// `data` packs N antipodal symbols per active user, users taken in ascending
/// index order, little-endian: symbol k of the j-th active user lives at bit
/// j*N + k. A clear bit is the symbol +1, a set bit is -1. `ref_bit` follows
/// the same convention for the always-active reference user.
struct SlotState {
    ActiveSet active;
    std::uint32_t data = 0;
    std::optional<int> ref_bit;

    auto operator<=>(const SlotState&) const = default;
};

/// Antipodal value of a packed bit.
[[nodiscard]] inline int antipodal(std::uint32_t bit) { return bit ? -1 : 1; }

/// Shape of a slot state space: K interferers, N data symbols per user per
/// slot (N = 0 means identities only) and an optional reference user whose
/// single unknown bit doubles the space.
///
/// Canonical ordering is mask-major: all states of mask m precede those of
/// mask m+1; inside a mask, data patterns ascend; the reference bit is the
/// least significant component.
class Universe {
public:
    Universe() : Universe(0, 0, false) {}
    Universe(int users, int symbols, bool reference = false);

    [[nodiscard]] int users() const { return users_; }
    [[nodiscard]] int symbols() const { return symbols_; }
    [[nodiscard]] bool reference() const { return reference_; }
    [[nodiscard]] std::size_t mask_count() const { return std::size_t{1} << users_; }
    [[nodiscard]] Mask full_mask() const { return static_cast<Mask>(mask_count() - 1); }
    [[nodiscard]] std::size_t state_count() const { return state_count_; }

    /// Number of data patterns carried by a given active set.
    [[nodiscard]] std::size_t patterns(ActiveSet a) const {
        return std::size_t{1} << (symbols_ * a.size());
    }
    /// First canonical index of the states with mask `a`.
    [[nodiscard]] std::size_t first_index(ActiveSet a) const { return offsets_[a.bits] * ref_factor(); }
    /// Number of canonical indices owned by mask `a`.
    [[nodiscard]] std::size_t block_size(ActiveSet a) const { return patterns(a) * ref_factor(); }

    [[nodiscard]] std::size_t index(const SlotState& s) const;
    [[nodiscard]] SlotState state(std::size_t index) const;
    [[nodiscard]] ActiveSet mask_of(std::size_t index) const;

    /// The same universe with identities only and no reference user.
    [[nodiscard]] Universe identities() const { return Universe(users_, 0, false); }

    bool operator==(const Universe& o) const {
        return users_ == o.users_ && symbols_ == o.symbols_ && reference_ == o.reference_;
    }

private:
    [[nodiscard]] std::size_t ref_factor() const { return reference_ ? 2 : 1; }

    int users_;
    int symbols_;
    bool reference_;
    std::vector<std::size_t> offsets_;  // offsets_[m] = sum_{m' < m} 2^{N|m'|}
    std::size_t state_count_;
};

/// Data bits of `s` restricted to the members of `sub` (sub must be a subset
/// of s.active), repacked in ascending order.
[[nodiscard]] std::uint32_t restrict_data(const SlotState& s, ActiveSet sub, int symbols);

/// Inverse of restrict_data for two disjoint parts of `whole`.
[[nodiscard]] std::uint32_t merge_data(ActiveSet part_a, std::uint32_t data_a, ActiveSet part_b,
                                       std::uint32_t data_b, int symbols);

/// Normalized probability table over every state of a universe, kept as
/// log-probabilities. Immutable once constructed.
class SetDensity {
public:
    /// Takes an already normalized log table; use `normalize` otherwise.
    SetDensity(Universe universe, std::vector<double> log_mass);

    [[nodiscard]] const Universe& universe() const { return universe_; }
    [[nodiscard]] const std::vector<double>& log_mass() const { return log_mass_; }
    [[nodiscard]] double log_mass(std::size_t i) const { return log_mass_[i]; }
    [[nodiscard]] double mass(std::size_t i) const;
    [[nodiscard]] double mass(const SlotState& s) const { return mass(universe_.index(s)); }
    [[nodiscard]] std::size_t size() const { return log_mass_.size(); }

    /// Lowest canonical index among the maximizers.
    [[nodiscard]] std::size_t argmax() const;

    /// Identity marginal: sums out data and reference bits.
    [[nodiscard]] std::vector<double> mask_marginal() const;

private:
    Universe universe_;
    std::vector<double> log_mass_;
};

/// Normalizes a log-mass table with a max-shifted log-sum-exp.
/// Throws NumericalCollapse when no entry is finite.
[[nodiscard]] SetDensity normalize(const Universe& universe, std::vector<double> log_unnormalized);

/// Point mass on one state.
[[nodiscard]] SetDensity point_mass(const Universe& universe, const SlotState& s);

/// Uniform density over all states.
[[nodiscard]] SetDensity uniform_density(const Universe& universe);

/// Discrete set integral of a density over the whole universe: the empty set
/// term plus, for each k, 1/k! times the sum over ordered k-tuples of distinct
/// elements. With a finite universe every unordered set appears k! times, so
/// this is the plain table sum.
[[nodiscard]] double set_integral(const SetDensity& f);

/// beta(S) = P(X subset of S) for every S in 2^K.
class BeliefTable {
public:
    BeliefTable(Universe universe, std::vector<double> values);

    [[nodiscard]] const Universe& universe() const { return universe_; }
    [[nodiscard]] const std::vector<double>& values() const { return values_; }
    [[nodiscard]] double operator()(ActiveSet s) const { return values_[s.bits]; }

private:
    Universe universe_;
    std::vector<double> values_;
};

/// Subset-sum (zeta) transform. Identity-only densities (N = 0, no
/// reference user) only.
[[nodiscard]] BeliefTable belief_from_density(const SetDensity& f);

/// Moebius inversion f(A) = sum_{B subset A} (-1)^{|A \ B|} beta(B).
/// Throws std::invalid_argument if any recovered mass is below -1e-9.
[[nodiscard]] SetDensity density_from_belief(const BeliefTable& beta);

/// Density of the union of two independent random sets with disjoint ground
/// sets. Output mass at C is f_s(C & ground_s) * f_n(C & ground_n), zero when
/// C leaves ground_s | ground_n. Data bits, when present, are split between
/// the two parts. Throws std::invalid_argument if the ground sets overlap or
/// either density puts mass outside its ground set.
[[nodiscard]] SetDensity convolve_union(const SetDensity& survivors, ActiveSet ground_s,
                                        const SetDensity& newborns, ActiveSet ground_n);

/// JSON text {"K":..,"N":..,"log_mass":[..]} in canonical order; -inf is
/// written as null. "reference": true is added only for reference universes.
[[nodiscard]] std::string to_json(const SetDensity& f);
[[nodiscard]] SetDensity density_from_json(const std::string& text);

/// log(p^n) with the convention 0^0 = 1.
[[nodiscard]] inline double log_pow(double p, int n) {
    if (n == 0) return 0.0;
    return p <= 0.0 ? kNegInf : n * std::log(p);
}

}  // namespace rsmud
