#pragma once

#include "rsmud/rng.hpp"
#include "rsmud/rst.hpp"

namespace rsmud {

/// Birth/death model of the random set of active interferers.
///
/// Each inactive user becomes active with probability alpha, each active user
/// stays active with probability mu, independently across users. With N data
/// symbols per slot every active user draws fresh uniform bits each slot.
struct TrafficModel {
    int users = 0;
    double alpha = 0.0;
    double mu = 0.0;
    int symbols = 0;

    void validate() const;
    [[nodiscard]] Universe universe() const { return Universe(users, symbols, false); }
};

/// Product prior with per-user activity `activity`, times 2^{-N|B|} per data
/// pattern.
[[nodiscard]] SetDensity product_prior(int users, int symbols, double activity);

/// f(B) = alpha^{|B|} (1-alpha)^{K-|B|} 2^{-N|B|}.
[[nodiscard]] SetDensity static_prior(const TrafficModel& m);

/// Survivors of B: mu^{|C|}(1-mu)^{|B|-|C|} on C subset of B.
[[nodiscard]] SetDensity survival_kernel(const TrafficModel& m, ActiveSet from);

/// Newborns given B: alpha^{|C|}(1-alpha)^{K-|B|-|C|} on C disjoint from B.
[[nodiscard]] SetDensity birth_kernel(const TrafficModel& m, ActiveSet from);

/// f(C | B), the union of survivors and newborns.
[[nodiscard]] SetDensity transition_density(const TrafficModel& m, ActiveSet from);

/// Identity-level closed form log f(C | B) without data factors.
[[nodiscard]] double log_transition(const TrafficModel& m, ActiveSet from, ActiveSet to);

/// alpha / (1 + alpha - mu). Throws std::domain_error for the absorbing
/// chain mu = 1, alpha = 0.
[[nodiscard]] double stationary_activity(const TrafficModel& m);

/// Default distribution of X_0: independent users at the stationary
/// activity, falling back to the static prior when the chain is absorbing.
/// Identity level (N = 0).
[[nodiscard]] SetDensity initial_prior(const TrafficModel& m);

/// Draws from an identity-level density.
[[nodiscard]] ActiveSet sample_active_set(const SetDensity& identity_density, Rng& rng);

/// Draws the next active set of the Markov chain given the current one.
[[nodiscard]] ActiveSet sample_transition(const TrafficModel& m, ActiveSet from, Rng& rng);

}  // namespace rsmud
