#pragma once

// Pairwise error probabilities of the set detectors, union bounds over
// hypothesis pairs and their distance-restricted approximations, the
// open-eye frame length, and a Monte Carlo estimator of the dynamic bound.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "rsmud/channel.hpp"
#include "rsmud/detect.hpp"
#include "rsmud/rst.hpp"
#include "rsmud/traffic.hpp"

namespace rsmud {

/// Gaussian tail probability Q(x) = erfc(x / sqrt 2) / 2.
[[nodiscard]] double q_function(double x);

/// ml: likelihood only. map_identities: prior or Markov law on the identity
/// sets. map_with_data: the same law with the 2^{-N|X_t|} data factors.
enum class PepMode { ml, map_identities, map_with_data };

[[nodiscard]] PepMode parse_pep_mode(const std::string& name);
[[nodiscard]] std::string to_string(PepMode m);

/// A true hypothesis and a competitor over T slots, with the per-slot
/// difference vectors d_t = b_t(X) - b_t(X^) in channel-user order.
///
/// `dynamic` selects the Markov law for the prior term; otherwise the
/// identity sets are constant over the frame and drawn from the static prior.
struct PairContext {
    Universe universe;
    ChannelModel channel;
    std::vector<SlotState> truth;
    std::vector<SlotState> competitor;
    std::vector<Eigen::VectorXd> d;
    bool dynamic = false;
};

/// Builds the difference vectors from two state sequences. With N = 0 the
/// interferer data come from `known` (one entry per slot) and are shared by
/// both hypotheses. Throws std::invalid_argument on length mismatch, on a
/// static pair whose identities change over the frame, or when a difference
/// vector leaves the {0, +-1, +-2} structure.
[[nodiscard]] PairContext make_pair_context(const Universe& u, const ChannelModel& c, std::vector<SlotState> truth,
                                            std::vector<SlotState> competitor, std::span<const KnownBits> known = {},
                                            bool dynamic = false);

/// Entries of d_t are 0 or +-2 for users in both sets, +-1 for users in
/// exactly one set, and 0 for users in neither.
[[nodiscard]] bool difference_structure_ok(const PairContext& ctx);

struct XiEta {
    double xi = 0.0;
    double eta = 0.0;
};

/// xi_T = sum_t d_t' A R A d_t and the prior offset eta = N0 ln f(X^)/f(X)
/// of the selected mode.
[[nodiscard]] XiEta xi_eta(const PairContext& ctx, const TrafficModel& m, PepMode mode);

/// Closed-form PEP from xi_T and eta. With xi = 0 the limit of the Q-ratio
/// form is used: 1 if eta < 0, 0 if eta > 0, 1/2 otherwise.
[[nodiscard]] double pep_from(double xi, double eta, double n0, PepMode mode);

/// Throws std::invalid_argument when the two hypotheses coincide.
[[nodiscard]] double pep(const PairContext& ctx, const TrafficModel& m, PepMode mode);

/// log f(X_1 = B): product law at the stationary activity, or at alpha when
/// the chain is absorbing.
[[nodiscard]] double log_first_slot_prior(const TrafficModel& m, ActiveSet b);

/// log of the static identity prior alpha^|B| (1-alpha)^{K-|B|}.
[[nodiscard]] double log_static_prior(const TrafficModel& m, ActiveSet b);

/// Smallest T such that xi_T - eta > 0 for every pair of distinct constant
/// identity sets under worst-case data; std::nullopt when no T <= cap works.
[[nodiscard]] std::optional<int> t_min_open_eye(const Universe& u, const TrafficModel& m, const ChannelModel& c,
                                                PepMode mode, int cap = 1000);

/// Union bound on the static set-error probability over T slots,
///   sum_i f(X_i) sum_{j != i} P(X_i -> X_j),
/// restricted to |X_i xor X_j| <= restrict_n when given. Unknown data (and
/// the training bits when N = 0) are averaged out of each pairwise term:
/// exactly by enumerating per-slot xi values when the table stays small,
/// otherwise over 256 fixed draws.
[[nodiscard]] double union_bound_static(const Universe& u, const TrafficModel& m, const ChannelModel& c, int frames,
                                        PepMode mode, std::optional<int> restrict_n = {});

struct BoundEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t samples = 0;
};

/// Monte Carlo estimate of the restricted union bound on the set-sequence
/// error probability: draws `samples` state sequences from the Markov law
/// (with training bits when N = 0), and for each sums the PEPs of every
/// competitor sequence whose total distance sum_t delta_t is in 1..restrict_n.
/// delta_t counts interferers whose presence or data differ, plus a flipped
/// reference bit. Deterministic in `seed` for any thread count.
[[nodiscard]] BoundEstimate semianalytic_dynamic_bound(const Universe& u, const TrafficModel& m,
                                                       const ChannelModel& c, int frames, std::size_t samples,
                                                       int restrict_n, PepMode mode, std::uint64_t seed);

/// Per-slot distance between two states as used by the restriction above.
[[nodiscard]] int state_distance(const Universe& u, const SlotState& a, const SlotState& b);

}  // namespace rsmud
