#pragma once

// Detectors for the set of active interferers (and their data): the causal
// random-set Bayes filter, sequence-MAP Viterbi and its sliding-window
// variant, static MAP / joint ML over a frame, and classic all-active ML.
//
// Every detector consumes an EmissionTable, so the algorithms are independent
// of the channel that produced the likelihoods. All ties resolve to the
// lowest canonical state index.

#include <span>
#include <vector>

#include "rsmud/channel.hpp"
#include "rsmud/rst.hpp"
#include "rsmud/traffic.hpp"

namespace rsmud {

/// log f(y_t | state) for t = 0..T-1 over every state of a universe, up to a
/// per-slot constant.
class EmissionTable {
public:
    EmissionTable(Universe universe, std::size_t frames, std::vector<double> values);

    [[nodiscard]] const Universe& universe() const { return universe_; }
    [[nodiscard]] std::size_t frames() const { return frames_; }
    [[nodiscard]] std::size_t states() const { return universe_.state_count(); }
    [[nodiscard]] std::span<const double> row(std::size_t t) const {
        return {values_.data() + t * states(), states()};
    }
    [[nodiscard]] double at(std::size_t t, std::size_t s) const { return values_[t * states() + s]; }

private:
    Universe universe_;
    std::size_t frames_;
    std::vector<double> values_;
};

/// Known interferer data for one slot, one +-1 entry per interferer.
using KnownBits = std::vector<int>;

/// Emission table of a CDMA frame. With N = 0 the interferer data come from
/// `known` (one entry per slot).
[[nodiscard]] EmissionTable make_emissions(const ChannelModel& c, const Universe& u,
                                           std::span<const Observation> y,
                                           std::span<const KnownBits> known = {});

struct FilterState {
    std::size_t t = 0;  // 1-based slot index
    SetDensity predicted;
    SetDensity posterior;
};

/// f(X_{t+1} | y_{1:t}) = sum_{X_t} f(X_{t+1} | X_t) f(X_t | y_{1:t}) on
/// `target`. The input may be identity-level or carry data; only its identity
/// marginal matters because data are redrawn every slot.
[[nodiscard]] SetDensity bayes_predict(const SetDensity& posterior, const TrafficModel& m, const Universe& target);
[[nodiscard]] SetDensity bayes_predict(const SetDensity& posterior, const TrafficModel& m);

/// posterior proportional to exp(log_emission) * predicted.
/// Throws NumericalCollapse if every product vanishes.
[[nodiscard]] SetDensity bayes_update(const SetDensity& predicted, std::span<const double> log_emission);
[[nodiscard]] SetDensity bayes_update(const SetDensity& predicted, const Observation& y, const ChannelModel& c,
                                      std::span<const int> known_bits = {});

/// Runs predict/update for t = 1..T starting from the X_0 density `prior0`.
[[nodiscard]] std::vector<FilterState> run_filter(const EmissionTable& em, const TrafficModel& m,
                                                  const SetDensity& prior0);

/// Argmax of each causal posterior.
[[nodiscard]] std::vector<std::size_t> causal_map_sequence(const EmissionTable& em, const TrafficModel& m,
                                                           const SetDensity& prior0);

struct ViterbiResult {
    std::vector<std::size_t> path;
    double log_score = kNegInf;
    /// survivors[t-1][C]: best predecessor state at slot t-1 for any state of
    /// mask C at slot t, t = 1..T-1 (0-based slots).
    std::vector<std::vector<std::size_t>> survivors;
};

/// Exact argmax over state sequences of
///   log f(X_1) + sum_t log f(X_t | X_{t-1}) + sum_t log f(y_t | X_t),
/// with f(X_1) predicted from prior0.
[[nodiscard]] ViterbiResult viterbi_sequence_map(const EmissionTable& em, const TrafficModel& m,
                                                 const SetDensity& prior0);

/// The objective above for an arbitrary path.
[[nodiscard]] double sequence_log_score(const EmissionTable& em, const TrafficModel& m, const SetDensity& prior0,
                                        std::span<const std::size_t> path);

/// Decision on slot t from a Viterbi pass over slots [t - delta, t + delta]
/// clipped to the frame, started from the unconditional marginal of the
/// first window slot. delta >= T - 1 reproduces viterbi_sequence_map.
[[nodiscard]] std::vector<std::size_t> sliding_window_viterbi(const EmissionTable& em, const TrafficModel& m,
                                                              const SetDensity& prior0, int delta);

struct StaticDecision {
    ActiveSet identities;
    std::vector<std::size_t> states;  // per slot, same identities throughout
    double log_score = kNegInf;
};

/// Identities constant over the frame. Maximizes
///   log f(B) + sum_t max_d [log f(d | B) + log f(y_t | B, d)]
/// where f(B) and f(d | B) are the identity marginal and data conditional of
/// the single-slot `prior` (same universe as the emissions).
[[nodiscard]] StaticDecision static_map_detect(const EmissionTable& em, const SetDensity& prior);

/// Joint ML over identities and per-slot data: maximizes the likelihood alone.
[[nodiscard]] StaticDecision joint_ml_detect(const EmissionTable& em);

/// ML data decision for every channel user assuming all interferers are
/// active. Returns one +-1 per channel user (reference first when present).
[[nodiscard]] std::vector<int> classic_all_active_ml(const Observation& y, const ChannelModel& c);

}  // namespace rsmud
