#pragma once

// Power-set transition kernels. The birth/death kernel factorizes over users,
// so both the sum-product (Bayes prediction) and the max-product (Viterbi
// survivor selection) over 2^K masks run as K butterfly passes in
// O(K 2^K), each pass parallel over mask pairs. `reference` keeps the dense
// O(4^K) serial forms used by the tests and the benchmark.

#include <span>
#include <vector>

#include "rsmud/traffic.hpp"

namespace rsmud {

/// Worker threads used by parallel kernels and Monte Carlo loops. Honors
/// RSMUD_THREADS, then the OpenMP default.
[[nodiscard]] int thread_count();
void set_thread_count(int n);

namespace kernels {

/// In place: v[C] <- sum_B f(C | B) v[B], linear domain.
void transition_sum(const TrafficModel& m, std::span<double> v);

/// In place, log domain: score[C] <- max_B (log f(C | B) + score[B]) and
/// arg[C] <- the maximizing B, lowest mask on ties. `arg` is overwritten.
void transition_max(const TrafficModel& m, std::span<double> score, std::span<Mask> arg);

}  // namespace kernels

namespace reference {

[[nodiscard]] std::vector<double> transition_sum(const TrafficModel& m, std::span<const double> v);

void transition_max(const TrafficModel& m, std::span<const double> score, std::span<double> out_score,
                    std::span<Mask> out_arg);

}  // namespace reference

}  // namespace rsmud
