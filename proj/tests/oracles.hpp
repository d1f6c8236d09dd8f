#pragma once

// Brute-force references shared by the unit tests and the acceptance run.
// Everything here enumerates explicitly and avoids the library's fast paths
// (butterfly kernels, mask-level survivor reduction, log-sum-exp helpers).

#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "rsmud/analysis.hpp"
#include "rsmud/detect.hpp"
#include "rsmud/traffic.hpp"

namespace oracle {

using namespace rsmud;

/// Linear-domain one-step law over full states: f(s' | s) from the
/// convolution-built transition density.
inline std::vector<std::vector<double>> state_transitions(const Universe& u, const TrafficModel& m) {
    std::vector<std::vector<double>> out(u.state_count(), std::vector<double>(u.state_count()));
    const Universe plain(u.users(), u.symbols(), false);
    for (std::size_t from = 0; from < u.state_count(); ++from) {
        const auto row = transition_density(m, u.mask_of(from));
        for (std::size_t to = 0; to < u.state_count(); ++to) {
            SlotState s = u.state(to);
            s.ref_bit.reset();
            out[from][to] = row.mass(plain.index(s)) * (u.reference() ? 0.5 : 1.0);
        }
    }
    return out;
}

/// f(X_1) over full states, from an identity-level X_0 law.
inline std::vector<double> first_slot(const Universe& u, const TrafficModel& m, const SetDensity& prior0) {
    std::vector<double> out(u.state_count(), 0.0);
    const auto marg = prior0.mask_marginal();
    const Universe plain(u.users(), u.symbols(), false);
    for (Mask b = 0; b < u.mask_count(); ++b) {
        const auto row = transition_density(m, ActiveSet{b});
        for (std::size_t to = 0; to < u.state_count(); ++to) {
            SlotState s = u.state(to);
            s.ref_bit.reset();
            out[to] += marg[b] * row.mass(plain.index(s)) * (u.reference() ? 0.5 : 1.0);
        }
    }
    return out;
}

/// Calls visit(path) for every state sequence of length T.
template <typename F>
void for_each_path(std::size_t states, std::size_t frames, F&& visit) {
    std::vector<std::size_t> path(frames, 0);
    while (true) {
        visit(path);
        std::size_t k = 0;
        while (k < frames && ++path[k] == states) path[k++] = 0;
        if (k == frames) return;
    }
}

/// Posterior marginals f(X_t | y_{1:t}) for every t by enumerating prefixes.
inline std::vector<std::vector<double>> filter_marginals(const EmissionTable& em, const TrafficModel& m,
                                                         const SetDensity& prior0) {
    const Universe& u = em.universe();
    const auto trans = state_transitions(u, m);
    const auto f1 = first_slot(u, m, prior0);
    std::vector<std::vector<double>> out;
    for (std::size_t t = 1; t <= em.frames(); ++t) {
        std::vector<double> acc(u.state_count(), 0.0);
        double z = 0.0;
        for_each_path(u.state_count(), t, [&](const std::vector<std::size_t>& p) {
            double w = f1[p[0]] * std::exp(em.at(0, p[0]));
            for (std::size_t k = 1; k < t; ++k) w *= trans[p[k - 1]][p[k]] * std::exp(em.at(k, p[k]));
            acc[p[t - 1]] += w;
            z += w;
        });
        for (double& v : acc) v /= z;
        out.push_back(std::move(acc));
    }
    return out;
}

struct BestPath {
    std::vector<std::size_t> path;
    double log_score = -INFINITY;
};

/// Argmax over all state sequences of the joint log density plus emissions.
inline BestPath best_sequence(const EmissionTable& em, const TrafficModel& m, const SetDensity& prior0) {
    const Universe& u = em.universe();
    const auto trans = state_transitions(u, m);
    const auto f1 = first_slot(u, m, prior0);
    BestPath best;
    for_each_path(u.state_count(), em.frames(), [&](const std::vector<std::size_t>& p) {
        double v = std::log(f1[p[0]]) + em.at(0, p[0]);
        for (std::size_t k = 1; k < p.size(); ++k) v += std::log(trans[p[k - 1]][p[k]]) + em.at(k, p[k]);
        if (v > best.log_score) {
            best.log_score = v;
            best.path = p;
        }
    });
    return best;
}

/// Random emission table with continuous values, so maximizers are unique.
inline EmissionTable random_emissions(const Universe& u, std::size_t frames, std::mt19937_64& gen,
                                      double scale = 3.0) {
    std::normal_distribution<double> g(0.0, scale);
    std::vector<double> v(frames * u.state_count());
    for (auto& x : v) x = g(gen);
    return EmissionTable(u, frames, std::move(v));
}

/// Per-user Bernoulli law of an identity set.
inline double log_product(int users, double p, ActiveSet b) {
    const int on = b.size();
    return on * std::log(p) + (users - on) * std::log(1.0 - p);
}

/// Log prior of a state sequence written out per user: static sets from the
/// alpha product law, dynamic ones from the stationary law followed by the
/// two-state chain of every user. Data factors 2^{-N|X_t|} when asked.
inline double log_sequence_prior(const TrafficModel& m, const std::vector<SlotState>& seq, bool dynamic,
                                 bool with_data) {
    const int k = m.users;
    double v = 0.0;
    if (!dynamic) {
        v = log_product(k, m.alpha, seq[0].active);
    } else {
        v = log_product(k, m.alpha / (1.0 + m.alpha - m.mu), seq[0].active);
        for (std::size_t t = 1; t < seq.size(); ++t)
            for (int i = 0; i < k; ++i) {
                const bool was = seq[t - 1].active.contains(i);
                const bool is = seq[t].active.contains(i);
                const double p = was ? (is ? m.mu : 1.0 - m.mu) : (is ? m.alpha : 1.0 - m.alpha);
                v += std::log(p);
            }
    }
    if (with_data)
        for (const auto& s : seq) v -= m.symbols * s.active.size() * std::log(2.0);
    return v;
}

struct McEstimate {
    double p = 0.0;
    double se = 0.0;
};

/// Monte Carlo pairwise error probability: draws y under the true sequence
/// and counts how often the competitor's metric is strictly larger. The
/// metric is the channel log-likelihood plus, for the MAP modes, the log
/// prior above.
inline McEstimate mc_pep(const PairContext& ctx, const TrafficModel& m, PepMode mode,
                         std::span<const KnownBits> known, std::size_t draws, std::uint64_t seed) {
    const Universe& u = ctx.universe;
    const std::size_t frames = ctx.truth.size();
    std::vector<Eigen::VectorXd> bt(frames), bc(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        const std::span<const int> kb = known.empty() ? std::span<const int>{} : std::span<const int>(known[t]);
        bt[t] = symbol_vector(u, ctx.truth[t], kb);
        bc[t] = symbol_vector(u, ctx.competitor[t], kb);
    }
    double offset = 0.0;
    if (mode != PepMode::ml) {
        const bool wd = mode == PepMode::map_with_data;
        offset = log_sequence_prior(m, ctx.competitor, ctx.dynamic, wd) -
                 log_sequence_prior(m, ctx.truth, ctx.dynamic, wd);
    }
    Rng rng(seed);
    std::size_t wins = 0;
    for (std::size_t k = 0; k < draws; ++k) {
        double diff = offset;
        for (std::size_t t = 0; t < frames; ++t) {
            const Observation y = ctx.channel.synthesize(bt[t], rng);
            diff += ctx.channel.log_likelihood(y, bc[t]) - ctx.channel.log_likelihood(y, bt[t]);
        }
        if (diff > 0.0) ++wins;
    }
    McEstimate out;
    out.p = static_cast<double>(wins) / static_cast<double>(draws);
    out.se = std::sqrt(std::max(out.p * (1.0 - out.p), 1.0 / static_cast<double>(draws)) / static_cast<double>(draws));
    return out;
}

}  // namespace oracle
