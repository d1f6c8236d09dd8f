#include "rsmud/detect.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rsmud/kernels.hpp"

namespace rsmud {

namespace {

void check_model(const Universe& u, const TrafficModel& m) {
    if (u.users() != m.users) throw std::invalid_argument("detector: universe and traffic model disagree on K");
    if (u.symbols() != m.symbols)
        throw std::invalid_argument("detector: universe and traffic model disagree on symbols_per_slot");
}

/// Log factor of the data and reference bits of a state of mask `a`.
double log_data_factor(const Universe& u, ActiveSet a) {
    return -(u.symbols() * a.size() + (u.reference() ? 1 : 0)) * std::numbers::ln2;
}

/// Identity-level sum transform of a (possibly data-bearing) density, spread
/// over `target` with the data factor. Returns an unnormalized log table.
std::vector<double> predict_log_table(const std::vector<double>& mask_mass, const TrafficModel& m,
                                      const Universe& target) {
    std::vector<double> v = mask_mass;
    kernels::transition_sum(m, v);
    std::vector<double> out(target.state_count(), kNegInf);
    for (std::size_t c = 0; c < target.mask_count(); ++c) {
        const ActiveSet a{static_cast<Mask>(c)};
        const double value = v[c] > 0.0 ? std::log(v[c]) + log_data_factor(target, a) : kNegInf;
        const std::size_t first = target.first_index(a);
        std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(first), target.block_size(a), value);
    }
    return out;
}

/// Max-product forward pass over slots [first, last] started from
/// `log_initial` (log f of the first slot before its observation).
ViterbiResult viterbi_window(const EmissionTable& em, const TrafficModel& m, const std::vector<double>& log_initial,
                             std::size_t first, std::size_t last) {
    const Universe& u = em.universe();
    const std::size_t states = u.state_count();
    const std::size_t masks = u.mask_count();

    std::vector<double> score(states);
    for (std::size_t s = 0; s < states; ++s) score[s] = log_initial[s] + em.at(first, s);

    ViterbiResult result;
    std::vector<double> mask_score(masks);
    std::vector<std::size_t> mask_state(masks);
    std::vector<Mask> arg(masks);
    for (std::size_t t = first + 1; t <= last; ++t) {
        for (std::size_t b = 0; b < masks; ++b) {
            const ActiveSet a{static_cast<Mask>(b)};
            const std::size_t lo = u.first_index(a);
            const std::size_t hi = lo + u.block_size(a);
            std::size_t best = lo;
            for (std::size_t s = lo + 1; s < hi; ++s)
                if (score[s] > score[best]) best = s;
            mask_score[b] = score[best];
            mask_state[b] = best;
        }
        kernels::transition_max(m, mask_score, arg);
        std::vector<std::size_t> survivor(masks);
        for (std::size_t c = 0; c < masks; ++c) {
            const ActiveSet a{static_cast<Mask>(c)};
            survivor[c] = mask_state[arg[c]];
            const double base = mask_score[c] + log_data_factor(u, a);
            const std::size_t lo = u.first_index(a);
            for (std::size_t s = lo; s < lo + u.block_size(a); ++s) score[s] = base + em.at(t, s);
        }
        result.survivors.push_back(std::move(survivor));
    }

    const std::size_t frames = last - first + 1;
    result.path.assign(frames, 0);
    std::size_t best = 0;
    for (std::size_t s = 1; s < states; ++s)
        if (score[s] > score[best]) best = s;
    result.log_score = score[best];
    result.path[frames - 1] = best;
    for (std::size_t k = frames - 1; k > 0; --k)
        result.path[k - 1] = result.survivors[k - 1][u.mask_of(result.path[k]).bits];
    return result;
}

}  // namespace

EmissionTable::EmissionTable(Universe universe, std::size_t frames, std::vector<double> values)
    : universe_(std::move(universe)), frames_(frames), values_(std::move(values)) {
    if (values_.size() != frames_ * universe_.state_count())
        throw std::invalid_argument("emission table: expected frames x states entries");
}

EmissionTable make_emissions(const ChannelModel& c, const Universe& u, std::span<const Observation> y,
                             std::span<const KnownBits> known) {
    if (c.dimension() != u.users() + (u.reference() ? 1 : 0))
        throw std::invalid_argument("make_emissions: channel dimension does not match the universe");
    if (u.symbols() == 0 && u.users() > 0 && known.size() != y.size())
        throw std::invalid_argument("make_emissions: trained frames need known data for every slot");
    const std::size_t states = u.state_count();
    const Eigen::MatrixXd& gram = c.gram();
    std::vector<Eigen::VectorXd> symbols(states);
    std::vector<double> energy(states);
    const auto fill_symbols = [&](std::span<const int> bits) {
        for (std::size_t s = 0; s < states; ++s) {
            symbols[s] = symbol_vector(u, u.state(s), bits);
            energy[s] = symbols[s].dot(gram * symbols[s]);
        }
    };
    if (u.symbols() != 0 || u.users() == 0) fill_symbols({});

    std::vector<double> values(y.size() * states);
    for (std::size_t t = 0; t < y.size(); ++t) {
        if (u.symbols() == 0 && u.users() > 0) fill_symbols(known[t]);
        const double q = c.whitened_energy(y[t]);
        const Eigen::VectorXd matched = c.amplitudes().cwiseProduct(y[t]);
        for (std::size_t s = 0; s < states; ++s)
            values[t * states + s] = -(q - 2.0 * symbols[s].dot(matched) + energy[s]) / c.n0();
    }
    return EmissionTable(u, y.size(), std::move(values));
}

SetDensity bayes_predict(const SetDensity& posterior, const TrafficModel& m, const Universe& target) {
    m.validate();
    if (posterior.universe().users() != m.users || target.users() != m.users)
        throw std::invalid_argument("bayes_predict: universe and traffic model disagree on K");
    if (target.symbols() != m.symbols)
        throw std::invalid_argument("bayes_predict: target universe and traffic model disagree on N");
    return normalize(target, predict_log_table(posterior.mask_marginal(), m, target));
}

SetDensity bayes_predict(const SetDensity& posterior, const TrafficModel& m) {
    return bayes_predict(posterior, m, posterior.universe());
}

SetDensity bayes_update(const SetDensity& predicted, std::span<const double> log_emission) {
    if (log_emission.size() != predicted.size())
        throw std::invalid_argument("bayes_update: emission row does not cover the universe");
    std::vector<double> table(predicted.size());
    for (std::size_t s = 0; s < table.size(); ++s) table[s] = predicted.log_mass(s) + log_emission[s];
    return normalize(predicted.universe(), std::move(table));
}

SetDensity bayes_update(const SetDensity& predicted, const Observation& y, const ChannelModel& c,
                        std::span<const int> known_bits) {
    const Universe& u = predicted.universe();
    std::vector<double> row(u.state_count());
    for (std::size_t s = 0; s < row.size(); ++s) row[s] = c.log_likelihood(y, symbol_vector(u, u.state(s), known_bits));
    return bayes_update(predicted, row);
}

std::vector<FilterState> run_filter(const EmissionTable& em, const TrafficModel& m, const SetDensity& prior0) {
    check_model(em.universe(), m);
    std::vector<FilterState> out;
    out.reserve(em.frames());
    const SetDensity* previous = &prior0;
    for (std::size_t t = 0; t < em.frames(); ++t) {
        SetDensity predicted = bayes_predict(*previous, m, em.universe());
        SetDensity posterior = bayes_update(predicted, em.row(t));
        out.push_back(FilterState{t + 1, std::move(predicted), std::move(posterior)});
        previous = &out.back().posterior;
    }
    return out;
}

std::vector<std::size_t> causal_map_sequence(const EmissionTable& em, const TrafficModel& m,
                                             const SetDensity& prior0) {
    std::vector<std::size_t> out;
    for (const auto& fs : run_filter(em, m, prior0)) out.push_back(fs.posterior.argmax());
    return out;
}

ViterbiResult viterbi_sequence_map(const EmissionTable& em, const TrafficModel& m, const SetDensity& prior0) {
    check_model(em.universe(), m);
    if (em.frames() == 0) return {};
    const auto initial = bayes_predict(prior0, m, em.universe());
    return viterbi_window(em, m, initial.log_mass(), 0, em.frames() - 1);
}

double sequence_log_score(const EmissionTable& em, const TrafficModel& m, const SetDensity& prior0,
                          std::span<const std::size_t> path) {
    check_model(em.universe(), m);
    if (path.size() != em.frames()) throw std::invalid_argument("sequence_log_score: path length != frames");
    const Universe& u = em.universe();
    if (path.empty()) return 0.0;
    double score = bayes_predict(prior0, m, u).log_mass(path[0]) + em.at(0, path[0]);
    for (std::size_t t = 1; t < path.size(); ++t) {
        const ActiveSet from = u.mask_of(path[t - 1]);
        const ActiveSet to = u.mask_of(path[t]);
        score += log_transition(m, from, to) + log_data_factor(u, to) + em.at(t, path[t]);
    }
    return score;
}

std::vector<std::size_t> sliding_window_viterbi(const EmissionTable& em, const TrafficModel& m,
                                                const SetDensity& prior0, int delta) {
    check_model(em.universe(), m);
    if (delta < 0) throw std::invalid_argument("sliding_window_viterbi: window half-length must be >= 0");
    const std::size_t frames = em.frames();
    std::vector<SetDensity> marginals;
    marginals.reserve(frames);
    for (std::size_t t = 0; t < frames; ++t)
        marginals.push_back(bayes_predict(t == 0 ? prior0 : marginals.back(), m, em.universe()));

    const auto d = static_cast<std::size_t>(delta);
    std::vector<std::size_t> decisions(frames);
    for (std::size_t t = 0; t < frames; ++t) {
        const std::size_t first = t > d ? t - d : 0;
        const std::size_t last = std::min(frames - 1, t + d);
        const auto pass = viterbi_window(em, m, marginals[first].log_mass(), first, last);
        decisions[t] = pass.path[t - first];
    }
    return decisions;
}

namespace {

/// Shared body of static MAP and joint ML. `prior == nullptr` means ML.
StaticDecision static_detect(const EmissionTable& em, const SetDensity* prior) {
    const Universe& u = em.universe();
    StaticDecision best;
    std::vector<std::size_t> states(em.frames());
    for (std::size_t b = 0; b < u.mask_count(); ++b) {
        const ActiveSet a{static_cast<Mask>(b)};
        const std::size_t lo = u.first_index(a);
        const std::size_t hi = lo + u.block_size(a);
        double log_identity = 0.0;
        if (prior) {
            double top = kNegInf;
            for (std::size_t s = lo; s < hi; ++s) top = std::max(top, prior->log_mass(s));
            if (top == kNegInf) {
                log_identity = kNegInf;
            } else {
                double acc = 0.0;
                for (std::size_t s = lo; s < hi; ++s) acc += std::exp(prior->log_mass(s) - top);
                log_identity = top + std::log(acc);
            }
        }
        if (log_identity == kNegInf && best.log_score > kNegInf) continue;
        double total = log_identity;
        for (std::size_t t = 0; t < em.frames(); ++t) {
            std::size_t arg = lo;
            double top = kNegInf;
            for (std::size_t s = lo; s < hi; ++s) {
                const double v = em.at(t, s) + (prior ? prior->log_mass(s) - log_identity : 0.0);
                if (s == lo || v > top) {
                    top = v;
                    arg = s;
                }
            }
            states[t] = arg;
            total += top;
        }
        if (b == 0 || total > best.log_score) {
            best.identities = a;
            best.states = states;
            best.log_score = total;
        }
    }
    return best;
}

}  // namespace

StaticDecision static_map_detect(const EmissionTable& em, const SetDensity& prior) {
    if (!(prior.universe() == em.universe()))
        throw std::invalid_argument("static_map_detect: prior and emissions live on different universes");
    return static_detect(em, &prior);
}

StaticDecision joint_ml_detect(const EmissionTable& em) { return static_detect(em, nullptr); }

std::vector<int> classic_all_active_ml(const Observation& y, const ChannelModel& c) {
    const int users = c.dimension();
    if (users > 20) throw std::invalid_argument("classic_all_active_ml: too many users to enumerate");
    const Eigen::VectorXd matched = c.amplitudes().cwiseProduct(y);
    const Eigen::MatrixXd& gram = c.gram();
    Eigen::VectorXd b(users);
    std::uint32_t best_pattern = 0;
    double best = kNegInf;
    for (std::uint32_t p = 0; p < (1U << users); ++p) {
        for (int i = 0; i < users; ++i) b[i] = antipodal((p >> i) & 1U);
        const double metric = 2.0 * b.dot(matched) - b.dot(gram * b);
        if (p == 0 || metric > best) {
            best = metric;
            best_pattern = p;
        }
    }
    std::vector<int> out(static_cast<std::size_t>(users));
    for (int i = 0; i < users; ++i) out[static_cast<std::size_t>(i)] = antipodal((best_pattern >> i) & 1U);
    return out;
}

}  // namespace rsmud
