#include "rsmud/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rsmud/kernels.hpp"

namespace rsmud {

namespace {

constexpr std::size_t kMaxSlotConfigs = std::size_t{1} << 16;
constexpr std::size_t kMaxDistribution = std::size_t{1} << 16;
constexpr int kDataDraws = 256;

int channel_offset(const Universe& u) { return u.reference() ? 1 : 0; }

void require_supported(const Universe& u, const ChannelModel& c) {
    if (u.symbols() > 1) throw std::invalid_argument("analysis: at most one data symbol per slot is supported");
    if (c.dimension() != u.users() + channel_offset(u))
        throw std::invalid_argument("analysis: channel dimension does not match the universe");
}

/// N data bits of interferer `user` inside state `s` (user must be active).
std::uint32_t user_data(const Universe& u, const SlotState& s, int user) {
    const int rank = std::popcount(s.active.bits & ((Mask{1} << user) - 1U));
    const std::uint32_t width = (std::uint32_t{1} << u.symbols()) - 1U;
    return (s.data >> (rank * u.symbols())) & width;
}

double quadratic(const Eigen::MatrixXd& g, const Eigen::VectorXd& d) { return d.dot(g * d); }

/// log f of the identity path, plus the data factors when asked.
double log_sequence_prior(const TrafficModel& m, const Universe& u, std::span<const SlotState> seq, bool dynamic,
                          bool with_data) {
    double v = 0.0;
    if (seq.empty()) return v;
    if (dynamic) {
        v = log_first_slot_prior(m, seq[0].active);
        for (std::size_t t = 1; t < seq.size(); ++t) v += log_transition(m, seq[t - 1].active, seq[t].active);
    } else {
        v = log_static_prior(m, seq[0].active);
    }
    if (with_data)
        for (const auto& s : seq) v -= u.symbols() * s.active.size() * std::numbers::ln2;
    return v;
}

/// Every equally likely data configuration of one slot of a static pair
/// (B -> Bh) is encoded in the low bits of `config`: reference bits of truth
/// and competitor first, then the training bits of the users in B xor Bh
/// (N = 0) or the data of B followed by the data of Bh (N = 1).
struct SlotPairLayout {
    const Universe& u;
    ActiveSet truth;
    ActiveSet competitor;

    [[nodiscard]] int bits() const {
        const int ref = u.reference() ? 2 : 0;
        if (u.symbols() == 0) return ref + ActiveSet{truth.bits ^ competitor.bits}.size();
        return ref + truth.size() + competitor.size();
    }

    [[nodiscard]] Eigen::VectorXd difference(std::uint64_t config) const {
        const int off = channel_offset(u);
        Eigen::VectorXd d = Eigen::VectorXd::Zero(u.users() + off);
        int pos = 0;
        const auto take = [&] { return static_cast<std::uint32_t>((config >> pos++) & 1U); };
        if (u.reference()) {
            const int r = antipodal(take());
            d[0] = r - antipodal(take());
        }
        if (u.symbols() == 0) {
            for (int i = 0; i < u.users(); ++i) {
                const bool in_t = truth.contains(i);
                const bool in_c = competitor.contains(i);
                if (in_t == in_c) continue;
                const int b = antipodal(take());
                d[i + off] = in_t ? b : -b;
            }
        } else {
            for (int i = 0; i < u.users(); ++i)
                if (truth.contains(i)) d[i + off] += antipodal(take());
            for (int i = 0; i < u.users(); ++i)
                if (competitor.contains(i)) d[i + off] -= antipodal(take());
        }
        return d;
    }
};

using Distribution = std::vector<std::pair<double, double>>;  // (xi, probability)

Distribution merge(Distribution v) {
    std::sort(v.begin(), v.end());
    Distribution out;
    for (const auto& [x, p] : v) {
        if (!out.empty() && std::abs(out.back().first - x) <= 1e-12 * std::max(1.0, std::abs(x)))
            out.back().second += p;
        else
            out.emplace_back(x, p);
    }
    return out;
}

/// Distribution of xi_T over uniformly drawn data, or std::nullopt when the
/// exact table would be too large.
std::optional<Distribution> xi_distribution(const SlotPairLayout& layout, const Eigen::MatrixXd& gram, int frames) {
    const int bits = layout.bits();
    if (bits >= 63 || (std::uint64_t{1} << bits) > kMaxSlotConfigs) return std::nullopt;
    const std::uint64_t configs = std::uint64_t{1} << bits;
    Distribution slot;
    slot.reserve(configs);
    const double p = 1.0 / static_cast<double>(configs);
    for (std::uint64_t k = 0; k < configs; ++k) slot.emplace_back(quadratic(gram, layout.difference(k)), p);
    slot = merge(std::move(slot));

    Distribution total{{0.0, 1.0}};
    for (int t = 0; t < frames; ++t) {
        if (total.size() * slot.size() > kMaxDistribution * 16) return std::nullopt;
        Distribution next;
        next.reserve(total.size() * slot.size());
        for (const auto& [a, pa] : total)
            for (const auto& [b, pb] : slot) next.emplace_back(a + b, pa * pb);
        total = merge(std::move(next));
        if (total.size() > kMaxDistribution) return std::nullopt;
    }
    return total;
}

double averaged_pep(const SlotPairLayout& layout, const ChannelModel& c, int frames, double eta, PepMode mode,
                    std::uint64_t stream_a, std::uint64_t stream_b) {
    if (auto dist = xi_distribution(layout, c.gram(), frames)) {
        double acc = 0.0;
        for (const auto& [xi, p] : *dist) acc += p * pep_from(xi, eta, c.n0(), mode);
        return acc;
    }
    Rng rng = Rng::stream(0x5eedULL, stream_a, stream_b);
    const int bits = layout.bits();
    const std::uint64_t mask = bits >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << bits) - 1U;
    double acc = 0.0;
    for (int k = 0; k < kDataDraws; ++k) {
        double xi = 0.0;
        for (int t = 0; t < frames; ++t) xi += quadratic(c.gram(), layout.difference(rng.next() & mask));
        acc += pep_from(xi, eta, c.n0(), mode);
    }
    return acc / kDataDraws;
}

/// Static eta for a pair of constant identity sets over `frames` slots.
double static_eta(const Universe& u, const TrafficModel& m, double n0, ActiveSet truth, ActiveSet competitor,
                  int frames, PepMode mode) {
    if (mode == PepMode::ml) return 0.0;
    double v = log_static_prior(m, competitor) - log_static_prior(m, truth);
    if (mode == PepMode::map_with_data)
        v += frames * u.symbols() * (truth.size() - competitor.size()) * std::numbers::ln2;
    return n0 * v;
}

}  // namespace

double q_function(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

PepMode parse_pep_mode(const std::string& name) {
    if (name == "ml") return PepMode::ml;
    if (name == "map" || name == "map_identities") return PepMode::map_identities;
    if (name == "map_with_data" || name == "map_data") return PepMode::map_with_data;
    throw std::invalid_argument("unknown PEP mode '" + name + "' (ml|map_identities|map_with_data)");
}

std::string to_string(PepMode m) {
    switch (m) {
    case PepMode::ml: return "ml";
    case PepMode::map_identities: return "map_identities";
    case PepMode::map_with_data: return "map_with_data";
    }
    return "ml";
}

double log_static_prior(const TrafficModel& m, ActiveSet b) {
    return log_pow(m.alpha, b.size()) + log_pow(1.0 - m.alpha, m.users - b.size());
}

double log_first_slot_prior(const TrafficModel& m, ActiveSet b) {
    const double p = (1.0 + m.alpha - m.mu > 0.0) ? stationary_activity(m) : m.alpha;
    return log_pow(p, b.size()) + log_pow(1.0 - p, m.users - b.size());
}

PairContext make_pair_context(const Universe& u, const ChannelModel& c, std::vector<SlotState> truth,
                              std::vector<SlotState> competitor, std::span<const KnownBits> known, bool dynamic) {
    if (truth.size() != competitor.size()) throw std::invalid_argument("pair context: sequences differ in length");
    if (truth.empty()) throw std::invalid_argument("pair context: empty frame");
    if (u.symbols() == 0 && u.users() > 0 && known.size() != truth.size())
        throw std::invalid_argument("pair context: trained pairs need known data for every slot");
    if (!dynamic) {
        for (std::size_t t = 1; t < truth.size(); ++t)
            if (truth[t].active != truth[0].active || competitor[t].active != competitor[0].active)
                throw std::invalid_argument("pair context: static pairs keep their identities over the frame");
    }
    PairContext ctx{u, c, std::move(truth), std::move(competitor), {}, dynamic};
    for (std::size_t t = 0; t < ctx.truth.size(); ++t) {
        const std::span<const int> bits = u.symbols() == 0 && u.users() > 0 ? std::span<const int>(known[t])
                                                                            : std::span<const int>{};
        ctx.d.push_back(symbol_vector(u, ctx.truth[t], bits) - symbol_vector(u, ctx.competitor[t], bits));
    }
    if (c.dimension() != static_cast<int>(ctx.d.front().size()))
        throw std::invalid_argument("pair context: channel dimension does not match the universe");
    if (!difference_structure_ok(ctx)) throw std::invalid_argument("pair context: malformed difference vector");
    return ctx;
}

bool difference_structure_ok(const PairContext& ctx) {
    const Universe& u = ctx.universe;
    const int off = channel_offset(u);
    for (std::size_t t = 0; t < ctx.d.size(); ++t) {
        const Eigen::VectorXd& d = ctx.d[t];
        if (u.reference() && !(d[0] == 0.0 || std::abs(d[0]) == 2.0)) return false;
        for (int i = 0; i < u.users(); ++i) {
            const double v = d[i + off];
            const bool in_t = ctx.truth[t].active.contains(i);
            const bool in_c = ctx.competitor[t].active.contains(i);
            if (in_t && in_c) {
                if (!(v == 0.0 || std::abs(v) == 2.0)) return false;
            } else if (in_t || in_c) {
                if (std::abs(v) != 1.0) return false;
            } else if (v != 0.0) {
                return false;
            }
        }
    }
    return true;
}

XiEta xi_eta(const PairContext& ctx, const TrafficModel& m, PepMode mode) {
    XiEta out;
    for (const auto& d : ctx.d) out.xi += quadratic(ctx.channel.gram(), d);
    if (mode != PepMode::ml) {
        const bool with_data = mode == PepMode::map_with_data;
        out.eta = ctx.channel.n0() * (log_sequence_prior(m, ctx.universe, ctx.competitor, ctx.dynamic, with_data) -
                                      log_sequence_prior(m, ctx.universe, ctx.truth, ctx.dynamic, with_data));
    }
    return out;
}

double pep_from(double xi, double eta, double n0, PepMode mode) {
    if (mode == PepMode::ml) eta = 0.0;
    if (!(xi > 0.0)) {
        if (eta < 0.0) return 1.0;
        if (eta > 0.0) return 0.0;
        return 0.5;
    }
    if (mode == PepMode::ml) return q_function(std::sqrt(xi / (2.0 * n0)));
    return q_function((xi - eta) / std::sqrt(2.0 * n0 * xi));
}

double pep(const PairContext& ctx, const TrafficModel& m, PepMode mode) {
    if (ctx.truth == ctx.competitor) throw std::invalid_argument("pep: identical hypotheses");
    const XiEta v = xi_eta(ctx, m, mode);
    return pep_from(v.xi, v.eta, ctx.channel.n0(), mode);
}

int state_distance(const Universe& u, const SlotState& a, const SlotState& b) {
    int d = (a.active.bits ^ b.active.bits) != 0 ? ActiveSet{a.active.bits ^ b.active.bits}.size() : 0;
    if (u.symbols() > 0) {
        const Mask both = a.active.bits & b.active.bits;
        for (int i = 0; i < u.users(); ++i)
            if (((both >> i) & 1U) && user_data(u, a, i) != user_data(u, b, i)) ++d;
    }
    if (u.reference() && a.ref_bit.value_or(0) != b.ref_bit.value_or(0)) ++d;
    return d;
}

std::optional<int> t_min_open_eye(const Universe& u, const TrafficModel& m, const ChannelModel& c, PepMode mode,
                                  int cap) {
    require_supported(u, c);
    if (cap < 1) throw std::invalid_argument("t_min_open_eye: cap must be >= 1");
    struct PairGap {
        double min_xi;
        double eta_fixed;
        double eta_per_slot;
    };
    std::vector<PairGap> pairs;
    for (Mask i = 0; i < u.mask_count(); ++i) {
        const ActiveSet truth{i};
        if (log_static_prior(m, truth) == kNegInf && mode != PepMode::ml) continue;
        for (Mask j = 0; j < u.mask_count(); ++j) {
            if (i == j) continue;
            const ActiveSet comp{j};
            const SlotPairLayout layout{u, truth, comp};
            const std::uint64_t configs = std::uint64_t{1} << layout.bits();
            double min_xi = std::numeric_limits<double>::infinity();
            for (std::uint64_t k = 0; k < configs; ++k)
                min_xi = std::min(min_xi, quadratic(c.gram(), layout.difference(k)));
            PairGap g{min_xi, 0.0, 0.0};
            if (mode != PepMode::ml) {
                g.eta_fixed = c.n0() * (log_static_prior(m, comp) - log_static_prior(m, truth));
                if (mode == PepMode::map_with_data)
                    g.eta_per_slot = c.n0() * u.symbols() * (truth.size() - comp.size()) * std::numbers::ln2;
            }
            pairs.push_back(g);
        }
    }
    for (int t = 1; t <= cap; ++t) {
        bool open = true;
        for (const auto& g : pairs) {
            if (!(t * (g.min_xi - g.eta_per_slot) - g.eta_fixed > 0.0)) {
                open = false;
                break;
            }
        }
        if (open) return t;
    }
    return std::nullopt;
}

double union_bound_static(const Universe& u, const TrafficModel& m, const ChannelModel& c, int frames, PepMode mode,
                          std::optional<int> restrict_n) {
    require_supported(u, c);
    m.validate();
    if (u.users() > 10) throw std::invalid_argument("union_bound_static: pair enumeration limited to K <= 10");
    if (frames < 1) throw std::invalid_argument("union_bound_static: frame length must be >= 1");
    const std::size_t masks = u.mask_count();
    std::vector<double> rows(masks, 0.0);
    const auto n = static_cast<std::int64_t>(masks);
#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
    for (std::int64_t ii = 0; ii < n; ++ii) {
        const ActiveSet truth{static_cast<Mask>(ii)};
        const double weight = std::exp(log_static_prior(m, truth));
        if (weight == 0.0) continue;
        double row = 0.0;
        for (Mask j = 0; j < masks; ++j) {
            if (j == truth.bits) continue;
            const ActiveSet comp{j};
            if (restrict_n && ActiveSet{truth.bits ^ j}.size() > *restrict_n) continue;
            const double eta = static_eta(u, m, c.n0(), truth, comp, frames, mode);
            row += averaged_pep(SlotPairLayout{u, truth, comp}, c, frames, eta, mode, truth.bits, j);
        }
        rows[static_cast<std::size_t>(ii)] = weight * row;
    }
    double total = 0.0;
    for (double r : rows) total += r;
    return total;
}

BoundEstimate semianalytic_dynamic_bound(const Universe& u, const TrafficModel& m, const ChannelModel& c, int frames,
                                         std::size_t samples, int restrict_n, PepMode mode, std::uint64_t seed) {
    require_supported(u, c);
    m.validate();
    if (samples < 1) throw std::invalid_argument("semianalytic_dynamic_bound: need at least one sample");
    if (frames < 1) throw std::invalid_argument("semianalytic_dynamic_bound: frame length must be >= 1");
    const bool with_data = mode == PepMode::map_with_data;
    const double first_activity = (1.0 + m.alpha - m.mu > 0.0) ? stationary_activity(m) : m.alpha;
    const auto T = static_cast<std::size_t>(frames);
    const bool trained = u.symbols() == 0 && u.users() > 0;

    std::vector<double> values(samples, 0.0);
    const auto count = static_cast<std::int64_t>(samples);
#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
    for (std::int64_t sample = 0; sample < count; ++sample) {
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(sample), 0);
        std::vector<SlotState> truth(T);
        std::vector<KnownBits> known(trained ? T : 0);
        ActiveSet previous;
        for (std::size_t t = 0; t < T; ++t) {
            ActiveSet a;
            if (t == 0) {
                for (int i = 0; i < u.users(); ++i)
                    if (rng.bernoulli(first_activity)) a.bits |= Mask{1} << i;
            } else {
                a = sample_transition(m, previous, rng);
            }
            previous = a;
            SlotState s{a, 0, std::nullopt};
            if (u.symbols() > 0)
                for (int k = 0; k < a.size() * u.symbols(); ++k) s.data |= static_cast<std::uint32_t>(rng.bit()) << k;
            if (u.reference()) s.ref_bit = rng.bit();
            if (trained) {
                known[t].resize(static_cast<std::size_t>(u.users()));
                for (auto& b : known[t]) b = antipodal(static_cast<std::uint32_t>(rng.bit()));
            }
            truth[t] = s;
        }

        // Per-slot candidates within the distance budget.
        struct Candidate {
            std::size_t state;
            ActiveSet active;
            int distance;
            double xi;
            double log_data;
        };
        std::vector<std::vector<Candidate>> candidates(T);
        for (std::size_t t = 0; t < T; ++t) {
            const std::span<const int> bits = trained ? std::span<const int>(known[t]) : std::span<const int>{};
            const Eigen::VectorXd b_true = symbol_vector(u, truth[t], bits);
            for (std::size_t s = 0; s < u.state_count(); ++s) {
                const SlotState alt = u.state(s);
                const int dist = state_distance(u, truth[t], alt);
                if (dist > restrict_n) continue;
                const Eigen::VectorXd d = b_true - symbol_vector(u, alt, bits);
                const double ld = with_data ? -u.symbols() * alt.active.size() * std::numbers::ln2 : 0.0;
                candidates[t].push_back({s, alt.active, dist, quadratic(c.gram(), d), ld});
            }
        }
        const double log_truth = log_sequence_prior(m, u, truth, true, with_data);

        double total = 0.0;
        // Depth-first walk over competitor sequences.
        const auto walk = [&](auto&& self, std::size_t t, int used, double xi, double log_comp, ActiveSet prev) -> void {
            if (t == T) {
                if (used == 0) return;
                const double eta = mode == PepMode::ml ? 0.0 : c.n0() * (log_comp - log_truth);
                total += pep_from(xi, eta, c.n0(), mode);
                return;
            }
            for (const auto& cand : candidates[t]) {
                if (used + cand.distance > restrict_n) continue;
                double lp = 0.0;
                if (mode != PepMode::ml)
                    lp = (t == 0 ? log_first_slot_prior(m, cand.active) : log_transition(m, prev, cand.active)) +
                         cand.log_data;
                self(self, t + 1, used + cand.distance, xi + cand.xi, log_comp + lp, cand.active);
            }
        };
        walk(walk, 0, 0, 0.0, 0.0, ActiveSet{});
        values[static_cast<std::size_t>(sample)] = total;
    }

    BoundEstimate out;
    out.samples = samples;
    double sum = 0.0;
    for (double v : values) sum += v;
    out.mean = sum / static_cast<double>(samples);
    if (samples > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - out.mean) * (v - out.mean);
        out.stderr_ = std::sqrt(ss / static_cast<double>(samples - 1) / static_cast<double>(samples));
    }
    return out;
}

}  // namespace rsmud
