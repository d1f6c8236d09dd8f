#include "rsmud/traffic.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rsmud {

namespace {

void check_probability(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string("traffic model: ") + what + " outside [0,1]");
}

/// Spreads an identity-level log table over the data patterns of `u`.
std::vector<double> spread_over_data(const Universe& u, const std::vector<double>& log_identity) {
    std::vector<double> out(u.state_count(), kNegInf);
    for (std::size_t m = 0; m < u.mask_count(); ++m) {
        const ActiveSet a{static_cast<Mask>(m)};
        const double v = log_identity[m] - u.symbols() * a.size() * std::numbers::ln2;
        const std::size_t first = u.first_index(a);
        for (std::size_t i = 0; i < u.block_size(a); ++i) out[first + i] = v;
    }
    return out;
}

}  // namespace

void TrafficModel::validate() const {
    if (users < 0 || users > kMaxUsers) throw std::invalid_argument("traffic model: users outside [0,16]");
    if (symbols < 0) throw std::invalid_argument("traffic model: negative symbols_per_slot");
    check_probability(alpha, "alpha");
    check_probability(mu, "mu");
}

SetDensity product_prior(int users, int symbols, double activity) {
    check_probability(activity, "activity");
    const Universe u(users, symbols, false);
    std::vector<double> log_identity(u.mask_count());
    for (std::size_t m = 0; m < u.mask_count(); ++m) {
        const int k = std::popcount(static_cast<Mask>(m));
        log_identity[m] = log_pow(activity, k) + log_pow(1.0 - activity, users - k);
    }
    return SetDensity(u, spread_over_data(u, log_identity));
}

SetDensity static_prior(const TrafficModel& m) {
    m.validate();
    return product_prior(m.users, m.symbols, m.alpha);
}

SetDensity survival_kernel(const TrafficModel& m, ActiveSet from) {
    m.validate();
    const Universe u = m.universe();
    std::vector<double> log_identity(u.mask_count(), kNegInf);
    for (std::size_t c = 0; c < u.mask_count(); ++c) {
        const ActiveSet to{static_cast<Mask>(c)};
        if (!to.subset_of(from)) continue;
        log_identity[c] = log_pow(m.mu, to.size()) + log_pow(1.0 - m.mu, from.size() - to.size());
    }
    return SetDensity(u, spread_over_data(u, log_identity));
}

SetDensity birth_kernel(const TrafficModel& m, ActiveSet from) {
    m.validate();
    const Universe u = m.universe();
    std::vector<double> log_identity(u.mask_count(), kNegInf);
    for (std::size_t c = 0; c < u.mask_count(); ++c) {
        const ActiveSet to{static_cast<Mask>(c)};
        if ((to & from).bits != 0) continue;
        log_identity[c] = log_pow(m.alpha, to.size()) + log_pow(1.0 - m.alpha, m.users - from.size() - to.size());
    }
    return SetDensity(u, spread_over_data(u, log_identity));
}

SetDensity transition_density(const TrafficModel& m, ActiveSet from) {
    const Universe u = m.universe();
    if (from.bits > u.full_mask()) throw std::invalid_argument("transition_density: set outside universe");
    const ActiveSet outside{u.full_mask() & ~from.bits};
    return convolve_union(survival_kernel(m, from), from, birth_kernel(m, from), outside);
}

double log_transition(const TrafficModel& m, ActiveSet from, ActiveSet to) {
    const int stay = (to & from).size();
    const int die = from.size() - stay;
    const int born = to.minus(from).size();
    const int idle = m.users - from.size() - born;
    return log_pow(m.mu, stay) + log_pow(1.0 - m.mu, die) + log_pow(m.alpha, born) + log_pow(1.0 - m.alpha, idle);
}

double stationary_activity(const TrafficModel& m) {
    m.validate();
    const double denom = 1.0 + m.alpha - m.mu;
    if (!(denom > 0.0)) throw std::domain_error("stationary_activity: absorbing chain (mu = 1, alpha = 0)");
    return m.alpha / denom;
}

SetDensity initial_prior(const TrafficModel& m) {
    m.validate();
    if (1.0 + m.alpha - m.mu > 0.0) return product_prior(m.users, 0, stationary_activity(m));
    return product_prior(m.users, 0, m.alpha);
}

ActiveSet sample_active_set(const SetDensity& identity_density, Rng& rng) {
    const Universe& u = identity_density.universe();
    double target = rng.uniform();
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < u.state_count(); ++i) {
        const double p = identity_density.mass(i);
        if (p <= 0.0) continue;
        last_positive = i;
        if (target < p) return u.mask_of(i);
        target -= p;
    }
    return u.mask_of(last_positive);
}

ActiveSet sample_transition(const TrafficModel& m, ActiveSet from, Rng& rng) {
    ActiveSet to;
    for (int i = 0; i < m.users; ++i) {
        const double p = from.contains(i) ? m.mu : m.alpha;
        if (rng.bernoulli(p)) to.bits |= Mask{1} << i;
    }
    return to;
}

}  // namespace rsmud
