#include "rsmud/rst.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>

namespace rsmud {

Universe::Universe(int users, int symbols, bool reference)
    : users_(users), symbols_(symbols), reference_(reference), state_count_(0) {
    if (users < 0 || users > kMaxUsers)
        throw std::invalid_argument("universe: user count must lie in [0, 16]");
    if (symbols < 0 || users + symbols * users > 26)
        throw std::invalid_argument("universe: 2^K * 2^(NK) exceeds the 2^26 table limit");
    // (1 + 2^N)^K states, each mask carrying 2^{N|m|} data patterns.
    offsets_.resize(mask_count() + 1);
    std::size_t acc = 0;
    for (std::size_t m = 0; m < mask_count(); ++m) {
        offsets_[m] = acc;
        acc += std::size_t{1} << (symbols_ * std::popcount(static_cast<Mask>(m)));
        if (acc * ref_factor() > kMaxTableEntries)
            throw std::invalid_argument("universe: state table exceeds 2^26 entries");
    }
    offsets_[mask_count()] = acc;
    state_count_ = acc * ref_factor();
}

std::size_t Universe::index(const SlotState& s) const {
    if (s.active.bits > full_mask()) throw std::out_of_range("slot state: mask outside universe");
    if (s.data >= patterns(s.active)) throw std::out_of_range("slot state: data wider than N|B| bits");
    if (s.ref_bit.has_value() != reference_)
        throw std::invalid_argument("slot state: reference bit presence does not match universe");
    std::size_t i = offsets_[s.active.bits] + s.data;
    if (reference_) i = 2 * i + static_cast<std::size_t>(*s.ref_bit & 1);
    return i;
}

ActiveSet Universe::mask_of(std::size_t index) const {
    const std::size_t base = index / ref_factor();
    auto it = std::upper_bound(offsets_.begin(), offsets_.end(), base);
    return {static_cast<Mask>(std::distance(offsets_.begin(), it) - 1)};
}

SlotState Universe::state(std::size_t index) const {
    if (index >= state_count_) throw std::out_of_range("state index outside universe");
    SlotState s;
    s.active = mask_of(index);
    const std::size_t base = index / ref_factor();
    s.data = static_cast<std::uint32_t>(base - offsets_[s.active.bits]);
    if (reference_) s.ref_bit = static_cast<int>(index & 1U);
    return s;
}

std::uint32_t restrict_data(const SlotState& s, ActiveSet sub, int symbols) {
    const std::uint32_t sym_mask = (symbols >= 32) ? ~0U : ((1U << symbols) - 1U);
    std::uint32_t out = 0;
    int src = 0;
    int dst = 0;
    for (Mask rest = s.active.bits; rest != 0; rest &= rest - 1) {
        const int user = std::countr_zero(rest);
        if (sub.contains(user)) {
            out |= ((s.data >> (src * symbols)) & sym_mask) << (dst * symbols);
            ++dst;
        }
        ++src;
    }
    return out;
}

std::uint32_t merge_data(ActiveSet part_a, std::uint32_t data_a, ActiveSet part_b, std::uint32_t data_b,
                         int symbols) {
    const std::uint32_t sym_mask = (symbols >= 32) ? ~0U : ((1U << symbols) - 1U);
    std::uint32_t out = 0;
    int ia = 0;
    int ib = 0;
    int dst = 0;
    for (Mask rest = (part_a | part_b).bits; rest != 0; rest &= rest - 1) {
        const int user = std::countr_zero(rest);
        std::uint32_t word;
        if (part_a.contains(user)) {
            word = (data_a >> (ia++ * symbols)) & sym_mask;
        } else {
            word = (data_b >> (ib++ * symbols)) & sym_mask;
        }
        out |= word << (dst++ * symbols);
    }
    return out;
}

SetDensity::SetDensity(Universe universe, std::vector<double> log_mass)
    : universe_(std::move(universe)), log_mass_(std::move(log_mass)) {
    if (log_mass_.size() != universe_.state_count())
        throw std::invalid_argument("set density: table is not total over the universe");
}

double SetDensity::mass(std::size_t i) const { return std::exp(log_mass_[i]); }

std::size_t SetDensity::argmax() const {
    return static_cast<std::size_t>(std::distance(
        log_mass_.begin(), std::max_element(log_mass_.begin(), log_mass_.end())));
}

std::vector<double> SetDensity::mask_marginal() const {
    std::vector<double> out(universe_.mask_count(), 0.0);
    for (std::size_t m = 0; m < out.size(); ++m) {
        const ActiveSet a{static_cast<Mask>(m)};
        const std::size_t first = universe_.first_index(a);
        const std::size_t count = universe_.block_size(a);
        double acc = 0.0;
        for (std::size_t i = first; i < first + count; ++i) acc += std::exp(log_mass_[i]);
        out[m] = acc;
    }
    return out;
}

SetDensity normalize(const Universe& universe, std::vector<double> log_unnormalized) {
    const double top = *std::max_element(log_unnormalized.begin(), log_unnormalized.end());
    if (!std::isfinite(top)) {
        if (top > 0) throw NumericalCollapse("normalize: +inf log mass");
        throw NumericalCollapse("normalize: every entry has zero mass");
    }
    double acc = 0.0;
    for (double v : log_unnormalized) acc += std::exp(v - top);
    const double log_z = top + std::log(acc);
    for (double& v : log_unnormalized) v -= log_z;
    return SetDensity(universe, std::move(log_unnormalized));
}

SetDensity point_mass(const Universe& universe, const SlotState& s) {
    std::vector<double> table(universe.state_count(), kNegInf);
    table[universe.index(s)] = 0.0;
    return SetDensity(universe, std::move(table));
}

SetDensity uniform_density(const Universe& universe) {
    const double v = -std::log(static_cast<double>(universe.state_count()));
    return SetDensity(universe, std::vector<double>(universe.state_count(), v));
}

double set_integral(const SetDensity& f) {
    // Pairwise summation keeps the error of large tables near machine epsilon.
    std::vector<double> buf(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) buf[i] = f.mass(i);
    for (std::size_t width = 1; width < buf.size(); width *= 2)
        for (std::size_t i = 0; i + width < buf.size(); i += 2 * width) buf[i] += buf[i + width];
    return buf.empty() ? 0.0 : buf[0];
}

BeliefTable::BeliefTable(Universe universe, std::vector<double> values)
    : universe_(std::move(universe)), values_(std::move(values)) {
    if (universe_.symbols() != 0 || universe_.reference())
        throw std::invalid_argument("belief table: defined over identity sets only");
    if (values_.size() != universe_.mask_count())
        throw std::invalid_argument("belief table: one value per subset required");
}

BeliefTable belief_from_density(const SetDensity& f) {
    const Universe& u = f.universe();
    if (u.symbols() != 0 || u.reference())
        throw std::invalid_argument("belief_from_density: density must be over identity sets (N = 0)");
    std::vector<double> beta(u.mask_count());
    for (std::size_t m = 0; m < beta.size(); ++m) beta[m] = f.mass(m);
    for (int i = 0; i < u.users(); ++i) {
        const std::size_t bit = std::size_t{1} << i;
        for (std::size_t m = 0; m < beta.size(); ++m)
            if (m & bit) beta[m] += beta[m ^ bit];
    }
    return BeliefTable(u, std::move(beta));
}

SetDensity density_from_belief(const BeliefTable& beta) {
    const Universe& u = beta.universe();
    std::vector<double> f = beta.values();
    for (int i = 0; i < u.users(); ++i) {
        const std::size_t bit = std::size_t{1} << i;
        for (std::size_t m = 0; m < f.size(); ++m)
            if (m & bit) f[m] -= f[m ^ bit];
    }
    std::vector<double> log_f(f.size());
    for (std::size_t m = 0; m < f.size(); ++m) {
        if (f[m] < -1e-9)
            throw std::invalid_argument("density_from_belief: negative mass, inconsistent belief table");
        log_f[m] = f[m] > 0.0 ? std::log(f[m]) : kNegInf;
    }
    return SetDensity(u, std::move(log_f));
}

SetDensity convolve_union(const SetDensity& survivors, ActiveSet ground_s, const SetDensity& newborns,
                          ActiveSet ground_n) {
    const Universe& u = survivors.universe();
    if (!(u == newborns.universe()))
        throw std::invalid_argument("convolve_union: densities live on different universes");
    if (u.reference()) throw std::invalid_argument("convolve_union: reference-user universes not supported");
    if ((ground_s & ground_n).bits != 0)
        throw std::invalid_argument("convolve_union: overlapping ground sets");
    if ((ground_s | ground_n).bits > u.full_mask())
        throw std::invalid_argument("convolve_union: ground set outside universe");
    for (std::size_t i = 0; i < u.state_count(); ++i) {
        const ActiveSet a = u.mask_of(i);
        if (survivors.log_mass(i) > kNegInf && !a.subset_of(ground_s))
            throw std::invalid_argument("convolve_union: survivor mass outside its ground set");
        if (newborns.log_mass(i) > kNegInf && !a.subset_of(ground_n))
            throw std::invalid_argument("convolve_union: newborn mass outside its ground set");
    }
    const int n = u.symbols();
    std::vector<double> out(u.state_count(), kNegInf);
    for (std::size_t i = 0; i < u.state_count(); ++i) {
        const SlotState c = u.state(i);
        if (!c.active.subset_of(ground_s | ground_n)) continue;
        const ActiveSet part_s = c.active & ground_s;
        const ActiveSet part_n = c.active & ground_n;
        const SlotState s{part_s, restrict_data(c, part_s, n), std::nullopt};
        const SlotState b{part_n, restrict_data(c, part_n, n), std::nullopt};
        out[i] = survivors.log_mass(u.index(s)) + newborns.log_mass(u.index(b));
    }
    return normalize(u, std::move(out));
}

std::string to_json(const SetDensity& f) {
    nlohmann::json j;
    j["K"] = f.universe().users();
    j["N"] = f.universe().symbols();
    if (f.universe().reference()) j["reference"] = true;
    auto& arr = j["log_mass"] = nlohmann::json::array();
    for (double v : f.log_mass()) {
        if (std::isfinite(v)) {
            arr.push_back(v);
        } else {
            arr.push_back(nullptr);
        }
    }
    return j.dump();
}

SetDensity density_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    const Universe u(j.at("K").get<int>(), j.at("N").get<int>(), j.value("reference", false));
    const auto& arr = j.at("log_mass");
    if (arr.size() != u.state_count())
        throw std::invalid_argument("density json: log_mass length does not match universe");
    std::vector<double> table;
    table.reserve(arr.size());
    for (const auto& v : arr) table.push_back(v.is_null() ? kNegInf : v.get<double>());
    return normalize(u, std::move(table));
}

}  // namespace rsmud
