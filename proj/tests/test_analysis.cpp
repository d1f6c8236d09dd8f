#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "oracles.hpp"
#include "rsmud/analysis.hpp"
#include "rsmud/kernels.hpp"

using namespace rsmud;

namespace {

double simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm, double fb,
               double whole, double eps, int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps) return left + right + (left + right - whole) / 15.0;
    return simpson(f, a, m, fa, flm, fm, left, eps / 2.0, depth - 1) +
           simpson(f, m, b, fm, frm, fb, right, eps / 2.0, depth - 1);
}

// Tail of the standard normal by adaptive quadrature of its density.
double q_oracle(double x) {
    const auto pdf = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi); };
    if (x < 0.0) return 1.0 - q_oracle(-x);
    const double a = x;
    const double b = x + 40.0;
    const double fa = pdf(a);
    const double fb = pdf(b);
    const double fm = pdf(0.5 * (a + b));
    return simpson(pdf, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), 1e-16, 60);
}

// ||sum_k d_k s_k||^2 computed on the chips.
double chip_energy(const SignatureSet& sig, const Eigen::VectorXd& d) {
    Eigen::VectorXd w = Eigen::VectorXd::Zero(sig.length);
    for (std::size_t k = 0; k < sig.size(); ++k) w += d[static_cast<Eigen::Index>(k)] * sig.chips[k];
    return w.squaredNorm();
}

SlotState random_state(const Universe& u, std::mt19937_64& gen) {
    return u.state(gen() % u.state_count());
}

}  // namespace

TEST_CASE("Q function against quadrature") {
    CHECK(q_function(0.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(q_function(3.0) == doctest::Approx(1.349898031630095e-3).epsilon(1e-12));
    for (double x = -5.0; x <= 8.0; x += 0.37) CHECK(q_function(x) == doctest::Approx(q_oracle(x)).epsilon(1e-9));
    CHECK(q_function(40.0) >= 0.0);
    CHECK(q_function(-40.0) == doctest::Approx(1.0));
}

TEST_CASE("xi equals the chip-level energy of the difference") {
    std::mt19937_64 gen(11);
    for (int trial = 0; trial < 100; ++trial) {
        const int k = 1 + static_cast<int>(gen() % 4);
        const int n = static_cast<int>(gen() % 2);
        const bool ref = gen() % 2 == 0;
        const bool dyn = gen() % 2 == 0;
        const Universe u(k, n, ref);
        const auto sig = make_signatures(SpreadingFamily::msequence, 7, k + (ref ? 1 : 0), ref);
        const ChannelModel c = make_channel(sig, 3.0);
        const std::size_t frames = 1 + gen() % 3;
        std::vector<SlotState> a, b;
        std::vector<KnownBits> known;
        const SlotState a0 = random_state(u, gen);
        const SlotState b0 = random_state(u, gen);
        for (std::size_t t = 0; t < frames; ++t) {
            SlotState x = dyn ? random_state(u, gen) : a0;
            SlotState y = dyn ? random_state(u, gen) : b0;
            if (!dyn && n == 1) {
                // Static pairs keep identities but data change every slot.
                x = u.state(u.first_index(a0.active) + gen() % u.block_size(a0.active));
                y = u.state(u.first_index(b0.active) + gen() % u.block_size(b0.active));
            }
            a.push_back(x);
            b.push_back(y);
            KnownBits kb(static_cast<std::size_t>(k));
            for (auto& v : kb) v = gen() % 2 ? 1 : -1;
            known.push_back(kb);
        }
        const std::span<const KnownBits> kspan = n == 0 ? std::span<const KnownBits>(known) : std::span<const KnownBits>{};
        const auto ctx = make_pair_context(u, c, a, b, kspan, dyn);
        CHECK(difference_structure_ok(ctx));
        double expect = 0.0;
        for (std::size_t t = 0; t < frames; ++t) {
            const std::span<const int> kb = n == 0 ? std::span<const int>(known[t]) : std::span<const int>{};
            expect += chip_energy(sig, symbol_vector(u, a[t], kb) - symbol_vector(u, b[t], kb));
        }
        const TrafficModel m{k, 0.3, 0.7, n};
        CHECK(xi_eta(ctx, m, PepMode::ml).xi == doctest::Approx(expect).epsilon(1e-12));
        CHECK(xi_eta(ctx, m, PepMode::ml).eta == 0.0);
        for (PepMode mode : {PepMode::map_identities, PepMode::map_with_data}) {
            const double lp = oracle::log_sequence_prior(m, b, dyn, mode == PepMode::map_with_data) -
                               oracle::log_sequence_prior(m, a, dyn, mode == PepMode::map_with_data);
            CHECK(xi_eta(ctx, m, mode).eta == doctest::Approx(c.n0() * lp).epsilon(1e-12));
        }
    }
}

TEST_CASE("single data flip of one active user has xi = 4") {
    const Universe u(3, 1, false);
    const auto sig = make_signatures(SpreadingFamily::msequence, 7, 3, false);
    const ChannelModel c = make_channel(sig, 0.0);
    const SlotState a{ActiveSet{0b101}, 0b00, std::nullopt};
    const SlotState b{ActiveSet{0b101}, 0b10, std::nullopt};
    const auto ctx = make_pair_context(u, c, {a}, {b});
    CHECK(xi_eta(ctx, TrafficModel{3, 0.5, 0.5, 1}, PepMode::ml).xi == doctest::Approx(4.0));
    CHECK(state_distance(u, a, b) == 1);
    CHECK(pep(ctx, TrafficModel{3, 0.5, 0.5, 1}, PepMode::ml) == doctest::Approx(q_oracle(std::sqrt(2.0))).epsilon(1e-9));
}

TEST_CASE("PEP limits and monotonicity") {
    CHECK(pep_from(0.0, -1.0, 1.0, PepMode::map_identities) == 1.0);
    CHECK(pep_from(0.0, 1.0, 1.0, PepMode::map_identities) == 0.0);
    CHECK(pep_from(0.0, 0.0, 1.0, PepMode::map_identities) == 0.5);
    CHECK(pep_from(0.0, 5.0, 1.0, PepMode::ml) == 0.5);
    std::mt19937_64 gen(12);
    std::uniform_real_distribution<double> unit(0.01, 10.0);
    for (int i = 0; i < 500; ++i) {
        const double xi = unit(gen);
        const double n0 = unit(gen);
        // ML decreases with xi and increases with N0.
        CHECK(pep_from(xi * 1.5, 0.0, n0, PepMode::ml) <= pep_from(xi, 0.0, n0, PepMode::ml));
        CHECK(pep_from(xi, 0.0, n0 * 1.5, PepMode::ml) >= pep_from(xi, 0.0, n0, PepMode::ml));
        // MAP with eta = 0 reduces to the ML form.
        CHECK(pep_from(xi, 0.0, n0, PepMode::map_identities) ==
              doctest::Approx(pep_from(xi, 0.0, n0, PepMode::ml)).epsilon(1e-12));
        // A larger prior advantage of the competitor raises the PEP.
        CHECK(pep_from(xi, 1.0, n0, PepMode::map_identities) >= pep_from(xi, 0.0, n0, PepMode::map_identities));
    }
}

TEST_CASE("closed-form PEP agrees with a Monte Carlo decision rule") {
    std::mt19937_64 gen(13);
    int checked = 0;
    while (checked < 12) {
        const int k = 1 + static_cast<int>(gen() % 2);
        const int n = static_cast<int>(gen() % 2);
        const bool ref = gen() % 2 == 0;
        const bool dyn = gen() % 2 == 0;
        const Universe u(k, n, ref);
        const auto sig = make_signatures(SpreadingFamily::kasami, 15, k + (ref ? 1 : 0), ref);
        const ChannelModel c = make_channel(sig, 2.0 + static_cast<double>(gen() % 4));
        const std::size_t frames = 1 + gen() % 2;
        std::vector<SlotState> a, b;
        const SlotState a0 = random_state(u, gen);
        const SlotState b0 = random_state(u, gen);
        for (std::size_t t = 0; t < frames; ++t) {
            a.push_back(dyn ? random_state(u, gen) : u.state(u.first_index(a0.active) + gen() % u.block_size(a0.active)));
            b.push_back(dyn ? random_state(u, gen) : u.state(u.first_index(b0.active) + gen() % u.block_size(b0.active)));
        }
        std::vector<KnownBits> known(frames, KnownBits(static_cast<std::size_t>(k), 1));
        const std::span<const KnownBits> kspan = n == 0 ? std::span<const KnownBits>(known) : std::span<const KnownBits>{};
        const auto ctx = make_pair_context(u, c, a, b, kspan, dyn);
        const TrafficModel m{k, 0.3, 0.75, n};
        if (!(xi_eta(ctx, m, PepMode::ml).xi > 0.0)) continue;
        const PepMode mode = static_cast<PepMode>(checked % 3);
        const double p = pep(ctx, m, mode);
        const auto mc = oracle::mc_pep(ctx, m, mode, kspan, 200000, 77 + static_cast<std::uint64_t>(checked));
        CHECK(std::abs(p - mc.p) <= 4.0 * mc.se);
        ++checked;
    }
}

TEST_CASE("pair context validation") {
    const Universe u(2, 0, false);
    const auto sig = make_signatures(SpreadingFamily::msequence, 7, 2, false);
    const ChannelModel c = make_channel(sig, 0.0);
    const SlotState a{ActiveSet{1}, 0, std::nullopt};
    const SlotState b{ActiveSet{2}, 0, std::nullopt};
    const std::vector<KnownBits> known{{1, -1}, {1, 1}};
    CHECK_THROWS_AS((void)make_pair_context(u, c, {a}, {a, b}, known), std::invalid_argument);
    CHECK_THROWS_AS((void)make_pair_context(u, c, {a, b}, {b, b}, known, false), std::invalid_argument);
    CHECK_NOTHROW((void)make_pair_context(u, c, {a, b}, {b, b}, known, true));
    const auto same = make_pair_context(u, c, {a}, {a}, std::span<const KnownBits>(known).first(1));
    CHECK_THROWS_AS((void)pep(same, TrafficModel{2, 0.3, 0.3, 0}, PepMode::ml), std::invalid_argument);
}

TEST_CASE("xi and the prior offset are additive over slots") {
    const Universe u(2, 1, true);
    const auto sig = make_signatures(SpreadingFamily::kasami, 15, 3, true);
    const ChannelModel c = make_channel(sig, 4.0);
    const TrafficModel m{2, 0.2, 0.8, 1};
    std::mt19937_64 gen(14);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<SlotState> a, b;
        for (int t = 0; t < 4; ++t) {
            a.push_back(random_state(u, gen));
            b.push_back(random_state(u, gen));
        }
        const auto whole = xi_eta(make_pair_context(u, c, a, b, {}, true), m, PepMode::ml).xi;
        double parts = 0.0;
        for (int t = 0; t < 4; ++t)
            parts += xi_eta(make_pair_context(u, c, {a[static_cast<std::size_t>(t)]}, {b[static_cast<std::size_t>(t)]}, {}, true), m,
                            PepMode::ml)
                         .xi;
        CHECK(whole == doctest::Approx(parts).epsilon(1e-12));
    }
}

TEST_CASE("open-eye frame length") {
    const Universe u(1, 0, false);
    const auto sig = make_signatures(SpreadingFamily::msequence, 7, 1, false);
    const TrafficModel m{1, 0.1, 0.1, 0};
    // ML needs one slot. MAP: T * 1 > N0 ln 9 with N0 = 1 gives T = 3.
    CHECK(t_min_open_eye(u, m, make_channel(sig, 0.0), PepMode::ml) == 1);
    CHECK(t_min_open_eye(u, m, make_channel(sig, 0.0), PepMode::map_identities) == 3);
    // Blind N = 1: T (1 - N0 ln 2) > N0 ln 9, T = 8 at N0 = 1.
    const Universe blind(1, 1, false);
    const TrafficModel mb{1, 0.1, 0.1, 1};
    CHECK(t_min_open_eye(blind, mb, make_channel(sig, 0.0), PepMode::map_with_data) == 8);
    // N0 ln 2 > 1: the eye never opens.
    CHECK_FALSE(t_min_open_eye(blind, mb, make_channel(sig, -5.0), PepMode::map_with_data).has_value());
    // A ten-dB channel opens on the first slot.
    CHECK(t_min_open_eye(u, m, make_channel(sig, 10.0), PepMode::map_identities) == 1);
}

TEST_CASE("static union bound with one interferer by hand") {
    const Universe u(1, 0, false);
    const auto sig = make_signatures(SpreadingFamily::msequence, 7, 1, false);
    for (double db : {0.0, 4.0, 8.0}) {
        const ChannelModel c = make_channel(sig, db);
        const double n0 = std::pow(10.0, -db / 10.0);
        for (double a : {0.1, 0.5}) {
            const TrafficModel m{1, a, a, 0};
            for (int t : {1, 3}) {
                const double ml = q_oracle(std::sqrt(t / (2.0 * n0)));
                CHECK(union_bound_static(u, m, c, t, PepMode::ml) == doctest::Approx(ml).epsilon(1e-9));
                // 0 -> 1 has eta = N0 ln(a / (1 - a)); 1 -> 0 the opposite.
                const double eta = n0 * std::log(a / (1.0 - a));
                const double map = (1.0 - a) * q_oracle((t - eta) / std::sqrt(2.0 * n0 * t)) +
                                   a * q_oracle((t + eta) / std::sqrt(2.0 * n0 * t));
                CHECK(union_bound_static(u, m, c, t, PepMode::map_identities) == doctest::Approx(map).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("static union bound: restrictions, exact averaging and frame length") {
    for (const bool blind : {false, true}) {
        const int k = 3;
        const Universe u(k, blind ? 1 : 0, blind);
        const auto sig = make_signatures(SpreadingFamily::msequence, 7, k + (blind ? 1 : 0), blind);
        const ChannelModel c = make_channel(sig, 4.0);
        const TrafficModel m{k, 0.4, 0.4, u.symbols()};
        const PepMode mode = blind ? PepMode::map_with_data : PepMode::ml;
        const double full = union_bound_static(u, m, c, 2, mode);
        CHECK(union_bound_static(u, m, c, 2, mode, k) == doctest::Approx(full).epsilon(1e-12));
        const double p1 = union_bound_static(u, m, c, 2, mode, 1);
        CHECK(p1 <= full);
        CHECK(p1 > 0.0);
        CHECK(union_bound_static(u, m, c, 2, mode, 0) == 0.0);
        if (!blind) {
            // Exhaustive oracle over identity pairs and known bits of both slots.
            double expect = 0.0;
            for (Mask i = 0; i < 8; ++i)
                for (Mask j = 0; j < 8; ++j) {
                    if (i == j) continue;
                    double acc = 0.0;
                    for (int bits = 0; bits < 64; ++bits) {
                        double xi = 0.0;
                        for (int t = 0; t < 2; ++t) {
                            Eigen::VectorXd d = Eigen::VectorXd::Zero(3);
                            for (int user = 0; user < 3; ++user) {
                                const int b = (bits >> (3 * t + user)) & 1 ? -1 : 1;
                                d[user] = b * ((((i >> user) & 1U) ? 1 : 0) - (((j >> user) & 1U) ? 1 : 0));
                            }
                            xi += chip_energy(sig, d);
                        }
                        acc += q_oracle(std::sqrt(xi / (2.0 * c.n0()))) / 64.0;
                    }
                    expect += std::exp(oracle::log_product(3, 0.4, ActiveSet{i})) * acc;
                }
            CHECK(full == doctest::Approx(expect).epsilon(1e-9));
        }
        // Longer frames only help.
        CHECK(union_bound_static(u, m, c, 20, mode) < union_bound_static(u, m, c, 1, mode));
    }
}

TEST_CASE("semianalytic bound agrees with exhaustive enumeration") {
    const Universe u(1, 1, true);
    const auto sig = make_signatures(SpreadingFamily::kasami, 15, 2, true);
    const ChannelModel c = make_channel(sig, 3.0);
    const TrafficModel m{1, 0.2, 0.8, 1};
    const int frames = 2;
    const int n = 2;
    const PepMode mode = PepMode::map_with_data;
    // Exhaustive expectation over true sequences of the restricted PEP sum.
    double expect = 0.0;
    const std::size_t states = u.state_count();
    for (std::size_t t0 = 0; t0 < states; ++t0)
        for (std::size_t t1 = 0; t1 < states; ++t1) {
            const std::vector<SlotState> truth{u.state(t0), u.state(t1)};
            double pt = std::exp(oracle::log_sequence_prior(m, truth, true, true));
            pt *= 0.25;  // reference bits
            double sum = 0.0;
            for (std::size_t c0 = 0; c0 < states; ++c0)
                for (std::size_t c1 = 0; c1 < states; ++c1) {
                    const std::vector<SlotState> comp{u.state(c0), u.state(c1)};
                    const int dist = state_distance(u, truth[0], comp[0]) + state_distance(u, truth[1], comp[1]);
                    if (dist < 1 || dist > n) continue;
                    double xi = 0.0;
                    for (int t = 0; t < 2; ++t)
                        xi += chip_energy(sig, symbol_vector(u, truth[static_cast<std::size_t>(t)]) -
                                                   symbol_vector(u, comp[static_cast<std::size_t>(t)]));
                    const double eta = c.n0() * (oracle::log_sequence_prior(m, comp, true, true) -
                                                 oracle::log_sequence_prior(m, truth, true, true));
                    sum += xi > 0.0 ? q_oracle((xi - eta) / std::sqrt(2.0 * c.n0() * xi)) : (eta < 0 ? 1.0 : 0.0);
                }
            expect += pt * sum;
        }
    const auto est = semianalytic_dynamic_bound(u, m, c, frames, 40000, n, mode, 5);
    CHECK(est.stderr_ > 0.0);
    CHECK(std::abs(est.mean - expect) <= 4.0 * est.stderr_);
    CHECK(semianalytic_dynamic_bound(u, m, c, frames, 100, 0, mode, 5).mean == 0.0);
}

TEST_CASE("semianalytic bound is deterministic across thread counts") {
    const Universe u(3, 0, false);
    const auto sig = make_signatures(SpreadingFamily::msequence, 7, 3, false);
    const ChannelModel c = make_channel(sig, 6.0);
    const TrafficModel m{3, 0.2, 0.8, 0};
    set_thread_count(1);
    const auto a = semianalytic_dynamic_bound(u, m, c, 3, 300, 2, PepMode::map_identities, 42);
    set_thread_count(4);
    const auto b = semianalytic_dynamic_bound(u, m, c, 3, 300, 2, PepMode::map_identities, 42);
    set_thread_count(0);
    CHECK(a.mean == b.mean);
    CHECK(a.stderr_ == b.stderr_);
    const auto other = semianalytic_dynamic_bound(u, m, c, 3, 300, 2, PepMode::map_identities, 43);
    CHECK(other.mean != a.mean);
    // Widening the budget adds competitors.
    const auto wider = semianalytic_dynamic_bound(u, m, c, 3, 300, 3, PepMode::map_identities, 42);
    CHECK(wider.mean >= a.mean);
}
