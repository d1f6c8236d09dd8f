#include "rsmud/harness.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rsmud/analysis.hpp"
#include "rsmud/kernels.hpp"

namespace rsmud {

namespace {

std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", x);
    return buf;
}

/// One accumulated quantity of the simulation.
struct RecordSpec {
    std::size_t detector;
    MetricKind kind;
    std::size_t slot;  // 1-based, 0 for frame-level metrics
    std::string label;
};

std::vector<RecordSpec> record_specs(const ExperimentConfig& cfg, int frames, const std::string& suffix) {
    std::vector<RecordSpec> out;
    const bool dynamic = is_dynamic(cfg.scenario);
    const auto slots = report_slots(cfg, frames);
    for (std::size_t d = 0; d < cfg.detectors.size(); ++d) {
        const std::string prefix = to_string(cfg.detectors[d]) + ":";
        for (MetricKind k : cfg.metrics) {
            const std::string name = prefix + to_string(k);
            switch (k) {
            case MetricKind::ber:
            case MetricKind::ssep: out.push_back({d, k, 0, name + suffix}); break;
            case MetricKind::sep:
                if (!dynamic) {
                    out.push_back({d, k, 1, name + suffix});
                    break;
                }
                [[fallthrough]];
            case MetricKind::bsep:
                for (int s : slots)
                    out.push_back({d, k, static_cast<std::size_t>(s), name + "@" + std::to_string(s) + suffix});
                break;
            }
        }
    }
    return out;
}

SlotState classic_estimate(const Universe& u, const std::vector<int>& bits) {
    SlotState s;
    s.active = ActiveSet{u.full_mask()};
    const std::size_t off = u.reference() ? 1 : 0;
    if (u.reference()) s.ref_bit = bits[0] < 0 ? 1 : 0;
    for (int i = 0; i < u.users(); ++i)
        if (u.symbols() > 0 && bits[off + static_cast<std::size_t>(i)] < 0) s.data |= std::uint32_t{1} << (i * u.symbols());
    return s;
}

EmissionTable single_slot(const EmissionTable& em, std::size_t t) {
    const auto row = em.row(t);
    return EmissionTable(em.universe(), 1, std::vector<double>(row.begin(), row.end()));
}

}  // namespace

MetricRecord binomial_record(std::string metric, double point_db, std::uint64_t errors, std::uint64_t trials) {
    MetricRecord r;
    r.metric = std::move(metric);
    r.point_db = point_db;
    r.errors = errors;
    r.trials = trials;
    if (trials > 0) {
        r.estimate = static_cast<double>(errors) / static_cast<double>(trials);
        r.stderr_ = std::sqrt(r.estimate * (1.0 - r.estimate) / static_cast<double>(trials));
    }
    return r;
}

std::uint64_t compute_metric(std::span<const SlotState> truth, std::span<const SlotState> estimate, MetricKind kind,
                             std::size_t slot, bool blind) {
    if (truth.size() != estimate.size()) throw std::invalid_argument("compute_metric: sequences differ in length");
    const auto at = [&](std::size_t s) {
        if (s < 1 || s > truth.size()) throw std::invalid_argument("compute_metric: slot out of range");
        return s - 1;
    };
    switch (kind) {
    case MetricKind::ber: {
        std::uint64_t errors = 0;
        for (std::size_t t = 0; t < truth.size(); ++t)
            if (truth[t].ref_bit != estimate[t].ref_bit) ++errors;
        return errors;
    }
    case MetricKind::sep: {
        const std::size_t t = at(slot);
        return truth[t].active != estimate[t].active ? 1 : 0;
    }
    case MetricKind::bsep: {
        const std::size_t t = at(slot);
        return truth[t] != estimate[t] ? 1 : 0;
    }
    case MetricKind::ssep:
        for (std::size_t t = 0; t < truth.size(); ++t) {
            if (truth[t].active != estimate[t].active) return 1;
            if (blind && truth[t] != estimate[t]) return 1;
        }
        return 0;
    }
    return 0;
}

SetDensity state_prior(const Universe& u, double alpha) {
    std::vector<double> table(u.state_count());
    const double ref = u.reference() ? std::numbers::ln2 : 0.0;
    for (std::size_t s = 0; s < table.size(); ++s) {
        const ActiveSet a = u.mask_of(s);
        table[s] = log_pow(alpha, a.size()) + log_pow(1.0 - alpha, u.users() - a.size()) -
                   u.symbols() * a.size() * std::numbers::ln2 - ref;
    }
    return normalize(u, std::move(table));
}

Scene make_scene(const ExperimentConfig& cfg, double alpha, int frames, double ebn0_db) {
    const int channel_users = cfg.users + (cfg.reference_user ? 1 : 0);
    const SignatureSet sig =
        make_signatures(cfg.spreading, cfg.length, channel_users, cfg.reference_user, cfg.signature_order);
    const Universe u(cfg.users, cfg.symbols(), cfg.reference_user);
    const TrafficModel m{cfg.users, alpha, cfg.mu, cfg.symbols()};
    m.validate();
    return Scene{cfg.scenario,         u, m, make_channel(sig, ebn0_db), state_prior(u, alpha),
                 initial_prior(m), frames, cfg.window_delta};
}

Frame draw_frame(const Scene& scene, Rng& rng) {
    const Universe& u = scene.universe;
    const TrafficModel& m = scene.traffic;
    const auto T = static_cast<std::size_t>(scene.frames);
    const bool dynamic = is_dynamic(scene.scenario);
    const bool trained = !is_blind(scene.scenario);
    Frame f;
    f.truth.resize(T);

    ActiveSet current;
    if (dynamic) {
        const double p0 = (1.0 + m.alpha - m.mu > 0.0) ? stationary_activity(m) : m.alpha;
        for (int i = 0; i < u.users(); ++i)
            if (rng.bernoulli(p0)) current.bits |= Mask{1} << i;
    } else {
        for (int i = 0; i < u.users(); ++i)
            if (rng.bernoulli(m.alpha)) current.bits |= Mask{1} << i;
    }
    for (std::size_t t = 0; t < T; ++t) {
        if (dynamic) current = sample_transition(m, current, rng);
        SlotState s{current, 0, std::nullopt};
        for (int k = 0; k < current.size() * u.symbols(); ++k) s.data |= rng.bit() << k;
        if (u.reference()) s.ref_bit = static_cast<int>(rng.bit());
        f.truth[t] = s;
        if (trained) {
            KnownBits bits(static_cast<std::size_t>(u.users()));
            for (auto& b : bits) b = antipodal(rng.bit());
            f.known.push_back(std::move(bits));
        }
    }
    for (std::size_t t = 0; t < T; ++t) {
        const std::span<const int> known = trained ? std::span<const int>(f.known[t]) : std::span<const int>{};
        f.y.push_back(synthesize_observation(scene.channel, u, f.truth[t], rng, known));
    }
    return f;
}

std::vector<SlotState> run_detector(const Scene& scene, DetectorKind d, const EmissionTable& em,
                                    std::span<const Observation> y) {
    const Universe& u = scene.universe;
    const std::size_t T = em.frames();
    std::vector<SlotState> out;
    out.reserve(T);
    const auto states = [&](const std::vector<std::size_t>& idx) {
        for (std::size_t s : idx) out.push_back(u.state(s));
    };
    const bool dynamic = is_dynamic(scene.scenario);
    switch (d) {
    case DetectorKind::classic_ml:
        for (std::size_t t = 0; t < T; ++t) out.push_back(classic_estimate(u, classic_all_active_ml(y[t], scene.channel)));
        break;
    case DetectorKind::joint_ml:
    case DetectorKind::map_static: {
        const auto detect = [&](const EmissionTable& e) {
            return d == DetectorKind::joint_ml ? joint_ml_detect(e) : static_map_detect(e, scene.static_state_prior);
        };
        if (dynamic) {
            for (std::size_t t = 0; t < T; ++t) states(detect(single_slot(em, t)).states);
        } else {
            states(detect(em).states);
        }
        break;
    }
    case DetectorKind::bayes_causal: states(causal_map_sequence(em, scene.traffic, scene.prior0)); break;
    case DetectorKind::viterbi: states(viterbi_sequence_map(em, scene.traffic, scene.prior0).path); break;
    case DetectorKind::viterbi_window:
        states(sliding_window_viterbi(em, scene.traffic, scene.prior0, scene.window_delta));
        break;
    }
    return out;
}

std::vector<MetricRecord> run_experiment(const ExperimentConfig& cfg,
                                         const std::function<void(const MetricRecord&)>& on_record) {
    validate(cfg);
    std::vector<MetricRecord> records;
    const auto emit = [&](MetricRecord r) {
        if (on_record) on_record(r);
        records.push_back(std::move(r));
    };
    const PepMode mode = bound_mode(cfg);
    const bool blind = is_blind(cfg.scenario);
    std::uint64_t point_index = 0;

    for (double alpha : cfg.alpha) {
        for (int frames : cfg.frames) {
            std::string suffix;
            if (cfg.alpha.size() > 1) suffix += "|alpha=" + format_number(alpha);
            if (cfg.frames.size() > 1) suffix += "|T=" + std::to_string(frames);
            const auto specs = record_specs(cfg, frames, suffix);

            for (double db : cfg.ebn0_db) {
                const std::uint64_t point = point_index++;
                const Scene scene = make_scene(cfg, alpha, frames, db);

                std::vector<std::uint64_t> errors(specs.size(), 0);
                std::vector<std::uint64_t> opportunities(specs.size(), 0);
                std::uint64_t done = 0;
                while (done < cfg.trials && !specs.empty()) {
                    const std::uint64_t n = std::min(cfg.batch, cfg.trials - done);
                    std::exception_ptr failure;
#pragma omp parallel num_threads(thread_count())
                    {
                        std::vector<std::uint64_t> local_err(specs.size(), 0);
                        std::vector<std::uint64_t> local_opp(specs.size(), 0);
#pragma omp for schedule(static)
                        for (std::int64_t k = 0; k < static_cast<std::int64_t>(n); ++k) {
                            try {
                                Rng rng = Rng::stream(cfg.seed, point, done + static_cast<std::uint64_t>(k));
                                const Frame f = draw_frame(scene, rng);
                                const EmissionTable em = make_emissions(scene.channel, scene.universe, f.y, f.known);
                                for (std::size_t d = 0; d < cfg.detectors.size(); ++d) {
                                    const auto est = run_detector(scene, cfg.detectors[d], em, f.y);
                                    for (std::size_t r = 0; r < specs.size(); ++r) {
                                        if (specs[r].detector != d) continue;
                                        local_err[r] += compute_metric(f.truth, est, specs[r].kind,
                                                                       std::max<std::size_t>(specs[r].slot, 1), blind);
                                        local_opp[r] += specs[r].kind == MetricKind::ber ? f.truth.size() : 1;
                                    }
                                }
                            } catch (...) {
#pragma omp critical(rsmud_failure)
                                if (!failure) failure = std::current_exception();
                            }
                        }
#pragma omp critical(rsmud_merge)
                        for (std::size_t r = 0; r < specs.size(); ++r) {
                            errors[r] += local_err[r];
                            opportunities[r] += local_opp[r];
                        }
                    }
                    if (failure) std::rethrow_exception(failure);
                    done += n;
                    if (cfg.min_errors > 0) {
                        bool enough = true;
                        for (std::uint64_t e : errors) enough = enough && e >= cfg.min_errors;
                        if (enough) break;
                    }
                }
                for (std::size_t r = 0; r < specs.size(); ++r)
                    emit(binomial_record(specs[r].label, db, errors[r], opportunities[r]));

                if (std::find(cfg.metrics.begin(), cfg.metrics.end(), MetricKind::ber) != cfg.metrics.end() &&
                    !cfg.detectors.empty()) {
                    MetricRecord r;
                    r.metric = "single_user:BER" + suffix;
                    r.point_db = db;
                    r.estimate = q_function(std::sqrt(2.0 / scene.channel.n0()));
                    emit(r);
                }
                for (AnalyticKind a : cfg.analytic) {
                    MetricRecord r;
                    r.point_db = db;
                    switch (a) {
                    case AnalyticKind::union_bound:
                        r.metric = "union_bound:SEP" + suffix;
                        r.estimate = union_bound_static(scene.universe, scene.traffic, scene.channel, frames, mode);
                        break;
                    case AnalyticKind::restricted:
                        r.metric = "p" + std::to_string(cfg.restrict_n) + ":SEP" + suffix;
                        r.estimate = union_bound_static(scene.universe, scene.traffic, scene.channel, frames, mode,
                                                        cfg.restrict_n);
                        break;
                    case AnalyticKind::semianalytic: {
                        r.metric = "semianalytic:SSEP" + suffix;
                        const auto est = semianalytic_dynamic_bound(scene.universe, scene.traffic, scene.channel,
                                                                    frames, cfg.bound_samples, cfg.restrict_n, mode,
                                                                    splitmix64(cfg.seed ^ splitmix64(point)));
                        r.estimate = est.mean;
                        r.stderr_ = est.stderr_;
                        r.trials = est.samples;
                        break;
                    }
                    }
                    emit(r);
                }
            }
        }
    }
    return records;
}

void write_csv(std::ostream& out, std::span<const MetricRecord> records) {
    out << "metric,point_db,estimate,stderr,trials\n";
    char buf[128];
    for (const auto& r : records) {
        std::snprintf(buf, sizeof buf, "%g,%.10g,%.10g,%llu", r.point_db, r.estimate, r.stderr_,
                      static_cast<unsigned long long>(r.trials));
        out << r.metric << ',' << buf << '\n';
    }
}

std::string results_json(const ExperimentConfig& cfg, std::span<const MetricRecord> records) {
    nlohmann::ordered_json j;
    j["config"] = nlohmann::ordered_json::parse(to_json(cfg));
    j["seed"] = cfg.seed;
    auto& rows = j["records"] = nlohmann::ordered_json::array();
    for (const auto& r : records) {
        rows.push_back({{"metric", r.metric},
                        {"point_db", r.point_db},
                        {"estimate", r.estimate},
                        {"stderr", r.stderr_},
                        {"trials", r.trials},
                        {"errors", r.errors}});
    }
    return j.dump(2);
}

}  // namespace rsmud
