// Command-line front end: simulate, pep, bound, tmin, signatures.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rsmud/analysis.hpp"
#include "rsmud/config.hpp"
#include "rsmud/harness.hpp"
#include "rsmud/kernels.hpp"

namespace {

using namespace rsmud;

struct ConfigOptions {
    std::string config_file;
    std::string preset_name;
    std::vector<std::string> settings;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> trials;

    void attach(CLI::App* app) {
        app->add_option("--config", config_file, "key = value configuration file")->check(CLI::ExistingFile);
        app->add_option("--preset", preset_name, "start from a figure preset (fig1..fig7)");
        app->add_option("--set", settings, "override one setting, KEY=VALUE (repeatable)");
        app->add_option("--seed", seed, "random seed");
        app->add_option("--trials", trials, "trials per sweep point");
    }

    [[nodiscard]] ExperimentConfig resolve() const {
        ExperimentConfig cfg = preset_name.empty() ? ExperimentConfig{} : preset(preset_name);
        if (!config_file.empty()) apply_config_file(cfg, config_file);
        for (const auto& s : settings) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("--set expects KEY=VALUE, got '" + s + "'");
            apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
        }
        if (seed) cfg.seed = *seed;
        if (trials) cfg.trials = *trials;
        validate(cfg);
        return cfg;
    }
};

std::string number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

/// "mask[:data[:ref]]" per slot, comma separated.
std::vector<SlotState> parse_states(const std::string& text, const Universe& u) {
    std::vector<SlotState> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::vector<unsigned long> parts;
        std::stringstream is(item);
        std::string p;
        while (std::getline(is, p, ':')) parts.push_back(std::stoul(p, nullptr, 0));
        if (parts.empty() || parts.size() > 3) throw std::invalid_argument("bad slot state '" + item + "'");
        SlotState s;
        s.active = ActiveSet{static_cast<Mask>(parts[0])};
        if (s.active.bits > u.full_mask()) throw std::invalid_argument("slot state uses users outside K");
        if (parts.size() > 1) s.data = static_cast<std::uint32_t>(parts[1]);
        if (u.reference()) s.ref_bit = parts.size() > 2 ? static_cast<int>(parts[2] & 1U) : 0;
        (void)u.index(s);
        out.push_back(s);
    }
    return out;
}

int cmd_simulate(const ConfigOptions& opts, const std::string& out_path, bool quiet) {
    const ExperimentConfig cfg = opts.resolve();
    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
        file.open(out_path);
        if (!file) throw std::runtime_error("cannot write '" + out_path + "'");
        out = &file;
    }
    const auto records = run_experiment(cfg, [&](const MetricRecord& r) {
        if (!quiet && out != &std::cout)
            std::cerr << r.metric << " @ " << r.point_db << " dB: " << r.estimate << " (+-" << r.stderr_ << ")\n";
    });
    write_csv(*out, records);
    if (!out_path.empty()) {
        std::ofstream side(out_path + ".json");
        side << results_json(cfg, records) << '\n';
    }
    return 0;
}

int cmd_bound(const ConfigOptions& opts, const std::string& kind_name, std::optional<int> restrict_n) {
    ExperimentConfig cfg = opts.resolve();
    const AnalyticKind kind = parse_analytic(kind_name);
    if (restrict_n) cfg.restrict_n = *restrict_n;
    cfg.analytic = {kind};
    cfg.detectors.clear();
    validate(cfg);
    const PepMode mode = bound_mode(cfg);
    std::cout << "EbN0_dB,value,stderr\n";
    for (double db : cfg.ebn0_db) {
        const Scene scene = make_scene(cfg, cfg.alpha.front(), cfg.frames.front(), db);
        double value = 0.0;
        double se = 0.0;
        switch (kind) {
        case AnalyticKind::union_bound:
            value = union_bound_static(scene.universe, scene.traffic, scene.channel, scene.frames, mode);
            break;
        case AnalyticKind::restricted:
            value = union_bound_static(scene.universe, scene.traffic, scene.channel, scene.frames, mode, cfg.restrict_n);
            break;
        case AnalyticKind::semianalytic: {
            const auto est = semianalytic_dynamic_bound(scene.universe, scene.traffic, scene.channel, scene.frames,
                                                        cfg.bound_samples, cfg.restrict_n, mode, cfg.seed);
            value = est.mean;
            se = est.stderr_;
            break;
        }
        }
        std::cout << number(db) << ',' << number(value) << ',' << number(se) << '\n';
    }
    return 0;
}

struct PepOptions {
    int users = 1;
    int length = 7;
    std::string spreading = "msequence";
    bool reference = false;
    bool blind = false;
    bool dynamic = false;
    std::string truth;
    std::string competitor;
    std::string mode = "ml";
    double alpha = 0.5;
    double mu = 0.8;
    std::vector<double> ebn0{0, 2, 4, 6, 8, 10, 12};
    std::vector<int> known;
};

int cmd_pep(const PepOptions& p) {
    const Universe u(p.users, p.blind ? 1 : 0, p.reference);
    const TrafficModel m{p.users, p.alpha, p.mu, u.symbols()};
    m.validate();
    const SignatureSet sig = make_signatures(parse_spreading(p.spreading), p.length, p.users + (p.reference ? 1 : 0),
                                             p.reference);
    auto truth = parse_states(p.truth, u);
    auto competitor = parse_states(p.competitor, u);
    std::vector<KnownBits> known;
    if (!p.blind && p.users > 0) {
        KnownBits bits(static_cast<std::size_t>(p.users), 1);
        if (!p.known.empty()) {
            if (p.known.size() != bits.size()) throw std::invalid_argument("--known needs one +-1 per interferer");
            for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = p.known[i] < 0 ? -1 : 1;
        }
        known.assign(truth.size(), bits);
    }
    const PepMode mode = parse_pep_mode(p.mode);
    std::cout << "EbN0_dB,value,stderr\n";
    for (double db : p.ebn0) {
        const auto ctx = make_pair_context(u, make_channel(sig, db), truth, competitor, known, p.dynamic);
        std::cout << number(db) << ',' << number(pep(ctx, m, mode)) << ",0\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Random-set multiuser detection: simulation and analysis"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (default: RSMUD_THREADS or all cores)");

    auto* sim = app.add_subcommand("simulate", "run a Monte Carlo experiment and write CSV");
    ConfigOptions sim_opts;
    sim_opts.attach(sim);
    std::string out_path;
    bool quiet = false;
    sim->add_option("--out", out_path, "CSV output path (JSON sidecar written next to it)");
    sim->add_flag("--quiet", quiet, "no progress on stderr");

    auto* bound = app.add_subcommand("bound", "analytic error-probability curves over the Eb/N0 sweep (first alpha and frame length of the config)");
    ConfigOptions bound_opts;
    bound_opts.attach(bound);
    std::string bound_kind = "union_bound";
    std::optional<int> bound_n;
    bound->add_option("--kind", bound_kind, "union_bound | restricted | semianalytic");
    bound->add_option("--restrict-n", bound_n, "distance cap for restricted and semianalytic curves");

    auto* pep_cmd = app.add_subcommand("pep", "closed-form pairwise error probability over an Eb/N0 sweep");
    PepOptions pep_opts;
    pep_cmd->add_option("--users", pep_opts.users, "interferers K");
    pep_cmd->add_option("--length", pep_opts.length, "signature length");
    pep_cmd->add_option("--spreading", pep_opts.spreading, "msequence | kasami");
    pep_cmd->add_flag("--reference", pep_opts.reference, "include the always-active reference user");
    pep_cmd->add_flag("--blind", pep_opts.blind, "hypotheses carry one data bit per active user");
    pep_cmd->add_flag("--dynamic", pep_opts.dynamic, "Markov prior instead of the static one");
    pep_cmd->add_option("--truth", pep_opts.truth, "slot states mask[:data[:ref]], comma separated")->required();
    pep_cmd->add_option("--competitor", pep_opts.competitor, "slot states of the competitor")->required();
    pep_cmd->add_option("--mode", pep_opts.mode, "ml | map_identities | map_with_data");
    pep_cmd->add_option("--alpha", pep_opts.alpha, "activity factor");
    pep_cmd->add_option("--mu", pep_opts.mu, "persistence probability");
    pep_cmd->add_option("--ebn0", pep_opts.ebn0, "Eb/N0 points in dB")->delimiter(',');
    pep_cmd->add_option("--known", pep_opts.known, "training bits, one +-1 per interferer")->delimiter(',');

    auto* tmin = app.add_subcommand("tmin", "open-eye frame length over the Eb/N0 sweep");
    ConfigOptions tmin_opts;
    tmin_opts.attach(tmin);
    std::string tmin_mode = "map_identities";
    int tmin_cap = 1000;
    tmin->add_option("--mode", tmin_mode, "ml | map_identities | map_with_data");
    tmin->add_option("--cap", tmin_cap, "largest frame length tried");

    auto* sig = app.add_subcommand("signatures", "print a signature set, one row of chips per user");
    std::string sig_family = "msequence";
    int sig_length = 7;
    int sig_count = 3;
    bool sig_reference = false;
    std::vector<int> sig_order;
    sig->add_option("--spreading", sig_family, "msequence | kasami");
    sig->add_option("--length", sig_length, "chips per signature (2^n - 1)");
    sig->add_option("--count", sig_count, "number of channel users");
    sig->add_flag("--reference", sig_reference, "first row is the reference user");
    sig->add_option("--order", sig_order, "family member per channel user")->delimiter(',');

    CLI11_PARSE(app, argc, argv);
    try {
        if (threads > 0) set_thread_count(threads);
        if (*sim) return cmd_simulate(sim_opts, out_path, quiet);
        if (*bound) return cmd_bound(bound_opts, bound_kind, bound_n);
        if (*pep_cmd) return cmd_pep(pep_opts);
        if (*tmin) {
            const ExperimentConfig cfg = tmin_opts.resolve();
            const PepMode mode = parse_pep_mode(tmin_mode);
            std::cout << "EbN0_dB,T_min\n";
            for (double db : cfg.ebn0_db) {
                const Scene scene = make_scene(cfg, cfg.alpha.front(), 1, db);
                const auto t = t_min_open_eye(scene.universe, scene.traffic, scene.channel, mode, tmin_cap);
                std::cout << number(db) << ',' << (t ? std::to_string(*t) : std::string("inf")) << '\n';
            }
            return 0;
        }
        if (*sig) {
            write_signatures(std::cout, make_signatures(parse_spreading(sig_family), sig_length, sig_count,
                                                        sig_reference, sig_order));
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "rsmud: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
