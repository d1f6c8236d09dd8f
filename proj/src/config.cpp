#include "rsmud/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace rsmud {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double parse_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size() || !std::isfinite(x)) throw std::invalid_argument(key + ": '" + v + "' is not a number");
    return x;
}

long long parse_int(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    long long x = 0;
    try {
        x = std::stoll(v, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != v.size()) throw std::invalid_argument(key + ": '" + v + "' is not an integer");
    return x;
}

std::uint64_t parse_count(const std::string& key, const std::string& v) {
    const long long x = parse_int(key, v);
    if (x < 0) throw std::invalid_argument(key + ": must be non-negative");
    return static_cast<std::uint64_t>(x);
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument(key + ": '" + v + "' is not a boolean");
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
    std::vector<double> out;
    for (const auto& item : split_list(value)) {
        const auto c1 = item.find(':');
        if (c1 == std::string::npos) {
            out.push_back(parse_double(key, item));
            continue;
        }
        const auto c2 = item.find(':', c1 + 1);
        if (c2 == std::string::npos) throw std::invalid_argument(key + ": range must be first:last:step");
        const double first = parse_double(key, trim(item.substr(0, c1)));
        const double last = parse_double(key, trim(item.substr(c1 + 1, c2 - c1 - 1)));
        const double step = parse_double(key, trim(item.substr(c2 + 1)));
        if (!(step > 0.0) || last < first) throw std::invalid_argument(key + ": empty or non-increasing range");
        const auto n = static_cast<long long>(std::floor((last - first) / step + 1e-9));
        for (long long k = 0; k <= n; ++k) out.push_back(first + static_cast<double>(k) * step);
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    for (const auto& item : split_list(value)) out.push_back(static_cast<int>(parse_int(key, item)));
    return out;
}

template <typename T, typename F>
std::vector<T> parse_enum_list(const std::string& value, F parse) {
    std::vector<T> out;
    for (const auto& item : split_list(value)) out.push_back(parse(item));
    return out;
}

template <typename T>
std::string join(const std::vector<T>& v) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) os << ", ";
        if constexpr (std::is_enum_v<T>)
            os << to_string(v[i]);
        else
            os << v[i];
    }
    return os.str();
}

std::string number(double x) {
    std::ostringstream os;
    os.precision(17);
    os << x;
    return os.str();
}

}  // namespace

Scenario parse_scenario(const std::string& s) {
    if (s == "static_trained") return Scenario::static_trained;
    if (s == "static_blind") return Scenario::static_blind;
    if (s == "dynamic_trained") return Scenario::dynamic_trained;
    if (s == "dynamic_blind") return Scenario::dynamic_blind;
    throw std::invalid_argument("unknown scenario '" + s +
                                "' (static_trained|static_blind|dynamic_trained|dynamic_blind)");
}

DetectorKind parse_detector(const std::string& s) {
    if (s == "classic_ml") return DetectorKind::classic_ml;
    if (s == "joint_ml") return DetectorKind::joint_ml;
    if (s == "map_static") return DetectorKind::map_static;
    if (s == "bayes_causal") return DetectorKind::bayes_causal;
    if (s == "viterbi") return DetectorKind::viterbi;
    if (s == "viterbi_window") return DetectorKind::viterbi_window;
    throw std::invalid_argument("unknown detector '" + s +
                                "' (classic_ml|joint_ml|map_static|bayes_causal|viterbi|viterbi_window)");
}

MetricKind parse_metric(const std::string& s) {
    std::string u = s;
    std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (u == "BER") return MetricKind::ber;
    if (u == "SEP") return MetricKind::sep;
    if (u == "SSEP") return MetricKind::ssep;
    if (u == "BSEP") return MetricKind::bsep;
    throw std::invalid_argument("unknown metric '" + s + "' (BER|SEP|SSEP|BSEP)");
}

AnalyticKind parse_analytic(const std::string& s) {
    if (s == "union_bound") return AnalyticKind::union_bound;
    if (s == "restricted") return AnalyticKind::restricted;
    if (s == "semianalytic") return AnalyticKind::semianalytic;
    throw std::invalid_argument("unknown analytic curve '" + s + "' (union_bound|restricted|semianalytic)");
}

std::string to_string(Scenario s) {
    switch (s) {
    case Scenario::static_trained: return "static_trained";
    case Scenario::static_blind: return "static_blind";
    case Scenario::dynamic_trained: return "dynamic_trained";
    case Scenario::dynamic_blind: return "dynamic_blind";
    }
    return {};
}

std::string to_string(DetectorKind d) {
    switch (d) {
    case DetectorKind::classic_ml: return "classic_ml";
    case DetectorKind::joint_ml: return "joint_ml";
    case DetectorKind::map_static: return "map_static";
    case DetectorKind::bayes_causal: return "bayes_causal";
    case DetectorKind::viterbi: return "viterbi";
    case DetectorKind::viterbi_window: return "viterbi_window";
    }
    return {};
}

std::string to_string(MetricKind m) {
    switch (m) {
    case MetricKind::ber: return "BER";
    case MetricKind::sep: return "SEP";
    case MetricKind::ssep: return "SSEP";
    case MetricKind::bsep: return "BSEP";
    }
    return {};
}

std::string to_string(AnalyticKind a) {
    switch (a) {
    case AnalyticKind::union_bound: return "union_bound";
    case AnalyticKind::restricted: return "restricted";
    case AnalyticKind::semianalytic: return "semianalytic";
    }
    return {};
}

void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "name") cfg.name = value;
    else if (key == "scenario") cfg.scenario = parse_scenario(value);
    else if (key == "users") cfg.users = static_cast<int>(parse_int(key, value));
    else if (key == "alpha") cfg.alpha = parse_double_list(key, value);
    else if (key == "mu") cfg.mu = parse_double(key, value);
    else if (key == "spreading") cfg.spreading = parse_spreading(value);
    else if (key == "length") cfg.length = static_cast<int>(parse_int(key, value));
    else if (key == "signature_order") cfg.signature_order = parse_int_list(key, value);
    else if (key == "ebn0_db") cfg.ebn0_db = parse_double_list(key, value);
    else if (key == "detectors") cfg.detectors = parse_enum_list<DetectorKind>(value, parse_detector);
    else if (key == "window_delta") cfg.window_delta = static_cast<int>(parse_int(key, value));
    else if (key == "frames") cfg.frames = parse_int_list(key, value);
    else if (key == "trials") cfg.trials = parse_count(key, value);
    else if (key == "seed") cfg.seed = parse_count(key, value);
    else if (key == "reference_user") cfg.reference_user = parse_bool(key, value);
    else if (key == "metrics") cfg.metrics = parse_enum_list<MetricKind>(value, parse_metric);
    else if (key == "report_slots") cfg.report_slots = parse_int_list(key, value);
    else if (key == "min_errors") cfg.min_errors = parse_count(key, value);
    else if (key == "batch") cfg.batch = parse_count(key, value);
    else if (key == "analytic") cfg.analytic = parse_enum_list<AnalyticKind>(value, parse_analytic);
    else if (key == "restrict_n") cfg.restrict_n = static_cast<int>(parse_int(key, value));
    else if (key == "bound_samples") cfg.bound_samples = parse_count(key, value);
    else if (key == "bound_mode") {
        if (value != "auto") (void)parse_pep_mode(value);
        cfg.bound_mode = value;
    } else {
        throw std::invalid_argument("unknown configuration key '" + key + "'");
    }
}

void apply_config_text(ExperimentConfig& cfg, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            apply_setting(cfg, key, value);
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open configuration file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    apply_config_text(cfg, ss.str());
}

std::vector<std::string> preset_names() { return {"fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7"}; }

ExperimentConfig preset(const std::string& name) {
    ExperimentConfig c;
    c.name = name;
    if (name == "fig1" || name == "fig2" || name == "fig3") {
        // Two interferers on Kasami-15 codes, reference user on the third.
        c.users = 2;
        c.spreading = SpreadingFamily::kasami;
        c.length = 15;
        c.signature_order = {2, 0, 1};
        c.reference_user = true;
        c.metrics = {MetricKind::ber};
        if (name == "fig1") {
            c.scenario = Scenario::static_blind;
            c.alpha = {0.1, 0.5, 0.9};
            c.detectors = {DetectorKind::classic_ml, DetectorKind::joint_ml};
        } else if (name == "fig2") {
            c.scenario = Scenario::static_blind;
            c.alpha = {0.1, 0.5, 0.9};
            c.detectors = {DetectorKind::joint_ml, DetectorKind::map_static};
        } else {
            c.scenario = Scenario::dynamic_blind;
            c.alpha = {0.2};
            c.mu = 0.8;
            c.frames = {10};
            c.detectors = {DetectorKind::classic_ml, DetectorKind::map_static, DetectorKind::bayes_causal,
                           DetectorKind::viterbi};
        }
        return c;
    }
    c.spreading = SpreadingFamily::msequence;
    c.length = 7;
    c.reference_user = false;
    if (name == "fig4") {
        c.scenario = Scenario::static_trained;
        c.users = 6;
        c.alpha = {0.5};
        c.frames = {1, 2, 3};
        c.detectors = {DetectorKind::joint_ml};
        c.metrics = {MetricKind::sep};
        c.analytic = {AnalyticKind::union_bound, AnalyticKind::restricted};
        c.restrict_n = 1;
        return c;
    }
    if (name == "fig5") {
        c.scenario = Scenario::dynamic_trained;
        c.users = 3;
        c.alpha = {0.2};
        c.mu = 0.8;
        c.frames = {10};
        c.detectors = {DetectorKind::viterbi, DetectorKind::bayes_causal};
        c.metrics = {MetricKind::sep};
        c.report_slots = {1, 10};
        return c;
    }
    if (name == "fig6") {
        c.scenario = Scenario::dynamic_trained;
        c.users = 6;
        c.alpha = {0.2};
        c.mu = 0.8;
        c.frames = {3};
        c.detectors = {DetectorKind::viterbi};
        c.metrics = {MetricKind::ssep};
        c.analytic = {AnalyticKind::semianalytic};
        c.restrict_n = 2;
        c.bound_samples = 1000;
        return c;
    }
    if (name == "fig7") {
        c.scenario = Scenario::dynamic_blind;
        c.users = 3;
        c.alpha = {0.2};
        c.mu = 0.8;
        c.frames = {10};
        c.reference_user = true;
        c.detectors = {DetectorKind::viterbi, DetectorKind::bayes_causal};
        c.metrics = {MetricKind::bsep};
        c.report_slots = {1, 10};
        return c;
    }
    throw std::invalid_argument("unknown preset '" + name + "' (fig1..fig7)");
}

std::vector<int> report_slots(const ExperimentConfig& cfg, int frames) {
    std::vector<int> out;
    if (cfg.report_slots.empty()) {
        out.push_back(1);
        if (frames > 1) out.push_back(frames);
    } else {
        for (int s : cfg.report_slots)
            if (s <= frames) out.push_back(s);
    }
    return out;
}

PepMode bound_mode(const ExperimentConfig& cfg) {
    if (cfg.bound_mode != "auto") return parse_pep_mode(cfg.bound_mode);
    const bool map = std::any_of(cfg.detectors.begin(), cfg.detectors.end(), [](DetectorKind d) {
        return d == DetectorKind::map_static || d == DetectorKind::bayes_causal || d == DetectorKind::viterbi ||
               d == DetectorKind::viterbi_window;
    });
    if (!map) return PepMode::ml;
    return is_blind(cfg.scenario) ? PepMode::map_with_data : PepMode::map_identities;
}

void validate(const ExperimentConfig& cfg) {
    const auto fail = [](const std::string& msg) { throw std::invalid_argument(msg); };
    if (cfg.users < 0 || cfg.users > kMaxUsers) fail("users must lie in [0, 16]");
    if (cfg.alpha.empty()) fail("alpha: at least one value required");
    for (double a : cfg.alpha)
        if (!(a >= 0.0 && a <= 1.0)) fail("alpha must lie in [0, 1]");
    if (!(cfg.mu >= 0.0 && cfg.mu <= 1.0)) fail("mu must lie in [0, 1]");
    if (cfg.ebn0_db.empty()) fail("ebn0_db: sweep must not be empty");
    if (cfg.frames.empty()) fail("frames: at least one value required");
    for (int t : cfg.frames)
        if (t < 1) fail("frames must be >= 1");
    if (cfg.trials < 1) fail("trials must be >= 1");
    if (cfg.batch < 1) fail("batch must be >= 1");
    if (cfg.window_delta < 0) fail("window_delta must be >= 0");
    if (cfg.detectors.empty() && cfg.analytic.empty()) fail("nothing to compute: no detectors and no analytic curves");
    if (cfg.metrics.empty() && !cfg.detectors.empty()) fail("metrics: at least one metric required");
    if (cfg.users + (cfg.reference_user ? 1 : 0) < 1) fail("the channel needs at least one user");
    if (cfg.users + (cfg.reference_user ? 1 : 0) > cfg.length) fail("more users than chips per signature");

    const bool dynamic = is_dynamic(cfg.scenario);
    for (DetectorKind d : cfg.detectors) {
        const bool sequential =
            d == DetectorKind::bayes_causal || d == DetectorKind::viterbi || d == DetectorKind::viterbi_window;
        if (sequential && !dynamic)
            fail(to_string(d) + " needs a dynamic scenario; use map_static for a static channel");
        if (d == DetectorKind::classic_ml && !is_blind(cfg.scenario))
            fail("classic_ml detects data and needs a blind scenario");
    }
    for (MetricKind m : cfg.metrics)
        if (m == MetricKind::ber && !cfg.reference_user) fail("BER is measured on the reference user");
    for (int s : cfg.report_slots)
        if (s < 1) fail("report_slots are 1-based");
    for (AnalyticKind a : cfg.analytic) {
        if ((a == AnalyticKind::union_bound || a == AnalyticKind::restricted) && dynamic)
            fail(to_string(a) + " is a static bound; use semianalytic for dynamic scenarios");
        if (a == AnalyticKind::semianalytic && !dynamic) fail("semianalytic needs a dynamic scenario");
        if (a == AnalyticKind::semianalytic && cfg.bound_samples < 1) fail("bound_samples must be >= 1");
        if ((a == AnalyticKind::union_bound || a == AnalyticKind::restricted) && cfg.users > 10)
            fail("static union bounds enumerate pairs and need users <= 10");
    }
    if (cfg.restrict_n < 0) fail("restrict_n must be >= 0");
    if (cfg.bound_mode != "auto") (void)parse_pep_mode(cfg.bound_mode);

    // Signature family checks (size, length) live with the generator.
    (void)make_signatures(cfg.spreading, cfg.length, cfg.users + (cfg.reference_user ? 1 : 0), cfg.reference_user,
                          cfg.signature_order);
    const Universe u(cfg.users, cfg.symbols(), cfg.reference_user);
    (void)u;
}

std::string to_config_text(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << "name = " << cfg.name << '\n'
       << "scenario = " << to_string(cfg.scenario) << '\n'
       << "users = " << cfg.users << '\n'
       << "alpha = " << join(cfg.alpha) << '\n'
       << "mu = " << number(cfg.mu) << '\n'
       << "spreading = " << to_string(cfg.spreading) << '\n'
       << "length = " << cfg.length << '\n'
       << "signature_order = " << join(cfg.signature_order) << '\n'
       << "ebn0_db = " << join(cfg.ebn0_db) << '\n'
       << "detectors = " << join(cfg.detectors) << '\n'
       << "window_delta = " << cfg.window_delta << '\n'
       << "frames = " << join(cfg.frames) << '\n'
       << "trials = " << cfg.trials << '\n'
       << "seed = " << cfg.seed << '\n'
       << "reference_user = " << (cfg.reference_user ? "true" : "false") << '\n'
       << "metrics = " << join(cfg.metrics) << '\n'
       << "report_slots = " << join(cfg.report_slots) << '\n'
       << "min_errors = " << cfg.min_errors << '\n'
       << "batch = " << cfg.batch << '\n'
       << "analytic = " << join(cfg.analytic) << '\n'
       << "restrict_n = " << cfg.restrict_n << '\n'
       << "bound_samples = " << cfg.bound_samples << '\n'
       << "bound_mode = " << cfg.bound_mode << '\n';
    return os.str();
}

std::string to_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    const auto names = [](const auto& v) {
        std::vector<std::string> out;
        for (auto x : v) out.push_back(to_string(x));
        return out;
    };
    j["name"] = cfg.name;
    j["scenario"] = to_string(cfg.scenario);
    j["users"] = cfg.users;
    j["symbols_per_slot"] = cfg.symbols();
    j["alpha"] = cfg.alpha;
    j["mu"] = cfg.mu;
    j["spreading"] = to_string(cfg.spreading);
    j["length"] = cfg.length;
    j["signature_order"] = cfg.signature_order;
    j["ebn0_db"] = cfg.ebn0_db;
    j["detectors"] = names(cfg.detectors);
    j["window_delta"] = cfg.window_delta;
    j["frames"] = cfg.frames;
    j["trials"] = cfg.trials;
    j["seed"] = cfg.seed;
    j["reference_user"] = cfg.reference_user;
    j["metrics"] = names(cfg.metrics);
    j["report_slots"] = cfg.report_slots;
    j["min_errors"] = cfg.min_errors;
    j["batch"] = cfg.batch;
    j["analytic"] = names(cfg.analytic);
    j["restrict_n"] = cfg.restrict_n;
    j["bound_samples"] = cfg.bound_samples;
    j["bound_mode"] = cfg.bound_mode;
    return j.dump(2);
}

}  // namespace rsmud
