#pragma once

// Experiment configuration: a flat `key = value` text format, command-line
// overrides, and the built-in figure presets.
//
// Grammar: one `key = value` per line; `#` starts a comment; blank lines are
// ignored. List values are comma separated; a numeric list entry may also be
// a range `first:last:step`. Unknown keys are errors.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rsmud/analysis.hpp"
#include "rsmud/channel.hpp"

namespace rsmud {

enum class Scenario { static_trained, static_blind, dynamic_trained, dynamic_blind };
enum class DetectorKind { classic_ml, joint_ml, map_static, bayes_causal, viterbi, viterbi_window };
enum class MetricKind { ber, sep, ssep, bsep };
enum class AnalyticKind { union_bound, restricted, semianalytic };

[[nodiscard]] Scenario parse_scenario(const std::string& s);
[[nodiscard]] DetectorKind parse_detector(const std::string& s);
[[nodiscard]] MetricKind parse_metric(const std::string& s);
[[nodiscard]] AnalyticKind parse_analytic(const std::string& s);
[[nodiscard]] std::string to_string(Scenario s);
[[nodiscard]] std::string to_string(DetectorKind d);
[[nodiscard]] std::string to_string(MetricKind m);
[[nodiscard]] std::string to_string(AnalyticKind a);

[[nodiscard]] inline bool is_dynamic(Scenario s) {
    return s == Scenario::dynamic_trained || s == Scenario::dynamic_blind;
}
[[nodiscard]] inline bool is_blind(Scenario s) { return s == Scenario::static_blind || s == Scenario::dynamic_blind; }

struct ExperimentConfig {
    std::string name = "custom";
    Scenario scenario = Scenario::static_blind;
    int users = 2;
    std::vector<double> alpha{0.1};
    double mu = 0.8;
    SpreadingFamily spreading = SpreadingFamily::msequence;
    int length = 7;
    std::vector<int> signature_order;
    std::vector<double> ebn0_db{0, 2, 4, 6, 8, 10, 12};
    std::vector<DetectorKind> detectors{DetectorKind::joint_ml};
    int window_delta = 2;
    std::vector<int> frames{1};
    std::uint64_t trials = 100000;
    std::uint64_t seed = 1;
    bool reference_user = true;
    std::vector<MetricKind> metrics{MetricKind::ber};
    std::vector<int> report_slots;  // 1-based; empty means first and last slot
    std::uint64_t min_errors = 0;   // 0 disables early stopping
    std::uint64_t batch = 10000;
    std::vector<AnalyticKind> analytic;
    int restrict_n = 1;
    std::size_t bound_samples = 1000;
    std::string bound_mode = "auto";  // auto | ml | map_identities | map_with_data

    /// Data symbols per interferer per slot: 0 when trained, 1 when blind.
    [[nodiscard]] int symbols() const { return is_blind(scenario) ? 1 : 0; }
};

/// Sets one key. Throws std::invalid_argument on unknown keys or bad values.
void apply_setting(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Applies every `key = value` line of `text` on top of `cfg`.
void apply_config_text(ExperimentConfig& cfg, const std::string& text);

/// Reads and applies a configuration file.
void apply_config_file(ExperimentConfig& cfg, const std::string& path);

/// fig1 .. fig7.
[[nodiscard]] ExperimentConfig preset(const std::string& name);
[[nodiscard]] std::vector<std::string> preset_names();

/// Throws std::invalid_argument describing the first violated constraint.
void validate(const ExperimentConfig& cfg);

/// Resolved report slots (defaults applied) for frame length T.
[[nodiscard]] std::vector<int> report_slots(const ExperimentConfig& cfg, int frames);

/// Mode used by the analytic curves.
[[nodiscard]] PepMode bound_mode(const ExperimentConfig& cfg);

/// Every setting as `key = value` lines, parseable by apply_config_text.
[[nodiscard]] std::string to_config_text(const ExperimentConfig& cfg);

/// JSON object with every resolved setting.
[[nodiscard]] std::string to_json(const ExperimentConfig& cfg);

}  // namespace rsmud
