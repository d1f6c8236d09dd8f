#pragma once

// Monte Carlo experiment engine: draws traffic and data, synthesizes the
// matched-filter outputs, runs the configured detectors on common random
// numbers, and accumulates error counts per metric and sweep point.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rsmud/config.hpp"
#include "rsmud/detect.hpp"

namespace rsmud {

/// One output row. For BER `trials` counts reference bits, otherwise frames;
/// analytic rows carry trials = 0 (closed form) or the number of sampled
/// sequences.
struct MetricRecord {
    std::string metric;
    double point_db = 0.0;
    double estimate = 0.0;
    double stderr_ = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t errors = 0;
};

/// Binomial record: estimate = errors / trials, stderr = sqrt(p(1-p)/trials).
[[nodiscard]] MetricRecord binomial_record(std::string metric, double point_db, std::uint64_t errors,
                                           std::uint64_t trials);

/// Error indicator of one frame. BER returns the number of reference bit
/// errors over the frame; SEP and BSEP look at the 1-based `slot`; SSEP
/// compares identities (and, when `blind`, the data) over every slot.
/// Throws std::invalid_argument on length mismatch or a slot out of range.
[[nodiscard]] std::uint64_t compute_metric(std::span<const SlotState> truth, std::span<const SlotState> estimate,
                                           MetricKind kind, std::size_t slot = 1, bool blind = true);

/// Everything fixed at one sweep point.
struct Scene {
    Scenario scenario;
    Universe universe;
    TrafficModel traffic;
    ChannelModel channel;
    SetDensity static_state_prior;  // per-slot prior on the emission universe
    SetDensity prior0;              // X_0 law for the sequential detectors
    int frames = 1;
    int window_delta = 0;
};

[[nodiscard]] Scene make_scene(const ExperimentConfig& cfg, double alpha, int frames, double ebn0_db);

/// Static prior over identities, data and reference bit of `u`.
[[nodiscard]] SetDensity state_prior(const Universe& u, double alpha);

struct Frame {
    std::vector<SlotState> truth;
    std::vector<KnownBits> known;  // training bits, empty when blind
    std::vector<Observation> y;
};

/// Draws the traffic, data and observations of one frame.
[[nodiscard]] Frame draw_frame(const Scene& scene, Rng& rng);

/// Runs one detector on a frame and returns its state estimates.
[[nodiscard]] std::vector<SlotState> run_detector(const Scene& scene, DetectorKind d, const EmissionTable& em,
                                                  std::span<const Observation> y);

/// Simulates and evaluates every sweep point. `on_record` sees each row as
/// soon as it is final. Deterministic in the config for any thread count.
[[nodiscard]] std::vector<MetricRecord> run_experiment(
    const ExperimentConfig& cfg, const std::function<void(const MetricRecord&)>& on_record = {});

/// CSV with header metric,point_db,estimate,stderr,trials.
void write_csv(std::ostream& out, std::span<const MetricRecord> records);

/// JSON sidecar: resolved config plus every record.
[[nodiscard]] std::string results_json(const ExperimentConfig& cfg, std::span<const MetricRecord> records);

}  // namespace rsmud
