#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "vigil/errors.hpp"
#include "vigil/probe.hpp"
#include "vigil/telemetry.hpp"

namespace vigil::features {

inline constexpr size_t kFeatureCount = 10;

// The fixed checkup representation the classifiers consume. All fields are
// finite; missing responses are imputed (latency ceiling 800 ms, zeros for
// absent pupil/blink/slope statistics) so no NaN leaves this module.
struct FeatureVector {
    double first_saccade_latency = 0.0; // f1, ms; misses imputed at 800
    double hit_rate = 0.0;              // f2, fraction answered within 500 ms
    double pupil_amp = 0.0;             // f3, mm mean deviant-evoked dilation
    double pupil_latency = 0.0;         // f4, ms mean time to dilation peak
    double blink_rate = 0.0;            // f5, per min
    double blink_duration = 0.0;        // f6, ms mean
    double gaze_dispersion = 0.0;       // f7, degrees RMS about mean gaze
    double dwell_fraction = 0.0;        // f8, fraction of time within 5 deg of lit LED
    double latency_variability = 0.0;   // f9, ms IQR of per-event latencies
    double anticipation_slope = 0.0;    // f10, ms/event OLS fit over Standard events

    std::array<double, kFeatureCount> to_array() const;
    static FeatureVector from_array(const std::array<double, kFeatureCount>& a);
};

// Stable column names, index-aligned with to_array().
const std::array<std::string, kFeatureCount>& feature_names();

struct BaselineStats {
    std::array<double, kFeatureCount> mean{};
    std::array<double, kFeatureCount> sd{}; // population sd, floored at 1e-6
    int n_checkups = 0;
};

struct Saccade {
    double onset_t = 0.0;       // seconds, first sample over threshold
    double peak_velocity = 0.0; // deg/s
    double land_x = 0.0;        // gaze at the end of the movement
    double land_y = 0.0;
};

// Velocity-threshold identification on a cleaned trace: angular speed of
// the 3-sample-smoothed gaze above 30 deg/s for at least 2 consecutive
// samples; events closer than 20 ms end-to-onset are merged.
std::vector<Saccade> detect_saccades(const telemetry::Trace& trace);

// Computes f1..f10 for one checkup window. Sorts samples by t, cleans the
// trace, then matches each LED change to the first unconsumed saccade with
// onset in (80, 800] ms after it. Raises InsufficientData when fewer than
// half the samples are usable or fewer than 5 LED changes are covered by
// the trace. Output fields are q9-quantized (they are file-bound).
FeatureVector extract_features(const telemetry::Trace& trace, const probe::ProbeTrain& train);

// Per-feature mean and population sd over >= 5 vectors, sd floored at
// 1e-6. Raises TooFewCheckups below the floor.
BaselineStats baseline_stats(const std::vector<FeatureVector>& vectors);

FeatureVector normalize(const FeatureVector& fv, const BaselineStats& stats);
FeatureVector denormalize(const FeatureVector& z, const BaselineStats& stats);

bool operator==(const FeatureVector& a, const FeatureVector& b);

} // namespace vigil::features
