#pragma once

#include <cstdint>
#include <vector>

#include "vigil/errors.hpp"
#include "vigil/probe.hpp"
#include "vigil/telemetry.hpp"

namespace vigil::synthdriver {

// Ground-truth response parameters for one simulated driver. Latencies and
// durations are in milliseconds, rates in events per minute, gaze in
// degrees of visual angle. The monitoring pipeline never sees this struct;
// it only sees the traces generated from it.
struct DriverProfile {
    double latency_mu = 350.0;   // mean first-saccade latency to a probe change
    double latency_sd = 40.0;
    double hit_rate = 0.85;      // probability of orienting within 500 ms (sober)
    double pupil_amp = 0.4;      // deviant-evoked dilation amplitude, mm
    double pupil_lat = 450.0;    // dilation onset after the deviant, ms
    double blink_rate = 12.0;    // blinks/min
    double blink_dur = 180.0;    // ms
    double anticipation = -3.0;  // ms/event; latency slope over Standard events, <= 0
    double gaze_noise = 0.15;    // per-axis Gaussian sd, degrees
};

// Per-unit-severity shifts applied to a profile. Latency/hit/blink deltas
// are absolute; pupil and anticipation deltas are fractional (the value is
// scaled by 1 + severity*delta, so -1.0 flattens the trait to zero at
// severity 1).
struct EffectDeltas {
    double latency_ms = 120.0;
    double hit = -0.25;
    double pupil_frac = -0.5;
    double blink_per_min = 8.0;
    double anticipation_frac = -1.0;
};

struct ImpairmentSpec {
    telemetry::Condition condition = telemetry::Condition::Sober;
    double severity = 0.0; // lambda in [0, 1]
    EffectDeltas deltas;
};

// Dose descriptor for severity_for. Exactly one interpretation applies per
// condition; a mismatch raises UnknownDose.
struct Dose {
    enum class Kind { BreathalyzerUg, ThcSmoked, Kss, TimeOnTaskHours };
    Kind kind;
    double value = 0.0;

    static Dose breathalyzer_ug(double ug) { return {Kind::BreathalyzerUg, ug}; }
    static Dose thc_smoked() { return {Kind::ThcSmoked, 0.0}; }
    static Dose kss(int level) { return {Kind::Kss, static_cast<double>(level)}; }
    static Dose time_on_task_hours(double h) { return {Kind::TimeOnTaskHours, h}; }
};

void validate_profile(const DriverProfile& p);
void validate_impairment(const ImpairmentSpec& s);

// Population model: each field uniform over its documented range,
// deterministic per seed. Ranges (ms/mm/deg as in DriverProfile):
// latency_mu [100,600], latency_sd [20,60], hit_rate [0.5,1.0],
// pupil_amp [0.05,1.0], pupil_lat [300,700], blink_rate [5,20],
// blink_dur [100,300], anticipation [-8,0], gaze_noise [0.05,0.25].
DriverProfile sample_profile(uint64_t seed);

// Maps a condition plus dose descriptor onto severity lambda in [0, 1].
// Alcohol: breathalyzer reading, 240 ug -> 0.7, linear and capped at 1.
// THC: smoked -> 0.45. Fatigue: KSS level k in 1..9 -> (k-1)/8.
// TimeOnTask: h hours -> min(1, h/10) * 0.6. Monotone in dose.
double severity_for(telemetry::Condition condition, const Dose& dose);

// Profile with the impairment's deltas applied at its severity, clamped to
// physical ranges. severity 0 returns the profile unchanged.
DriverProfile effective_profile(const DriverProfile& p, const ImpairmentSpec& s);

// Per-event ground truth of one simulation, for Monte-Carlo oracles that
// need the drawn behavior without re-detecting it from the noisy trace.
struct SimEvents {
    struct Response {
        int event_index = 0;
        bool responded = false;
        double latency_ms = 0.0; // drawn value, only meaningful when responded
    };
    std::vector<Response> responses;
};

// Synthesizes the native 60 Hz ocular trace for one probe train:
// per LED change a saccade to the LED (50 ms ramp, ~400 ms dwell, return
// to road center) with probability hit_rate, at latency drawn from
// Normal(latency_mu + anticipation*event_index, latency_sd); per Deviant
// event a pupil bump (linear rise 500 ms, exp decay tau 1.5 s) of
// amplitude pupil_amp starting pupil_lat after the event; Poisson blinks
// (eyelid 0, samples Invalid); additive Gaussian gaze noise. Deterministic
// per seed.
telemetry::Trace simulate_trace(const DriverProfile& profile,
                                const ImpairmentSpec& impairment,
                                const probe::ProbeTrain& train,
                                uint64_t seed,
                                SimEvents* debug = nullptr);

// The cloud stream: the same response replayed through a second system.
// Every second sample of the native trace (30 Hz), with extra gaze noise
// bringing total noise sd to 1.2x the profile's. Deterministic per seed.
telemetry::Trace recycle_trace(const telemetry::Trace& native,
                               const DriverProfile& profile,
                               uint64_t seed);

} // namespace vigil::synthdriver
