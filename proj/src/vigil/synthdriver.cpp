#include "vigil/synthdriver.hpp"

#include <algorithm>
#include <cmath>

#include "vigil/rng.hpp"

namespace vigil::synthdriver {

using telemetry::q9;

namespace {

double clamp(double v, double lo, double hi) { return v < lo ? lo : (v > hi ? hi : v); }

void require(bool ok, const char* what) {
    if (!ok) throw InvariantViolation(what);
}

} // namespace

void validate_profile(const DriverProfile& p) {
    require(p.latency_mu >= 100.0 && p.latency_mu <= 600.0, "profile latency_mu out of [100,600] ms");
    require(p.latency_sd > 0.0 && p.latency_sd <= 200.0, "profile latency_sd out of (0,200] ms");
    require(p.hit_rate >= 0.5 && p.hit_rate <= 1.0, "profile hit_rate out of [0.5,1]");
    require(p.pupil_amp >= 0.05 && p.pupil_amp <= 1.0, "profile pupil_amp out of [0.05,1] mm");
    require(p.pupil_lat >= 100.0 && p.pupil_lat <= 1200.0, "profile pupil_lat out of [100,1200] ms");
    require(p.blink_rate >= 0.0 && p.blink_rate <= 60.0, "profile blink_rate out of [0,60]/min");
    require(p.blink_dur > 0.0 && p.blink_dur <= 1000.0, "profile blink_dur out of (0,1000] ms");
    require(p.anticipation <= 0.0 && p.anticipation >= -20.0, "profile anticipation out of [-20,0] ms/event");
    require(p.gaze_noise > 0.0 && p.gaze_noise <= 1.0, "profile gaze_noise out of (0,1] deg");
}

void validate_impairment(const ImpairmentSpec& s) {
    require(s.severity >= 0.0 && s.severity <= 1.0, "impairment severity out of [0,1]");
    if (s.condition == telemetry::Condition::Sober)
        require(s.severity == 0.0, "Sober impairment must have severity 0");
}

DriverProfile sample_profile(uint64_t seed) {
    Rng rng = Rng::derive(seed, {Rng::label("profile")});
    DriverProfile p;
    p.latency_mu = q9(rng.uniform(100.0, 600.0));
    p.latency_sd = q9(rng.uniform(20.0, 60.0));
    p.hit_rate = q9(rng.uniform(0.5, 1.0));
    p.pupil_amp = q9(rng.uniform(0.05, 1.0));
    p.pupil_lat = q9(rng.uniform(300.0, 700.0));
    p.blink_rate = q9(rng.uniform(5.0, 20.0));
    p.blink_dur = q9(rng.uniform(100.0, 300.0));
    p.anticipation = q9(rng.uniform(-8.0, 0.0));
    p.gaze_noise = q9(rng.uniform(0.05, 0.25));
    validate_profile(p);
    return p;
}

double severity_for(telemetry::Condition condition, const Dose& dose) {
    using telemetry::Condition;
    switch (condition) {
        case Condition::Alcohol:
            if (dose.kind != Dose::Kind::BreathalyzerUg)
                throw UnknownDose("Alcohol severity needs a breathalyzer reading");
            if (!(dose.value >= 0.0) || !std::isfinite(dose.value))
                throw UnknownDose("breathalyzer reading must be a non-negative number");
            return q9(std::min(1.0, 0.7 * dose.value / 240.0));
        case Condition::Thc:
            if (dose.kind != Dose::Kind::ThcSmoked)
                throw UnknownDose("THC severity is defined for the smoked dose only");
            return 0.45;
        case Condition::Fatigue: {
            if (dose.kind != Dose::Kind::Kss)
                throw UnknownDose("Fatigue severity needs a KSS level");
            const int k = static_cast<int>(dose.value);
            if (k < 1 || k > 9 || dose.value != k)
                throw UnknownDose("KSS level must be an integer in 1..9");
            return (k - 1) / 8.0;
        }
        case Condition::TimeOnTask:
            if (dose.kind != Dose::Kind::TimeOnTaskHours)
                throw UnknownDose("TimeOnTask severity needs hours on task");
            if (!(dose.value >= 0.0) || !std::isfinite(dose.value))
                throw UnknownDose("hours on task must be a non-negative number");
            return q9(std::min(1.0, dose.value / 10.0) * 0.6);
        case Condition::Sober:
            throw UnknownDose("no dose maps onto Sober");
    }
    throw UnknownDose("unknown condition");
}

DriverProfile effective_profile(const DriverProfile& p, const ImpairmentSpec& s) {
    validate_profile(p);
    validate_impairment(s);
    const double lam = s.severity;
    const EffectDeltas& d = s.deltas;
    DriverProfile e = p;
    e.latency_mu = clamp(p.latency_mu + lam * d.latency_ms, 50.0, 900.0);
    e.hit_rate = clamp(p.hit_rate + lam * d.hit, 0.0, 1.0);
    e.pupil_amp = clamp(p.pupil_amp * (1.0 + lam * d.pupil_frac), 0.0, 2.0);
    e.blink_rate = clamp(p.blink_rate + lam * d.blink_per_min, 0.0, 60.0);
    e.anticipation = clamp(p.anticipation * (1.0 + lam * d.anticipation_frac), -20.0, 0.0);
    return e;
}

namespace {

// Piecewise-linear gaze schedule. Keyframes are kept sorted by t; the gaze
// holds the last keyframe's position past the end.
struct GazePath {
    struct Key {
        double t, x, y;
    };
    std::vector<Key> keys{{0.0, 0.0, 0.0}};

    void position(double t, double& x, double& y) const {
        size_t lo = 0, hi = keys.size();
        while (hi - lo > 1) { // last key with key.t <= t
            const size_t mid = (lo + hi) / 2;
            if (keys[mid].t <= t) lo = mid;
            else hi = mid;
        }
        const Key& a = keys[lo];
        if (lo + 1 == keys.size() || keys[lo + 1].t <= a.t) {
            x = a.x;
            y = a.y;
            return;
        }
        const Key& b = keys[lo + 1];
        const double w = (t - a.t) / (b.t - a.t);
        x = a.x + w * (b.x - a.x);
        y = a.y + w * (b.y - a.y);
    }

    // A saccade starting at t preempts anything scheduled after it.
    void truncate_from(double t) {
        while (keys.size() > 1 && keys.back().t >= t) keys.pop_back();
    }

    void push(double t, double x, double y) {
        if (t > keys.back().t) keys.push_back({t, x, y});
    }
};

} // namespace

telemetry::Trace simulate_trace(const DriverProfile& profile,
                                const ImpairmentSpec& impairment,
                                const probe::ProbeTrain& train,
                                uint64_t seed,
                                SimEvents* debug) {
    probe::validate_train(train);
    const DriverProfile eff = effective_profile(profile, impairment);

    Rng rng_beh = Rng::derive(seed, {Rng::label("sim.behavior")});
    Rng rng_blink = Rng::derive(seed, {Rng::label("sim.blink")});
    Rng rng_noise = Rng::derive(seed, {Rng::label("sim.noise")});

    constexpr double kSaccadeS = 0.050;
    constexpr double kDwellS = 0.400;
    constexpr double kRiseS = 0.500;
    constexpr double kDecayTauS = 1.5;
    constexpr double kPupilBaseMm = 3.5;
    constexpr double kPupilNoiseMm = 0.02;

    // Orienting behavior: one keyframe chain per responded event.
    GazePath path;
    struct Bump {
        double onset, amp;
    };
    std::vector<Bump> bumps;
    if (debug) debug->responses.clear();
    for (size_t k = 0; k < train.events.size(); ++k) {
        const auto& e = train.events[k];
        const bool respond = rng_beh.bernoulli(eff.hit_rate);
        double latency_ms = 0.0;
        if (respond)
            latency_ms = rng_beh.normal(eff.latency_mu + eff.anticipation * static_cast<double>(k),
                                        eff.latency_sd);
        if (debug) debug->responses.push_back({static_cast<int>(k), respond, latency_ms});
        if (e.kind == probe::LedEventKind::Deviant)
            bumps.push_back({e.t + eff.pupil_lat / 1000.0, eff.pupil_amp});
        if (!respond) continue;
        const double onset = e.t + std::max(30.0, latency_ms) / 1000.0;
        if (onset >= train.duration) continue;
        double x0, y0;
        path.position(onset, x0, y0);
        double lx, ly;
        probe::led_position(train, e.led_index, lx, ly);
        path.truncate_from(onset);
        path.push(onset, x0, y0);
        path.push(onset + kSaccadeS, lx, ly);
        path.push(onset + kSaccadeS + kDwellS, lx, ly);
        path.push(onset + 2.0 * kSaccadeS + kDwellS, 0.0, 0.0);
    }

    // Blink schedule: exponential gaps between starts; overlaps just merge.
    std::vector<std::pair<double, double>> blinks;
    if (eff.blink_rate > 0.0) {
        const double rate_s = eff.blink_rate / 60.0;
        double t = rng_blink.exponential(rate_s);
        while (t < train.duration) {
            blinks.emplace_back(t, t + eff.blink_dur / 1000.0);
            t += rng_blink.exponential(rate_s);
        }
    }

    telemetry::Trace trace;
    trace.rate = 60.0;
    trace.stream_id = telemetry::StreamId::Native;
    const int n = static_cast<int>(std::floor(train.duration * trace.rate - 1e-9)) + 1;
    trace.samples.reserve(static_cast<size_t>(n));
    size_t blink_at = 0;
    for (int i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / trace.rate;
        const double nx = rng_noise.normal(0.0, profile.gaze_noise);
        const double ny = rng_noise.normal(0.0, profile.gaze_noise);
        const double pn = rng_noise.normal(0.0, kPupilNoiseMm);

        double gx, gy;
        path.position(t, gx, gy);
        double pupil = kPupilBaseMm + pn;
        for (const auto& b : bumps) {
            const double tau = t - b.onset;
            if (tau < 0.0) break; // bumps are onset-sorted
            pupil += tau < kRiseS ? b.amp * (tau / kRiseS)
                                  : b.amp * std::exp(-(tau - kRiseS) / kDecayTauS);
        }

        while (blink_at < blinks.size() && blinks[blink_at].second <= t) ++blink_at;
        const bool blinking = blink_at < blinks.size() && blinks[blink_at].first <= t;

        telemetry::OcularSample s;
        s.t = q9(t);
        s.gaze_x = q9(gx + nx);
        s.gaze_y = q9(gy + ny);
        s.pupil = q9(pupil);
        s.eyelid = blinking ? 0.0 : 1.0;
        s.quality = blinking ? telemetry::SampleQuality::Invalid : telemetry::SampleQuality::Valid;
        trace.samples.push_back(s);
    }
    telemetry::validate_trace(trace);
    return trace;
}

telemetry::Trace recycle_trace(const telemetry::Trace& native,
                               const DriverProfile& profile,
                               uint64_t seed) {
    telemetry::validate_trace(native);
    Rng rng = Rng::derive(seed, {Rng::label("cloud")});
    // Total cloud noise sd is 1.2x the native sd; the stream re-noises the
    // already-noisy samples, so the extra component is sqrt(1.2^2 - 1).
    const double extra_sd = profile.gaze_noise * std::sqrt(1.2 * 1.2 - 1.0);

    telemetry::Trace out;
    out.rate = native.rate / 2.0;
    out.stream_id = telemetry::StreamId::Cloud;
    out.samples.reserve(native.samples.size() / 2 + 1);
    for (size_t i = 0; i < native.samples.size(); i += 2) {
        telemetry::OcularSample s = native.samples[i];
        const double nx = rng.normal(0.0, extra_sd);
        const double ny = rng.normal(0.0, extra_sd);
        s.gaze_x = q9(s.gaze_x + nx);
        s.gaze_y = q9(s.gaze_y + ny);
        out.samples.push_back(s);
    }
    telemetry::validate_trace(out);
    return out;
}

} // namespace vigil::synthdriver
