#include "vigil/features.hpp"

#include <algorithm>
#include <cmath>

namespace vigil::features {

using telemetry::q9;
using telemetry::SampleQuality;
using telemetry::Trace;

std::array<double, kFeatureCount> FeatureVector::to_array() const {
    return {first_saccade_latency, hit_rate,        pupil_amp,       pupil_latency,
            blink_rate,            blink_duration,  gaze_dispersion, dwell_fraction,
            latency_variability,   anticipation_slope};
}

FeatureVector FeatureVector::from_array(const std::array<double, kFeatureCount>& a) {
    FeatureVector fv;
    fv.first_saccade_latency = a[0];
    fv.hit_rate = a[1];
    fv.pupil_amp = a[2];
    fv.pupil_latency = a[3];
    fv.blink_rate = a[4];
    fv.blink_duration = a[5];
    fv.gaze_dispersion = a[6];
    fv.dwell_fraction = a[7];
    fv.latency_variability = a[8];
    fv.anticipation_slope = a[9];
    return fv;
}

const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names = {
        "first_saccade_latency", "hit_rate",        "pupil_amp",       "pupil_latency",
        "blink_rate",            "blink_duration",  "gaze_dispersion", "dwell_fraction",
        "latency_variability",   "anticipation_slope"};
    return names;
}

namespace {

constexpr double kVelocityThreshold = 30.0; // deg/s
constexpr double kMergeGapS = 0.020;
constexpr double kMatchMinS = 0.080;
constexpr double kMatchMaxS = 0.800;
constexpr double kHitCeilingMs = 800.0;
constexpr double kHitWindowMs = 500.0;
constexpr double kDwellRadiusDeg = 5.0;

// Type-7 quantile (linear interpolation between order statistics) over a
// sorted ascending vector.
double quantile_sorted(const std::vector<double>& sorted, double p) {
    const size_t n = sorted.size();
    if (n == 1) return sorted[0];
    const double h = p * static_cast<double>(n - 1);
    const size_t lo = static_cast<size_t>(h);
    if (lo + 1 >= n) return sorted[n - 1];
    return sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
}

} // namespace

std::vector<Saccade> detect_saccades(const Trace& trace) {
    const auto& smp = trace.samples;
    const size_t n = smp.size();
    std::vector<Saccade> out;
    if (n < 2) return out;

    // 3-sample moving average of gaze; samples with an unusable neighbor
    // keep their raw position.
    std::vector<double> sx(n), sy(n);
    for (size_t i = 0; i < n; ++i) {
        if (i > 0 && i + 1 < n && smp[i - 1].usable() && smp[i].usable() && smp[i + 1].usable()) {
            sx[i] = (smp[i - 1].gaze_x + smp[i].gaze_x + smp[i + 1].gaze_x) / 3.0;
            sy[i] = (smp[i - 1].gaze_y + smp[i].gaze_y + smp[i + 1].gaze_y) / 3.0;
        } else {
            sx[i] = smp[i].gaze_x;
            sy[i] = smp[i].gaze_y;
        }
    }

    const double max_dt = 2.0 / trace.rate + 1e-9;
    std::vector<double> vel(n, 0.0);
    for (size_t i = 1; i < n; ++i) {
        if (!smp[i - 1].usable() || !smp[i].usable()) continue;
        const double dt = smp[i].t - smp[i - 1].t;
        if (dt <= 0.0 || dt > max_dt) continue;
        vel[i] = std::hypot(sx[i] - sx[i - 1], sy[i] - sy[i - 1]) / dt;
    }

    // Runs of >= 2 consecutive over-threshold samples are movements;
    // movements closer than the merge gap (previous run end to next run
    // onset) are one movement.
    double prev_end = -1.0;
    size_t i = 1;
    while (i < n) {
        if (vel[i] <= kVelocityThreshold) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j + 1 < n && vel[j + 1] > kVelocityThreshold) ++j;
        if (j > i) {
            double peak = 0.0;
            for (size_t m = i; m <= j; ++m) peak = std::max(peak, vel[m]);
            if (!out.empty() && smp[i].t - prev_end < kMergeGapS) {
                Saccade& prev = out.back();
                prev.peak_velocity = std::max(prev.peak_velocity, peak);
                prev.land_x = sx[j];
                prev.land_y = sy[j];
            } else {
                out.push_back({smp[i].t, peak, sx[j], sy[j]});
            }
            prev_end = smp[j].t;
        }
        i = j + 1;
    }
    return out;
}

FeatureVector extract_features(const Trace& trace, const probe::ProbeTrain& train) {
    probe::validate_train(train);
    if (trace.samples.empty()) throw InsufficientData("empty trace");

    Trace t2 = trace;
    std::stable_sort(t2.samples.begin(), t2.samples.end(),
                     [](const auto& a, const auto& b) { return a.t < b.t; });

    size_t usable_raw = 0;
    for (const auto& s : t2.samples)
        if (s.usable()) ++usable_raw;
    if (usable_raw * 2 < t2.samples.size())
        throw InsufficientData("fewer than half the samples are usable");

    t2 = telemetry::clean_trace(t2);
    const auto& smp = t2.samples;
    const double t_first = smp.front().t;
    const double t_last = smp.back().t;
    const double dt_nom = 1.0 / t2.rate;

    // Events the trace can answer: the whole response window fits.
    std::vector<size_t> covered;
    for (size_t k = 0; k < train.events.size(); ++k) {
        const double et = train.events[k].t;
        if (et >= t_first && et + kMatchMaxS <= t_last) covered.push_back(k);
    }
    if (covered.size() < 5) throw InsufficientData("fewer than 5 LED changes covered by the trace");

    const auto saccades = detect_saccades(t2);

    // Greedy matching: each covered event takes the first unconsumed
    // saccade with onset in (80, 800] ms after it.
    std::vector<bool> consumed(saccades.size(), false);
    std::vector<bool> matched(covered.size(), false);
    std::vector<double> latency_ms(covered.size(), 0.0);
    for (size_t c = 0; c < covered.size(); ++c) {
        const double et = train.events[covered[c]].t;
        for (size_t s = 0; s < saccades.size(); ++s) {
            if (consumed[s]) continue;
            const double lat = saccades[s].onset_t - et;
            if (lat > kMatchMaxS) break; // onsets ascend; nothing later fits
            if (lat > kMatchMinS) {
                consumed[s] = true;
                matched[c] = true;
                latency_ms[c] = lat * 1000.0;
                break;
            }
        }
    }

    FeatureVector fv;

    // f1, f2: latency with miss imputation; hits within 500 ms.
    double lat_sum = 0.0;
    size_t hits = 0;
    for (size_t c = 0; c < covered.size(); ++c) {
        lat_sum += matched[c] ? latency_ms[c] : kHitCeilingMs;
        if (matched[c] && latency_ms[c] <= kHitWindowMs) ++hits;
    }
    fv.first_saccade_latency = lat_sum / static_cast<double>(covered.size());
    fv.hit_rate = static_cast<double>(hits) / static_cast<double>(covered.size());

    // f3, f4: deviant-evoked pupil response against its local baseline.
    double amp_sum = 0.0, tpk_sum = 0.0;
    size_t n_dev = 0;
    for (size_t k = 0; k < train.events.size(); ++k) {
        if (train.events[k].kind != probe::LedEventKind::Deviant) continue;
        const double et = train.events[k].t;
        if (et - 0.2 < t_first || et + 2.0 > t_last) continue;
        double base_sum = 0.0;
        size_t base_n = 0;
        double peak = 0.0, peak_t = 0.0;
        bool have_peak = false;
        for (const auto& s : smp) {
            if (!s.usable()) continue;
            if (s.t >= et - 0.2 && s.t < et) {
                base_sum += s.pupil;
                ++base_n;
            } else if (s.t > et && s.t <= et + 2.0) {
                if (!have_peak || s.pupil > peak) {
                    peak = s.pupil;
                    peak_t = s.t;
                    have_peak = true;
                }
            } else if (s.t > et + 2.0) {
                break;
            }
        }
        if (base_n == 0 || !have_peak) continue;
        amp_sum += peak - base_sum / static_cast<double>(base_n);
        tpk_sum += (peak_t - et) * 1000.0;
        ++n_dev;
    }
    fv.pupil_amp = n_dev ? amp_sum / static_cast<double>(n_dev) : 0.0;
    fv.pupil_latency = n_dev ? tpk_sum / static_cast<double>(n_dev) : 0.0;

    // f5, f6: eyelid-closure runs; the lid channel survives cleaning.
    size_t n_blinks = 0;
    double dur_sum = 0.0;
    {
        size_t i = 0;
        const size_t n = smp.size();
        while (i < n) {
            if (smp[i].eyelid >= 0.5) {
                ++i;
                continue;
            }
            size_t j = i;
            while (j + 1 < n && smp[j + 1].eyelid < 0.5) ++j;
            ++n_blinks;
            dur_sum += smp[j].t - smp[i].t + dt_nom;
            i = j + 1;
        }
    }
    const double window_s = t_last - t_first + dt_nom;
    fv.blink_rate = static_cast<double>(n_blinks) / (window_s / 60.0);
    fv.blink_duration = n_blinks ? dur_sum * 1000.0 / static_cast<double>(n_blinks) : 0.0;

    // f7: RMS dispersion about the mean gaze.
    double mx = 0.0, my = 0.0;
    size_t n_ok = 0;
    for (const auto& s : smp)
        if (s.usable()) {
            mx += s.gaze_x;
            my += s.gaze_y;
            ++n_ok;
        }
    mx /= static_cast<double>(n_ok);
    my /= static_cast<double>(n_ok);
    double sq = 0.0;
    for (const auto& s : smp)
        if (s.usable()) {
            const double dx = s.gaze_x - mx, dy = s.gaze_y - my;
            sq += dx * dx + dy * dy;
        }
    fv.gaze_dispersion = std::sqrt(sq / static_cast<double>(n_ok));

    // f8: fraction of usable time within 5 degrees of the lit LED.
    size_t dwell = 0;
    {
        size_t next_event = 0;
        int lit = 0;
        for (const auto& s : smp) {
            while (next_event < train.events.size() && train.events[next_event].t <= s.t)
                lit = train.events[next_event++].led_index;
            if (!s.usable()) continue;
            double lx, ly;
            probe::led_position(train, lit, lx, ly);
            if (std::hypot(s.gaze_x - lx, s.gaze_y - ly) <= kDwellRadiusDeg) ++dwell;
        }
    }
    fv.dwell_fraction = static_cast<double>(dwell) / static_cast<double>(n_ok);

    // f9: IQR of matched latencies.
    std::vector<double> lats;
    for (size_t c = 0; c < covered.size(); ++c)
        if (matched[c]) lats.push_back(latency_ms[c]);
    if (lats.size() >= 2) {
        std::sort(lats.begin(), lats.end());
        fv.latency_variability = quantile_sorted(lats, 0.75) - quantile_sorted(lats, 0.25);
    }

    // f10: OLS latency slope over responded Standard events.
    {
        double sk = 0.0, sl = 0.0;
        size_t m = 0;
        for (size_t c = 0; c < covered.size(); ++c) {
            if (!matched[c] || train.events[covered[c]].kind != probe::LedEventKind::Standard)
                continue;
            sk += static_cast<double>(covered[c]);
            sl += latency_ms[c];
            ++m;
        }
        if (m >= 2) {
            const double kbar = sk / static_cast<double>(m), lbar = sl / static_cast<double>(m);
            double num = 0.0, den = 0.0;
            for (size_t c = 0; c < covered.size(); ++c) {
                if (!matched[c] || train.events[covered[c]].kind != probe::LedEventKind::Standard)
                    continue;
                const double dk = static_cast<double>(covered[c]) - kbar;
                num += dk * (latency_ms[c] - lbar);
                den += dk * dk;
            }
            fv.anticipation_slope = den > 0.0 ? num / den : 0.0;
        }
    }

    auto arr = fv.to_array();
    for (auto& v : arr) v = q9(v);
    return FeatureVector::from_array(arr);
}

BaselineStats baseline_stats(const std::vector<FeatureVector>& vectors) {
    if (vectors.size() < 5)
        throw TooFewCheckups("baseline needs at least 5 checkup vectors, got " +
                             std::to_string(vectors.size()));
    BaselineStats st;
    st.n_checkups = static_cast<int>(vectors.size());
    const double n = static_cast<double>(vectors.size());
    for (const auto& v : vectors) {
        const auto a = v.to_array();
        for (size_t j = 0; j < kFeatureCount; ++j) st.mean[j] += a[j];
    }
    for (size_t j = 0; j < kFeatureCount; ++j) st.mean[j] /= n;
    for (const auto& v : vectors) {
        const auto a = v.to_array();
        for (size_t j = 0; j < kFeatureCount; ++j) {
            const double d = a[j] - st.mean[j];
            st.sd[j] += d * d;
        }
    }
    for (size_t j = 0; j < kFeatureCount; ++j) st.sd[j] = std::max(std::sqrt(st.sd[j] / n), 1e-6);
    return st;
}

FeatureVector normalize(const FeatureVector& fv, const BaselineStats& stats) {
    auto a = fv.to_array();
    for (size_t j = 0; j < kFeatureCount; ++j) a[j] = (a[j] - stats.mean[j]) / stats.sd[j];
    return FeatureVector::from_array(a);
}

FeatureVector denormalize(const FeatureVector& z, const BaselineStats& stats) {
    auto a = z.to_array();
    for (size_t j = 0; j < kFeatureCount; ++j) a[j] = a[j] * stats.sd[j] + stats.mean[j];
    return FeatureVector::from_array(a);
}

bool operator==(const FeatureVector& a, const FeatureVector& b) {
    return a.to_array() == b.to_array();
}

} // namespace vigil::features
