#include "vigil/probe.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "vigil/rng.hpp"
#include "vigil/telemetry.hpp"

namespace vigil::probe {

using nlohmann::json;
using telemetry::q9;

void validate_config(const ProbeConfig& c) {
    if (c.n_leds < 2) throw ConfigError("probe n_leds must be >= 2");
    if (!(c.base_interval > 0.0)) throw ConfigError("probe base_interval must be positive");
    if (!(c.interval_jitter >= 0.0 && c.interval_jitter < 1.0))
        throw ConfigError("probe interval_jitter must be in [0, 1)");
    if (!(c.deviant_prob >= 0.0 && c.deviant_prob <= 0.3))
        throw ConfigError("probe deviant_prob must be in [0, 0.3]");
    if (!(c.eccentricity > 0.0)) throw ConfigError("probe eccentricity must be positive");
    if (!(c.duration > 0.0)) throw ConfigError("probe duration must be positive");
}

void validate_train(const ProbeTrain& t) {
    if (!(t.duration > 0.0)) throw InvariantViolation("train duration must be positive");
    if (t.n_leds < 2) throw InvariantViolation("train n_leds must be >= 2");
    int lit = t.n_leds - 1; // array dark before onset; the first Standard lights LED 0
    double prev_t = 0.0;
    for (size_t i = 0; i < t.events.size(); ++i) {
        const auto& e = t.events[i];
        if (!(e.t > prev_t)) throw InvariantViolation("event times must be strictly increasing");
        if (e.t >= t.duration) throw InvariantViolation("event past train end");
        if (e.led_index < 0 || e.led_index >= t.n_leds)
            throw InvariantViolation("event led_index out of range");
        const int step = ((e.led_index - lit) % t.n_leds + t.n_leds) % t.n_leds;
        if (e.kind == LedEventKind::Standard) {
            if (step != 1) throw InvariantViolation("standard event must advance the lit LED by 1");
        } else {
            if (i < 2) throw InvariantViolation("deviant before the progression is established");
            if (step < 2 || step > t.n_leds - 1)
                throw InvariantViolation("deviant step must be in [2, n_leds-1]");
        }
        lit = e.led_index;
        prev_t = e.t;
    }
}

ProbeTrain generate_probe_train(const ProbeConfig& config, uint64_t seed) {
    validate_config(config);
    ProbeTrain train;
    train.duration = config.duration;
    train.eccentricity = config.eccentricity;
    train.n_leds = config.n_leds;
    train.seed = seed;

    Rng rng = Rng::derive(seed, {Rng::label("probe.train")});
    const bool can_deviate = config.n_leds >= 3;
    int lit = config.n_leds - 1; // first Standard lights LED 0
    double t = 0.0;
    size_t count = 0;
    for (;;) {
        const double u = rng.uniform(-1.0, 1.0);
        t += config.base_interval * (1.0 + u * config.interval_jitter);
        if (t >= config.duration) break;
        LedEvent e;
        e.t = q9(t);
        bool deviant = false;
        if (can_deviate && count >= 2) deviant = rng.bernoulli(config.deviant_prob);
        if (deviant) {
            const int step = 2 + static_cast<int>(rng.uniform_int(static_cast<uint64_t>(config.n_leds - 2)));
            e.led_index = (lit + step) % config.n_leds;
            e.kind = LedEventKind::Deviant;
        } else {
            e.led_index = (lit + 1) % config.n_leds;
            e.kind = LedEventKind::Standard;
        }
        lit = e.led_index;
        train.events.push_back(e);
        ++count;
    }
    validate_train(train);
    return train;
}

void led_position(const ProbeTrain& train, int led_index, double& x, double& y) {
    if (led_index < 0 || led_index >= train.n_leds)
        throw InvariantViolation("led_index out of range");
    const double ang = 2.0 * M_PI * led_index / train.n_leds;
    x = train.eccentricity + 3.0 * std::cos(ang);
    y = 3.0 * std::sin(ang);
}

std::vector<double> schedule_checkups(double shift_duration_s, const CheckupPolicy& policy) {
    if (!(policy.train_duration_s > 0.0)) throw PolicyError("checkup train duration must be positive");
    if (!(policy.period_s > policy.train_duration_s))
        throw PolicyError("checkup period must exceed the train duration");
    if (!(policy.phase_s >= 0.0 && policy.phase_s < policy.period_s))
        throw PolicyError("checkup phase must be in [0, period)");
    std::vector<double> onsets;
    for (double t = policy.phase_s; t + policy.train_duration_s <= shift_duration_s; t += policy.period_s)
        onsets.push_back(t);
    return onsets;
}

void write_train(const ProbeTrain& t, const std::filesystem::path& path) {
    validate_train(t);
    json j;
    j["v"] = 1;
    j["duration"] = t.duration;
    j["eccentricity"] = t.eccentricity;
    j["n_leds"] = t.n_leds;
    j["seed"] = t.seed;
    json events = json::array();
    for (const auto& e : t.events) {
        events.push_back({{"t", e.t},
                          {"led", e.led_index},
                          {"kind", e.kind == LedEventKind::Deviant ? "Deviant" : "Standard"}});
    }
    j["events"] = std::move(events);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    f << j.dump(2) << "\n";
    if (!f) throw IoError("write failed: " + path.string());
}

ProbeTrain read_train(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw MissingFile("cannot open train file: " + path.string());
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": malformed JSON: " + e.what());
    }
    ProbeTrain t;
    try {
        if (j.value("v", 0) != 1) throw ParseError(path.string() + ": unsupported train schema version");
        t.duration = j.at("duration").get<double>();
        t.eccentricity = j.at("eccentricity").get<double>();
        t.n_leds = j.at("n_leds").get<int>();
        t.seed = j.at("seed").get<uint64_t>();
        for (const auto& je : j.at("events")) {
            LedEvent e;
            e.t = je.at("t").get<double>();
            e.led_index = je.at("led").get<int>();
            const auto kind = je.at("kind").get<std::string>();
            if (kind == "Standard") e.kind = LedEventKind::Standard;
            else if (kind == "Deviant") e.kind = LedEventKind::Deviant;
            else throw ParseError(path.string() + ": unknown event kind '" + kind + "'");
            t.events.push_back(e);
        }
    } catch (const json::exception& e) {
        throw ParseError(path.string() + ": bad train fields: " + e.what());
    }
    validate_train(t);
    return t;
}

bool operator==(const LedEvent& a, const LedEvent& b) {
    return a.t == b.t && a.led_index == b.led_index && a.kind == b.kind;
}

bool operator==(const ProbeTrain& a, const ProbeTrain& b) {
    return a.duration == b.duration && a.eccentricity == b.eccentricity &&
           a.n_leds == b.n_leds && a.seed == b.seed && a.events == b.events;
}

} // namespace vigil::probe
