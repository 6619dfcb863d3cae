#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "vigil/errors.hpp"

namespace vigil::probe {

enum class LedEventKind { Standard, Deviant };

// One LED change inside a probe train. A Standard change advances the lit
// LED by +1 around the array; a Deviant change breaks that progression
// with a step of 2 or more. Deviants never occur before the progression
// has had two events to establish itself.
struct LedEvent {
    double t = 0.0; // seconds from train onset
    int led_index = 0;
    LedEventKind kind = LedEventKind::Standard;
};

struct ProbeTrain {
    double duration = 30.0;
    double eccentricity = 25.0; // degrees, array center from straight ahead
    int n_leds = 8;
    uint64_t seed = 0;
    std::vector<LedEvent> events;
};

struct ProbeConfig {
    int n_leds = 8;
    double base_interval = 1.0;   // seconds between changes
    double interval_jitter = 0.2; // fraction of base_interval
    double deviant_prob = 0.15;
    double eccentricity = 25.0;
    double duration = 30.0;
};

void validate_config(const ProbeConfig& c);
void validate_train(const ProbeTrain& t);

// Deterministic per (config, seed). Event k+1 fires base_interval*(1 ± u*jitter)
// after event k; the lit LED steps +1 (Standard) or by a random step in
// [2, n_leds-1] (Deviant, probability deviant_prob, never on the first two
// events). Trains with n_leds < 3 cannot express a deviant and get none.
ProbeTrain generate_probe_train(const ProbeConfig& config, uint64_t seed);

// Physical position (degrees of visual angle) of one LED: the array is a
// small ring of radius 3 degrees centered at (eccentricity, 0).
void led_position(const ProbeTrain& train, int led_index, double& x, double& y);

struct CheckupPolicy {
    double period_s = 1800.0;
    double phase_s = 0.0;
    double train_duration_s = 30.0;
};

// Checkup onset times within a shift: phase, phase+period, ... while the
// whole train still fits before the shift ends.
std::vector<double> schedule_checkups(double shift_duration_s, const CheckupPolicy& policy);

void write_train(const ProbeTrain& t, const std::filesystem::path& path);
ProbeTrain read_train(const std::filesystem::path& path);

bool operator==(const LedEvent& a, const LedEvent& b);
bool operator==(const ProbeTrain& a, const ProbeTrain& b);

} // namespace vigil::probe
