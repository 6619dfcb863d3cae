#pragma once

// Randomized-but-valid session factory shared by the telemetry round-trip
// tests and the acceptance run. Every field that ends up in a file is
// produced the way the pipeline produces it (q9 at the source, simulated
// traces), so write/read round-trips must be bit-exact.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "vigil/probe.hpp"
#include "vigil/rng.hpp"
#include "vigil/synthdriver.hpp"
#include "vigil/telemetry.hpp"

namespace session_rig {

inline vigil::telemetry::Session make_random_session(uint64_t seed) {
    using namespace vigil;
    Rng rng = Rng::derive(seed, {Rng::label("test.session")});

    telemetry::Session s;
    s.manifest.subject_id = "S" + std::to_string(1 + rng.uniform_int(99));
    s.manifest.shift_index = 1 + static_cast<int>(rng.uniform_int(10));
    const telemetry::Condition conditions[] = {
        telemetry::Condition::Sober, telemetry::Condition::Alcohol, telemetry::Condition::Thc,
        telemetry::Condition::Fatigue, telemetry::Condition::TimeOnTask};
    s.manifest.condition = conditions[rng.uniform_int(5)];
    const bool sober = s.manifest.condition == telemetry::Condition::Sober;

    const size_t n_checkups = 1 + rng.uniform_int(2);
    const synthdriver::DriverProfile profile = synthdriver::sample_profile(rng.next_u64());
    double max_lambda = 0.0;
    char ref[64];
    for (size_t k = 0; k < n_checkups; ++k) {
        probe::ProbeConfig pc;
        pc.n_leds = 3 + static_cast<int>(rng.uniform_int(6));
        pc.base_interval = telemetry::q9(rng.uniform(0.8, 1.5));
        pc.interval_jitter = 0.2;
        pc.deviant_prob = telemetry::q9(rng.uniform(0.0, 0.3));
        pc.eccentricity = telemetry::q9(rng.uniform(15.0, 30.0));
        pc.duration = telemetry::q9(rng.uniform(5.0, 8.0));
        const probe::ProbeTrain train = probe::generate_probe_train(pc, rng.next_u64());

        const double lambda = sober ? 0.0 : telemetry::q9(rng.uniform(0.1, 1.0));
        max_lambda = std::max(max_lambda, lambda);
        s.manifest.checkup_severities.push_back(lambda);

        synthdriver::ImpairmentSpec imp;
        imp.condition = s.manifest.condition;
        imp.severity = lambda;
        const uint64_t sim_seed = rng.next_u64();
        telemetry::Trace native = synthdriver::simulate_trace(profile, imp, train, sim_seed);
        telemetry::Trace cloud = synthdriver::recycle_trace(native, profile, sim_seed + 1);

        // Canonical refs, matching what write_session regenerates, so a
        // write/read round-trip compares equal including the manifest.
        std::snprintf(ref, sizeof(ref), "trains/train_%03zu.json", k);
        s.manifest.probe_train_refs.emplace_back(ref);
        std::snprintf(ref, sizeof(ref), "traces/native_%03zu.jsonl", k);
        s.manifest.trace_refs[telemetry::StreamId::Native].emplace_back(ref);
        std::snprintf(ref, sizeof(ref), "traces/cloud_%03zu.jsonl", k);
        s.manifest.trace_refs[telemetry::StreamId::Cloud].emplace_back(ref);

        s.trains.push_back(train);
        s.traces[telemetry::StreamId::Native].push_back(std::move(native));
        s.traces[telemetry::StreamId::Cloud].push_back(std::move(cloud));
    }
    s.manifest.severity = max_lambda;
    return s;
}

} // namespace session_rig
