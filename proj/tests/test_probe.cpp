#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "test_support.hpp"
#include "vigil/probe.hpp"
#include "vigil/telemetry.hpp"

using namespace vigil;
using namespace vigil::probe;
using test_support::TempDir;
using test_support::check_throws_with;

TEST_CASE("default config produces a valid 30 s train, deterministic per seed") {
    ProbeConfig cfg;
    for (uint64_t seed : {0ull, 1ull, 99ull, 1234567ull}) {
        const ProbeTrain t = generate_probe_train(cfg, seed);
        CHECK(t.duration == 30.0);
        CHECK(t.n_leds == cfg.n_leds);
        CHECK(t.seed == seed);
        CHECK_NOTHROW(validate_train(t));
        CHECK(generate_probe_train(cfg, seed) == t);

        // Interval bounds: base 1 s with 20% jitter keeps every gap in
        // [0.8, 1.2], so the event count is pinned to a narrow band.
        CHECK(t.events.size() >= 25);
        CHECK(t.events.size() <= 37);
        for (size_t i = 1; i < t.events.size(); ++i) {
            const double gap = t.events[i].t - t.events[i - 1].t;
            CHECK(gap >= 0.8 - 1e-9);
            CHECK(gap <= 1.2 + 1e-9);
        }
    }
}

TEST_CASE("zero jitter and zero deviants give the cyclic 0,1,2,... progression") {
    ProbeConfig cfg;
    cfg.interval_jitter = 0.0;
    cfg.deviant_prob = 0.0;
    const ProbeTrain t = generate_probe_train(cfg, 7);
    REQUIRE(t.events.size() == 29); // t = 1..29; t = 30 falls outside
    for (size_t k = 0; k < t.events.size(); ++k) {
        CHECK(t.events[k].t == double(k + 1));
        CHECK(t.events[k].kind == LedEventKind::Standard);
        CHECK(t.events[k].led_index == int(k % size_t(cfg.n_leds)));
    }
}

TEST_CASE("deviants never hit the first two events and step by 2..n_leds-1") {
    ProbeConfig cfg;
    cfg.deviant_prob = 0.3;
    size_t deviants = 0;
    for (uint64_t seed = 0; seed < 50; ++seed) {
        const ProbeTrain t = generate_probe_train(cfg, seed);
        CHECK_NOTHROW(validate_train(t));
        int lit = cfg.n_leds - 1; // array dark; the first Standard lights LED 0
        for (size_t k = 0; k < t.events.size(); ++k) {
            const auto& e = t.events[k];
            const int step = (e.led_index - lit + cfg.n_leds) % cfg.n_leds;
            if (e.kind == LedEventKind::Deviant) {
                ++deviants;
                CHECK(k >= 2);
                CHECK(step >= 2);
                CHECK(step <= cfg.n_leds - 1);
            } else {
                CHECK(step == 1);
            }
            lit = e.led_index;
        }
    }
    CHECK(deviants > 0);
}

TEST_CASE("two-LED arrays cannot express a deviant and never get one") {
    ProbeConfig cfg;
    cfg.n_leds = 2;
    cfg.deviant_prob = 0.3;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        const ProbeTrain t = generate_probe_train(cfg, seed);
        for (const auto& e : t.events) CHECK(e.kind == LedEventKind::Standard);
        CHECK_NOTHROW(validate_train(t));
    }
}

TEST_CASE("deviant fraction converges to deviant_prob") {
    ProbeConfig cfg; // deviant_prob 0.15
    size_t eligible = 0, deviants = 0;
    uint64_t seed = 1000;
    while (eligible < 10000) {
        const ProbeTrain t = generate_probe_train(cfg, seed++);
        for (size_t k = 2; k < t.events.size(); ++k) { // first two can never deviate
            ++eligible;
            deviants += t.events[k].kind == LedEventKind::Deviant;
        }
    }
    const double frac = double(deviants) / double(eligible);
    INFO("deviant fraction: " << frac);
    CHECK(std::abs(frac - cfg.deviant_prob) <= 0.01);
}

TEST_CASE("config invariants") {
    ProbeConfig cfg;
    CHECK_NOTHROW(validate_config(cfg));

    SUBCASE("n_leds floor") {
        cfg.n_leds = 1;
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    }
    SUBCASE("deviant_prob cap") {
        cfg.deviant_prob = 0.31;
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    }
    SUBCASE("jitter below 1") {
        cfg.interval_jitter = 1.0;
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    }
    SUBCASE("positive interval, eccentricity, duration") {
        cfg.base_interval = 0.0;
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
        cfg = ProbeConfig{};
        cfg.eccentricity = -1.0;
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
        cfg = ProbeConfig{};
        cfg.duration = 0.0;
        CHECK_THROWS_AS(validate_config(cfg), ConfigError);
    }
}

TEST_CASE("train invariants") {
    ProbeTrain t = generate_probe_train(ProbeConfig{}, 3);

    SUBCASE("event time past duration") {
        t.events.back().t = t.duration + 1.0;
        CHECK_THROWS_AS(validate_train(t), InvariantViolation);
    }
    SUBCASE("non-increasing event times") {
        std::swap(t.events[3].t, t.events[4].t);
        CHECK_THROWS_AS(validate_train(t), InvariantViolation);
    }
    SUBCASE("led_index out of range") {
        t.events[0].led_index = t.n_leds;
        CHECK_THROWS_AS(validate_train(t), InvariantViolation);
    }
    SUBCASE("standard events must advance by exactly one") {
        // The first Standard must light LED 0.
        t.events[0].led_index = 1;
        CHECK_THROWS_AS(validate_train(t), InvariantViolation);
    }
    SUBCASE("early deviants are rejected") {
        t.events[0].kind = LedEventKind::Deviant;
        t.events[0].led_index = 2;
        CHECK_THROWS_AS(validate_train(t), InvariantViolation);
    }
}

TEST_CASE("checkup schedule fits whole trains inside the shift") {
    CheckupPolicy p; // period 1800, phase 0, train 30

    SUBCASE("worked examples") {
        CheckupPolicy p600{600.0, 0.0, 30.0};
        CHECK(schedule_checkups(3600.0, p600) ==
              std::vector<double>{0.0, 600.0, 1200.0, 1800.0, 2400.0, 3000.0});
        CHECK(schedule_checkups(29.0, p600).empty());
        CHECK(schedule_checkups(8 * 3600.0, p).size() == 16);
    }

    SUBCASE("phase shifts every onset") {
        CheckupPolicy ph{600.0, 90.0, 30.0};
        const auto v = schedule_checkups(1300.0, ph);
        CHECK(v == std::vector<double>{90.0, 690.0}); // 1290+30 > 1300 excludes the third
    }

    SUBCASE("the last train must fit entirely") {
        CheckupPolicy tight{600.0, 0.0, 30.0};
        CHECK(schedule_checkups(630.0, tight).size() == 2);  // 600+30 == 630 fits
        CHECK(schedule_checkups(629.0, tight).size() == 1);
    }

    SUBCASE("policy errors") {
        CHECK_THROWS_AS(schedule_checkups(3600.0, CheckupPolicy{30.0, 0.0, 30.0}), PolicyError);
        CHECK_THROWS_AS(schedule_checkups(3600.0, CheckupPolicy{600.0, 600.0, 30.0}), PolicyError);
        CHECK_THROWS_AS(schedule_checkups(3600.0, CheckupPolicy{600.0, -1.0, 30.0}), PolicyError);
        CHECK_THROWS_AS(schedule_checkups(3600.0, CheckupPolicy{600.0, 0.0, 0.0}), PolicyError);
        // PolicyError is a ConfigError, so CLI exit mapping stays uniform.
        CHECK_THROWS_AS(schedule_checkups(3600.0, CheckupPolicy{30.0, 0.0, 30.0}), ConfigError);
    }
}

TEST_CASE("led_position lays the array on a 3-degree ring at the eccentricity") {
    ProbeTrain t;
    t.n_leds = 8;
    t.eccentricity = 25.0;
    double x = 0, y = 0;
    led_position(t, 0, x, y);
    CHECK(x == doctest::Approx(28.0));
    CHECK(y == doctest::Approx(0.0));
    led_position(t, 2, x, y); // quarter turn
    CHECK(x == doctest::Approx(25.0));
    CHECK(y == doctest::Approx(3.0));
    led_position(t, 4, x, y);
    CHECK(x == doctest::Approx(22.0));
    CHECK(y == doctest::Approx(0.0).scale(1.0));

    // All LEDs sit exactly 3 degrees from the array center.
    for (int i = 0; i < t.n_leds; ++i) {
        led_position(t, i, x, y);
        CHECK(std::hypot(x - 25.0, y) == doctest::Approx(3.0));
    }
    CHECK_THROWS_AS(led_position(t, 8, x, y), InvariantViolation);
    CHECK_THROWS_AS(led_position(t, -1, x, y), InvariantViolation);
}

TEST_CASE("train write/read round-trip and parse failures") {
    TempDir dir("train_io");
    const ProbeTrain t = generate_probe_train(ProbeConfig{}, 11);
    const auto path = dir / "train.json";
    write_train(t, path);
    CHECK(read_train(path) == t);

    test_support::write_text(dir / "bad.json", "{\"v\": 2}");
    CHECK_THROWS_AS(read_train(dir / "bad.json"), ParseError);
    test_support::write_text(dir / "garbage.json", "]{[");
    CHECK_THROWS_AS(read_train(dir / "garbage.json"), ParseError);
    CHECK_THROWS_AS(read_train(dir / "absent.json"), MissingFile);
}
