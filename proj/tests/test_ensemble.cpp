#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "test_support.hpp"
#include "vigil/ensemble.hpp"
#include "vigil/learners/model_io.hpp"
#include "vigil/rng.hpp"
#include "vote_rig.hpp"

using namespace vigil;
using namespace vigil::ensemble;
using telemetry::q9;

namespace {

CheckupVerdict mk_verdict(const std::string& id, bool truth, bool impaired, double score,
                          double thr = 0.5) {
    CheckupVerdict v;
    v.subject_id = id;
    v.truth_impaired = truth;
    v.impaired = impaired;
    v.mean_score = score;
    v.threshold = thr;
    return v;
}

features::FeatureVector random_fv(Rng& rng) {
    std::array<double, features::kFeatureCount> a{};
    for (auto& x : a) x = rng.normal(0.0, 1.0);
    a[0] = rng.normal(350.0, 40.0);
    a[1] = rng.uniform(0.7, 1.0);
    return features::FeatureVector::from_array(a);
}

} // namespace

TEST_CASE("every vote pattern flows through the two-of-four rule") {
    const DriverBaseline b = vote_rig::make_baseline();
    const learners::GbtModel pop = vote_rig::make_population();

    for (int mask = 0; mask < 16; ++mask) {
        const bool o = mask & 1, l = mask & 2, i = mask & 4, g = mask & 8;
        const features::FeatureVector fv = vote_rig::flag_vector(o, l, i, g);
        const CheckupVerdict v = run_checkup(fv, b, pop);

        INFO("pattern ocsvm=" << o << " lof=" << l << " iforest=" << i << " gbt=" << g);
        CHECK(v.votes.ocsvm == o);
        CHECK(v.votes.lof == l);
        CHECK(v.votes.iforest == i);
        CHECK(v.votes.gbt == g);
        CHECK(v.has_votes);
        CHECK(v.impaired == (v.votes.impaired_count() >= 2));
        CHECK(v.threshold == 0.5);

        // The reported score is the mean of the four normalized scores.
        const auto arr = fv.to_array(); // stats are mean 0 / sd 1
        const std::vector<double> z(arr.begin(), arr.end());
        const double want =
            q9((b.norm_ocsvm.apply(-learners::decision_ocsvm(b.ocsvm, z)) +
                b.norm_iforest.apply(learners::score_iforest(b.iforest, z)) +
                b.norm_lof.apply(learners::score_lof(b.lof, z)) +
                learners::predict_gbt(pop, z)) /
               4.0);
        CHECK(v.mean_score == want);
    }
}

TEST_CASE("subject aggregation over every correct/wrong split up to 10 checkups") {
    for (int c = 0; c <= 10; ++c) {
        for (int w = 0; c + w <= 10; ++w) {
            if (c + w == 0) continue;
            std::vector<CheckupVerdict> vs;
            for (int i = 0; i < c; ++i) vs.push_back(mk_verdict("D", true, true, 0.6));
            for (int i = 0; i < w; ++i) vs.push_back(mk_verdict("D", true, false, 0.45));

            const SubjectResult r = aggregate_subject(vs, TiePolicy::Omit);
            CHECK(r.n_correct == c);
            CHECK(r.n_wrong == w);
            if (c > w) CHECK(r.outcome == SubjectOutcome::Correct);
            if (c < w) CHECK(r.outcome == SubjectOutcome::Wrong);
            if (c == w) CHECK(r.outcome == SubjectOutcome::Omitted);
        }
    }
}

TEST_CASE("score margins break ties only under the fused policy") {
    SUBCASE("positive margin sum decides Correct") {
        const std::vector<CheckupVerdict> vs = {mk_verdict("D", true, true, 0.6),
                                                mk_verdict("D", true, false, 0.45)};
        CHECK(aggregate_subject(vs, TiePolicy::Omit).outcome == SubjectOutcome::Omitted);
        CHECK(aggregate_subject(vs, TiePolicy::ScoreMargin).outcome == SubjectOutcome::Correct);
    }
    SUBCASE("negative margin sum decides Wrong") {
        const std::vector<CheckupVerdict> vs = {mk_verdict("D", true, true, 0.55),
                                                mk_verdict("D", true, false, 0.4)};
        CHECK(aggregate_subject(vs, TiePolicy::ScoreMargin).outcome == SubjectOutcome::Wrong);
    }
    SUBCASE("an exactly-zero margin still omits") {
        const std::vector<CheckupVerdict> vs = {mk_verdict("D", true, true, 0.6),
                                                mk_verdict("D", true, false, 0.4)};
        CHECK(aggregate_subject(vs, TiePolicy::ScoreMargin).outcome == SubjectOutcome::Omitted);
    }
    SUBCASE("majorities ignore the margin") {
        // Two wrong verdicts with a large positive margin sum still lose.
        const std::vector<CheckupVerdict> vs = {mk_verdict("D", true, false, 0.8),
                                                mk_verdict("D", true, false, 0.8),
                                                mk_verdict("D", true, true, 0.9)};
        const SubjectResult r = aggregate_subject(vs, TiePolicy::ScoreMargin);
        CHECK(r.n_wrong == 2);
        CHECK(r.outcome == SubjectOutcome::Wrong);
    }
    SUBCASE("input validation") {
        CHECK_THROWS_AS(aggregate_subject({}, TiePolicy::Omit), EmptyInput);
        const std::vector<CheckupVerdict> mixed = {mk_verdict("A", true, true, 0.6),
                                                   mk_verdict("B", true, true, 0.6)};
        test_support::check_throws_with<InvariantViolation>(
            [&] { aggregate_subject(mixed, TiePolicy::Omit); }, "A");
    }
}

TEST_CASE("stream fusion averages scores and fails safe on the boundary") {
    CheckupVerdict n = mk_verdict("D", true, true, 0.9, 0.6);
    n.channel = ChannelId::Native;
    n.shift_index = 2;
    n.checkup_index = 3;
    n.t = 5400.0;
    n.condition = telemetry::Condition::Alcohol;
    n.severity = 0.7;
    CheckupVerdict c = mk_verdict("D", true, false, 0.1, 0.4);
    c.channel = ChannelId::Cloud;
    c.shift_index = 2;
    c.checkup_index = 3;
    c.t = 5400.0;

    const auto fused = fuse_streams({n}, {c});
    REQUIRE(fused.size() == 1);
    const CheckupVerdict& f = fused[0];
    CHECK(f.channel == ChannelId::Fused);
    CHECK(!f.has_votes);
    CHECK(f.votes.impaired_count() == 0);
    CHECK(f.mean_score == q9(0.5));
    CHECK(f.threshold == q9(0.5));
    CHECK(f.impaired); // score == threshold counts as impaired
    CHECK(f.subject_id == "D");
    CHECK(f.shift_index == 2);
    CHECK(f.checkup_index == 3);
    CHECK(f.t == 5400.0);
    CHECK(f.condition == telemetry::Condition::Alcohol);
    CHECK(f.severity == 0.7);

    // Strictly below the fused threshold stays sober.
    CheckupVerdict n2 = mk_verdict("D", false, false, 0.4, 0.5);
    CheckupVerdict c2 = mk_verdict("D", false, false, 0.3, 0.5);
    CHECK(!fuse_streams({n2}, {c2})[0].impaired);
}

TEST_CASE("fusion requires a perfect key pairing") {
    const CheckupVerdict a = mk_verdict("A", false, false, 0.2);
    const CheckupVerdict b = mk_verdict("B", false, false, 0.2);
    test_support::check_throws_with<KeyMismatch>([&] { fuse_streams({a, b}, {a}); },
                                                 "sizes differ: 2 vs 1");
    test_support::check_throws_with<KeyMismatch>([&] { fuse_streams({a, b}, {a, a}); },
                                                 "duplicate cloud checkup key");
    // Duplicate native keys surface through the bijection: the second copy
    // finds its cloud partner already consumed.
    test_support::check_throws_with<KeyMismatch>([&] { fuse_streams({b, b}, {a, b}); },
                                                 "no cloud checkup pairs with B");
    test_support::check_throws_with<KeyMismatch>([&] { fuse_streams({a}, {b}); },
                                                 "no cloud checkup pairs with A");
}

TEST_CASE("fusion does not add omitted subjects on random scores") {
    Rng rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<CheckupVerdict> native, cloud;
        const int n_subj = 5, n_chk = 6;
        for (int s = 0; s < n_subj; ++s) {
            for (int k = 0; k < n_chk; ++k) {
                const bool truth = rng.bernoulli(0.4);
                auto make = [&](ChannelId ch) {
                    CheckupVerdict v;
                    v.subject_id = "S" + std::to_string(s);
                    v.checkup_index = k;
                    v.t = 1800.0 * k;
                    v.channel = ch;
                    v.truth_impaired = truth;
                    v.mean_score = q9(rng.uniform());
                    v.threshold = 0.5;
                    v.impaired = v.mean_score >= v.threshold;
                    return v;
                };
                native.push_back(make(ChannelId::Native));
                cloud.push_back(make(ChannelId::Cloud));
            }
        }
        const auto fused = fuse_streams(native, cloud);

        auto omitted = [&](const std::vector<CheckupVerdict>& all, TiePolicy policy) {
            int count = 0;
            for (int s = 0; s < n_subj; ++s) {
                std::vector<CheckupVerdict> mine;
                for (const auto& v : all)
                    if (v.subject_id == "S" + std::to_string(s)) mine.push_back(v);
                if (aggregate_subject(mine, policy).outcome == SubjectOutcome::Omitted) ++count;
            }
            return count;
        };
        const int om_f = omitted(fused, TiePolicy::ScoreMargin);
        CHECK(om_f <= omitted(native, TiePolicy::Omit));
        CHECK(om_f <= omitted(cloud, TiePolicy::Omit));
    }
}

TEST_CASE("driver calibration trains the trio on the z-scored sober matrix") {
    Rng rng(55);
    std::vector<features::FeatureVector> sober;
    for (int i = 0; i < 12; ++i) sober.push_back(random_fv(rng));

    const DriverBaseline b = calibrate_driver("D7", sober);
    CHECK(b.subject_id == "D7");
    CHECK(b.stats.n_checkups == 12);
    CHECK(b.ocsvm.n_train == 12);
    CHECK(b.iforest.psi == 12);
    CHECK(b.lof.k == 10);

    // The normalized decision threshold recomputes from its parts.
    const double want = q9((b.norm_ocsvm.apply(0.0) +
                            b.norm_iforest.apply(b.iforest.score_threshold) +
                            b.norm_lof.apply(b.lof.lof_threshold) + 0.5) /
                           4.0);
    CHECK(b.score_threshold == want);

    // Quantile thresholds keep iforest/LOF flags to at most nu of the
    // training set (plus exact score ties). For the SVM only points
    // strictly outside the surface count: at 12 points in 10 dimensions
    // most of the set are free SVs whose decision is +-1e-7 sign noise,
    // but margin errors (alpha at the C bound) stay capped at nu*n.
    int f_oc = 0, f_if = 0, f_lof = 0;
    for (const auto& fv : sober) {
        const auto arr = features::normalize(fv, b.stats).to_array();
        const std::vector<double> z(arr.begin(), arr.end());
        f_oc += learners::decision_ocsvm(b.ocsvm, z) < -1e-4;
        f_if += learners::anomalous_iforest(b.iforest, z);
        f_lof += learners::score_lof(b.lof, z) > b.lof.lof_threshold;
    }
    CHECK(f_oc <= 2);
    CHECK(f_if <= 2);
    CHECK(f_lof <= 2);

    const DriverBaseline again = calibrate_driver("D7", sober);
    CHECK(b == again);
}

TEST_CASE("calibration validation order and messages") {
    Rng rng(56);
    std::vector<features::FeatureVector> nine;
    for (int i = 0; i < 9; ++i) nine.push_back(random_fv(rng));

    // The size check fires before config validation.
    CalibConfig bad;
    bad.nu = 0.0;
    test_support::check_throws_with<TooFewCheckups>(
        [&] { calibrate_driver("D", nine, bad); }, "got 9");

    std::vector<features::FeatureVector> ten = nine;
    ten.push_back(random_fv(rng));
    CHECK_THROWS_AS(calibrate_driver("D", ten, bad), ConfigError);
    CalibConfig c2;
    c2.n_trees = 0;
    CHECK_THROWS_AS(calibrate_driver("D", ten, c2), ConfigError);
    CalibConfig c3;
    c3.lof_k = -1;
    CHECK_THROWS_AS(calibrate_driver("D", ten, c3), ConfigError);
    CalibConfig c4;
    c4.gamma = -0.5;
    CHECK_THROWS_AS(calibrate_driver("D", ten, c4), ConfigError);
    CHECK_NOTHROW(calibrate_driver("D", ten));
}

TEST_CASE("population model holds out exactly the named subject") {
    Rng rng(77);
    std::vector<LabeledRow> rows;
    learners::Matrix kept_X;
    std::vector<int> kept_y;
    const char* ids[] = {"A", "B", "C"};
    for (int i = 0; i < 90; ++i) {
        LabeledRow r;
        r.subject_id = ids[i % 3];
        r.label = i % 2;
        r.z = {r.label ? rng.normal(1.5, 0.4) : rng.normal(-1.5, 0.4), rng.normal(), rng.normal()};
        rows.push_back(r);
        if (r.subject_id != "C") {
            kept_X.push_back(rows.back().z);
            kept_y.push_back(r.label);
        }
    }
    learners::GbtConfig cfg;
    cfg.n_rounds = 30;
    const learners::GbtModel m = train_population(rows, "C", cfg);
    CHECK(m == learners::train_gbt(kept_X, kept_y, cfg));

    // Leave-one-subject-out predictions separate the held-out subject.
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& r : rows)
        if (r.subject_id == "C") {
            scores.push_back(learners::predict_gbt(m, r.z));
            labels.push_back(r.label);
        }
    CHECK(oracle::auc(scores, labels) >= 0.9);
}

TEST_CASE("population model input validation") {
    Rng rng(78);
    std::vector<LabeledRow> rows;
    for (int i = 0; i < 40; ++i)
        rows.push_back({"A", {rng.normal(), rng.normal()}, i % 2});

    test_support::check_throws_with<EmptyInput>([&] { train_population(rows, "A"); },
                                                "holding out A");
    test_support::check_throws_with<DegenerateLabels>([&] { train_population(rows, "Z"); },
                                                      "got 1");

    // Two subjects but a single label class still fails, inside the GBT.
    std::vector<LabeledRow> flat;
    for (int i = 0; i < 40; ++i)
        flat.push_back({i % 2 ? "A" : "B", {rng.normal(), rng.normal()}, 0});
    test_support::check_throws_with<DegenerateLabels>([&] { train_population(flat, "Z"); },
                                                      "all 0");
}

TEST_CASE("intervention ladder escalates on consecutive impairment") {
    auto chk = [](bool impaired, double t, int shift = 1) {
        CheckupVerdict v = mk_verdict("D", impaired, impaired, impaired ? 0.9 : 0.1);
        v.t = t;
        v.shift_index = shift;
        v.checkup_index = int(t / 1800.0);
        return v;
    };

    SUBCASE("single impairment notifies") {
        const auto ev = emit_intervention({chk(true, 0.0)});
        REQUIRE(ev.size() == 1);
        CHECK(ev[0].level == InterventionLevel::Notify);
        CHECK(ev[0].consecutive == 1);
        CHECK(ev[0].subject_id == "D");
    }
    SUBCASE("three in a row walk the full ladder") {
        const auto ev =
            emit_intervention({chk(true, 0.0), chk(true, 1800.0), chk(true, 3600.0)});
        REQUIRE(ev.size() == 3);
        CHECK(ev[0].level == InterventionLevel::Notify);
        CHECK(ev[1].level == InterventionLevel::Alert);
        CHECK(ev[2].level == InterventionLevel::Escalate);
        CHECK(ev[2].consecutive == 3);
    }
    SUBCASE("a sober checkup resets the ladder") {
        const auto ev = emit_intervention(
            {chk(true, 0.0), chk(true, 1800.0), chk(false, 3600.0), chk(true, 5400.0)});
        REQUIRE(ev.size() == 3);
        CHECK(ev[0].level == InterventionLevel::Notify);
        CHECK(ev[1].level == InterventionLevel::Alert);
        CHECK(ev[2].level == InterventionLevel::Notify);
        CHECK(ev[2].consecutive == 1);
    }
    SUBCASE("the fourth consecutive impairment keeps escalating") {
        const auto ev = emit_intervention(
            {chk(true, 0.0), chk(true, 1800.0), chk(true, 3600.0), chk(true, 5400.0)});
        REQUIRE(ev.size() == 4);
        CHECK(ev[3].level == InterventionLevel::Escalate);
        CHECK(ev[3].consecutive == 4);
    }
    SUBCASE("no impairment, no events") {
        CHECK(emit_intervention({chk(false, 0.0), chk(false, 1800.0)}).empty());
    }
    SUBCASE("runs continue across a shift boundary and unsorted input is sorted") {
        const std::vector<CheckupVerdict> vs = {chk(true, 100.0, 2), chk(true, 3000.0, 1)};
        const auto ev = emit_intervention(vs); // shift 1 sorts first despite later t
        REQUIRE(ev.size() == 2);
        CHECK(ev[0].t == 3000.0);
        CHECK(ev[0].level == InterventionLevel::Notify);
        CHECK(ev[1].t == 100.0);
        CHECK(ev[1].level == InterventionLevel::Alert);
    }
    SUBCASE("mixed subjects are rejected") {
        auto a = chk(true, 0.0);
        auto b = chk(true, 1800.0);
        b.subject_id = "E";
        CHECK_THROWS_AS(emit_intervention({a, b}), InvariantViolation);
    }
    SUBCASE("the JSONL sink writes one object per event") {
        test_support::TempDir tmp("sink");
        const auto path = tmp / "events.jsonl";
        JsonlSink sink(path);
        emit_intervention({chk(true, 0.0), chk(true, 1800.0)}, &sink);
        const std::string text = test_support::read_text(path);
        CHECK(std::count(text.begin(), text.end(), '\n') == 2);
        CHECK(text.find("\"level\":\"Notify\"") != std::string::npos);
        CHECK(text.find("\"level\":\"Alert\"") != std::string::npos);
        CHECK(text.find("\"subject_id\":\"D\"") != std::string::npos);
        CHECK(text.find("\"consecutive\":2") != std::string::npos);
    }
}

TEST_CASE("baseline files round-trip bit-exactly") {
    Rng rng(99);
    std::vector<features::FeatureVector> sober;
    for (int i = 0; i < 11; ++i) sober.push_back(random_fv(rng));
    const DriverBaseline b = calibrate_driver("D9", sober);

    test_support::TempDir tmp("baseline");
    const auto path = tmp / "d9.baseline.json";
    save_baseline(b, path);
    CHECK(load_baseline(path) == b);

    // The handcrafted rig baseline round-trips too.
    const DriverBaseline rig = vote_rig::make_baseline();
    save_baseline(rig, tmp / "rig.json");
    CHECK(load_baseline(tmp / "rig.json") == rig);

    SUBCASE("wrong kind of model file") {
        learners::save_gbt(vote_rig::make_population(), tmp / "pop.json");
        test_support::check_throws_with<ModelFormatError>(
            [&] { load_baseline(tmp / "pop.json"); }, "driver_baseline");
    }
    SUBCASE("garbage and missing files") {
        test_support::write_text(tmp / "junk.json", "{oops");
        CHECK_THROWS_AS(load_baseline(tmp / "junk.json"), ParseError);
        CHECK_THROWS_AS(load_baseline(tmp / "nope.json"), MissingFile);
    }
}

TEST_CASE("score normalization clamps to the calibrated band") {
    const ScoreNorm n{0.0, 1.0};
    CHECK(n.apply(0.5) == 0.5);
    CHECK(n.apply(-0.2) == 0.0);
    CHECK(n.apply(1.2) == 1.2);
    CHECK(n.apply(2.0) == 1.5);

    const ScoreNorm wide{2.0, 6.0};
    CHECK(wide.apply(4.0) == 0.5);

    // Degenerate calibration range: anything above lo saturates.
    const ScoreNorm flat{3.0, 3.0};
    CHECK(flat.apply(4.0) == 1.5);
    CHECK(flat.apply(3.0) == 0.0);
    CHECK(flat.apply(2.0) == 0.0);
}

TEST_CASE("enum names round-trip") {
    for (ChannelId c : {ChannelId::Native, ChannelId::Cloud, ChannelId::Fused})
        CHECK(channel_from_string(to_string(c)) == c);
    CHECK_THROWS_AS(channel_from_string("Edge"), ParseError);
    CHECK(to_string(SubjectOutcome::Correct) == "Correct");
    CHECK(to_string(SubjectOutcome::Wrong) == "Wrong");
    CHECK(to_string(SubjectOutcome::Omitted) == "Omitted");
    CHECK(to_string(InterventionLevel::Escalate) == "Escalate");
}
