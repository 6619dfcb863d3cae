#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "test_support.hpp"
#include "vigil/learners/lof.hpp"
#include "vigil/learners/model_io.hpp"

using namespace vigil;
using namespace vigil::learners;

TEST_CASE("training LOF matches the brute-force oracle to 1e-9") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        const Matrix X = oracle::gaussian_matrix(50, 10, seed);
        const LofModel m = train_lof(X, 5, 0.1);
        const std::vector<double> want = oracle::lof_values(X, 5);
        REQUIRE(m.train_lof.size() == want.size());
        for (size_t i = 0; i < want.size(); ++i) {
            INFO("seed " << seed << " point " << i);
            CHECK(std::abs(m.train_lof[i] - want[i]) <= 1e-9);
        }
    }
}

TEST_CASE("query scoring matches the oracle on held-out points") {
    for (uint64_t seed = 100; seed < 105; ++seed) {
        const Matrix X = oracle::gaussian_matrix(40, 10, seed);
        const Matrix Q = oracle::gaussian_matrix(10, 10, seed + 1000, 1.5);
        const LofModel m = train_lof(X, 5, 0.1);
        for (const auto& x : Q)
            CHECK(std::abs(score_lof(m, x) - oracle::lof_query(X, 5, x)) <= 1e-9);
    }
}

TEST_CASE("degenerate geometries hit the exact fixed points") {
    SUBCASE("two points, k=1: both LOF exactly 1") {
        const Matrix X = {{0.0, 0.0}, {1.0, 0.0}};
        const LofModel m = train_lof(X, 1, 0.1);
        CHECK(m.train_lof[0] == 1.0);
        CHECK(m.train_lof[1] == 1.0);
    }
    SUBCASE("all points duplicated: LOF exactly 1 via the lrd cap") {
        const Matrix X(6, std::vector<double>{2.0, -1.0, 3.0});
        const LofModel m = train_lof(X, 3, 0.1);
        for (double v : m.train_lof) CHECK(v == 1.0);
        // A query at the same spot is equally unremarkable.
        CHECK(score_lof(m, {2.0, -1.0, 3.0}) == 1.0);
    }
    SUBCASE("uniform grid interior sits near 1") {
        Matrix X;
        for (int i = 0; i < 7; ++i)
            for (int j = 0; j < 7; ++j) X.push_back({double(i), double(j)});
        const LofModel m = train_lof(X, 4, 0.1);
        const std::vector<double> want = oracle::lof_values(X, 4);
        for (int i = 0; i < 49; ++i) {
            CHECK(std::abs(m.train_lof[i] - want[i]) <= 1e-9);
            const int r = i / 7, c = i % 7;
            if (r >= 2 && r <= 4 && c >= 2 && c <= 4)
                CHECK(std::abs(m.train_lof[i] - 1.0) <= 0.15);
        }
    }
}

TEST_CASE("an isolated point scores far above the cluster") {
    Matrix X = oracle::gaussian_matrix(30, 4, 7);
    const LofModel m = train_lof(X, 5, 0.1);
    const double inlier = score_lof(m, {0.1, -0.1, 0.05, 0.0});
    const double outlier = score_lof(m, {50.0, 50.0, 50.0, 50.0});
    CHECK(outlier > 5.0 * inlier);
    CHECK(anomalous_lof(m, {50.0, 50.0, 50.0, 50.0}));
}

TEST_CASE("threshold is the (1-nu) quantile of training LOF") {
    const Matrix X = oracle::gaussian_matrix(20, 3, 11);
    const LofModel m = train_lof(X, 4, 0.1);
    std::vector<double> sorted = m.train_lof;
    std::sort(sorted.begin(), sorted.end());
    // ceil(0.9 * 20) - 1 = index 17
    CHECK(m.lof_threshold == sorted[17]);

    const LofModel half = train_lof(X, 4, 0.5);
    CHECK(half.lof_threshold == sorted[9]);
}

TEST_CASE("default neighborhood size") {
    CHECK(default_lof_k(5) == 4);
    CHECK(default_lof_k(11) == 10);
    CHECK(default_lof_k(50) == 10);
    CHECK(default_lof_k(2) == 1);
}

TEST_CASE("input validation") {
    const Matrix X = {{0.0}, {1.0}, {2.0}};
    test_support::check_throws_with<TooFewPoints>([&] { train_lof(X, 3, 0.1); }, "k+1 points");
    test_support::check_throws_with<TooFewPoints>([&] { train_lof(X, 0, 0.1); }, "k >= 1");
    CHECK_THROWS_AS(train_lof(X, 2, 0.0), ConfigError);
    CHECK_THROWS_AS(train_lof(X, 2, 1.0), ConfigError);
    const Matrix ragged = {{0.0, 1.0}, {2.0}};
    CHECK_THROWS_AS(train_lof(ragged, 1, 0.1), InvariantViolation);
}

TEST_CASE("training is deterministic") {
    const Matrix X = oracle::gaussian_matrix(35, 10, 3);
    const LofModel a = train_lof(X, 5, 0.1);
    const LofModel b = train_lof(X, 5, 0.1);
    CHECK(a.train_lof == b.train_lof);
    CHECK(a.kdist == b.kdist);
    CHECK(a.lrd == b.lrd);
    CHECK(a.lof_threshold == b.lof_threshold);
}

TEST_CASE("model files round-trip bit-exactly") {
    const Matrix X = oracle::gaussian_matrix(25, 6, 19);
    const LofModel m = train_lof(X, 4, 0.1);
    test_support::TempDir tmp("lof");
    save_lof(m, tmp / "m.json");
    const LofModel back = load_lof(tmp / "m.json");
    CHECK(back == m);
    CHECK(score_lof(back, X[0]) == score_lof(m, X[0]));

    CHECK_THROWS_AS(load_lof(tmp / "absent.json"), MissingFile);
    test_support::write_text(tmp / "bad.json", "not json");
    CHECK_THROWS_AS(load_lof(tmp / "bad.json"), ParseError);
}
