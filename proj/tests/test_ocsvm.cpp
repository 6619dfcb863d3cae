#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "test_support.hpp"
#include "vigil/learners/model_io.hpp"
#include "vigil/learners/ocsvm.hpp"

using namespace vigil;
using namespace vigil::learners;

TEST_CASE("nu = 1 pins every coefficient to the shared bound") {
    const Matrix X = oracle::gaussian_matrix(8, 3, 1);
    const OcsvmModel m = train_ocsvm(X, 1.0, 0.5);
    REQUIRE(m.alpha.size() == 8);
    for (double a : m.alpha) CHECK(a == doctest::Approx(1.0 / 8.0).epsilon(1e-9));
    CHECK(m.kkt_residual <= 1e-6);
}

TEST_CASE("SMO reaches the KKT tolerance on real-sized problems") {
    for (uint64_t seed = 0; seed < 5; ++seed) {
        const Matrix X = oracle::gaussian_matrix(100, 10, seed);
        const OcsvmModel m = train_ocsvm(X, 0.1, 0.1);
        CHECK(m.kkt_residual <= 1e-6);
        CHECK(m.n_train == 100);

        // Free support vectors sit on the decision surface.
        const double c = 1.0 / (0.1 * 100);
        for (size_t i = 0; i < m.alpha.size(); ++i)
            if (m.alpha[i] > 1e-3 * c && m.alpha[i] < (1.0 - 1e-3) * c)
                CHECK(std::abs(decision_ocsvm(m, m.sv[i])) <= 1e-5);

        // Dual feasibility of the reported coefficients.
        double sum = 0.0;
        for (double a : m.alpha) {
            CHECK(a > 0.0);
            CHECK(a <= c + 1e-12);
            sum += a;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("solution matches the exhaustive QP oracle on small problems") {
    int compared = 0;
    for (uint64_t seed = 0; seed < 20; ++seed) {
        const Matrix X = oracle::gaussian_matrix(5, 3, seed * 13 + 2);
        const oracle::QpSolution want = oracle::ocsvm_qp(X, 0.2, 0.5);
        REQUIRE(want.found);

        const OcsvmModel m = train_ocsvm(X, 0.2, 0.5);
        std::vector<double> dense(5, 0.0);
        for (size_t s = 0; s < m.alpha.size(); ++s) dense[size_t(m.sv_index[s])] = m.alpha[s];

        for (size_t i = 0; i < 5; ++i) {
            INFO("seed " << seed << " alpha[" << i << "]");
            CHECK(std::abs(dense[i] - want.alpha[i]) <= 1e-5);
        }
        CHECK(std::abs(m.rho - want.rho) <= 1e-5);
        ++compared;
    }
    CHECK(compared == 20);
}

TEST_CASE("training-set outlier fraction respects nu") {
    for (double nu : {0.05, 0.1, 0.2}) {
        const Matrix X = oracle::gaussian_matrix(200, 10, 31);
        const OcsvmModel m = train_ocsvm(X, nu, default_gamma(X));
        int outliers = 0;
        for (const auto& x : X)
            if (decision_ocsvm(m, x) < 0.0) ++outliers;
        const double frac = outliers / 200.0;
        INFO("nu " << nu << " outlier fraction " << frac);
        CHECK(frac <= nu + 0.05);
        // sum alpha = 1 with alpha <= 1/(nu n) forces at least nu*n SVs.
        CHECK(double(m.sv.size()) >= nu * 200.0 - 1e-9);
    }
}

TEST_CASE("default RBF width from the feature variances") {
    // Feature 0 variance 1.6, feature 1 variance 0: mean 0.8, d = 2.
    const Matrix X = {{0.0, 0.0}, {2.0, 0.0}, {-2.0, 0.0}, {0.0, 0.0}, {0.0, 0.0}};
    CHECK(default_gamma(X) == 0.625);

    const Matrix constant(6, std::vector<double>{4.0, 4.0});
    CHECK(std::isfinite(default_gamma(constant)));
    CHECK(default_gamma(constant) > 0.0);
}

TEST_CASE("score is the negated decision value") {
    const Matrix X = oracle::gaussian_matrix(50, 4, 9);
    const OcsvmModel m = train_ocsvm(X, 0.1, 0.25);
    const std::vector<double> q = {0.3, -0.2, 0.8, 0.1};
    CHECK(score_ocsvm(m, q) == -decision_ocsvm(m, q));

    const std::vector<double> far = {40.0, 40.0, 40.0, 40.0};
    CHECK(anomalous_ocsvm(m, far));
    CHECK(decision_ocsvm(m, far) < 0.0);
    CHECK(!anomalous_ocsvm(m, X[0]));
}

TEST_CASE("training is deterministic") {
    const Matrix X = oracle::gaussian_matrix(60, 6, 17);
    const OcsvmModel a = train_ocsvm(X, 0.1, 0.2);
    const OcsvmModel b = train_ocsvm(X, 0.1, 0.2);
    CHECK(a == b);
}

TEST_CASE("model files round-trip bit-exactly") {
    const Matrix X = oracle::gaussian_matrix(40, 5, 23);
    const OcsvmModel m = train_ocsvm(X, 0.1, 0.3);
    test_support::TempDir tmp("ocsvm");
    save_ocsvm(m, tmp / "m.json");
    const OcsvmModel back = load_ocsvm(tmp / "m.json");
    CHECK(back == m);
    CHECK(decision_ocsvm(back, X[1]) == decision_ocsvm(m, X[1]));
}

TEST_CASE("input validation") {
    const Matrix tiny = oracle::gaussian_matrix(4, 2, 0);
    test_support::check_throws_with<TooFewPoints>([&] { train_ocsvm(tiny, 0.5, 0.5); }, "got 4");

    const Matrix X = oracle::gaussian_matrix(10, 2, 0);
    test_support::check_throws_with<ConfigError>([&] { train_ocsvm(X, 0.0, 0.5); }, "nu");
    test_support::check_throws_with<ConfigError>([&] { train_ocsvm(X, 1.5, 0.5); }, "nu");
    test_support::check_throws_with<ConfigError>([&] { train_ocsvm(X, 0.5, 0.0); }, "gamma");
    test_support::check_throws_with<ConfigError>([&] { train_ocsvm(X, 0.5, -1.0); }, "gamma");

    Matrix ragged = X;
    ragged[5].pop_back();
    CHECK_THROWS_AS(train_ocsvm(ragged, 0.5, 0.5), InvariantViolation);
}
