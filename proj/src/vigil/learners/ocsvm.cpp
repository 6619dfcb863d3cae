#include "vigil/learners/ocsvm.hpp"

#include <algorithm>
#include <cmath>

#include "vigil/parallel.hpp"

namespace vigil::learners {

namespace {

constexpr double kKktTol = 1e-6;
constexpr long kMaxIterations = 2000000;

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t j = 0; j < a.size(); ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

// rho sits where the decision value of the margin is zero: the mean
// gradient over free support vectors, or the midpoint of the feasible
// interval [max grad at bound C, min grad at bound 0] when none are free.
double solve_rho(const std::vector<double>& alpha, const std::vector<double>& grad, double C) {
    double free_sum = 0.0;
    size_t free_n = 0;
    double lo = -HUGE_VAL, hi = HUGE_VAL;
    for (size_t i = 0; i < alpha.size(); ++i) {
        if (alpha[i] > 0.0 && alpha[i] < C) {
            free_sum += grad[i];
            ++free_n;
        } else if (alpha[i] >= C) {
            lo = std::max(lo, grad[i]);
        } else {
            hi = std::min(hi, grad[i]);
        }
    }
    if (free_n > 0) return free_sum / static_cast<double>(free_n);
    if (std::isfinite(lo) && std::isfinite(hi)) return (lo + hi) / 2.0;
    return std::isfinite(lo) ? lo : hi;
}

} // namespace

double default_gamma(const Matrix& X) {
    const size_t n = X.size(), d = X[0].size();
    double var_sum = 0.0;
    for (size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (size_t i = 0; i < n; ++i) mean += X[i][j];
        mean /= static_cast<double>(n);
        double sq = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double dv = X[i][j] - mean;
            sq += dv * dv;
        }
        var_sum += sq / static_cast<double>(n);
    }
    const double mean_var = var_sum / static_cast<double>(d);
    return 1.0 / (static_cast<double>(d) * std::max(mean_var, 1e-12));
}

OcsvmModel train_ocsvm(const Matrix& X, double nu, double gamma) {
    const size_t n = X.size();
    if (n < 5) throw TooFewPoints("one-class SVM needs at least 5 points, got " + std::to_string(n));
    if (!(nu > 0.0 && nu <= 1.0)) throw ConfigError("nu must be in (0,1]");
    if (!(gamma > 0.0)) throw ConfigError("gamma must be positive");
    for (const auto& row : X)
        if (row.size() != X[0].size()) throw InvariantViolation("ragged feature matrix");

    const double C = 1.0 / (nu * static_cast<double>(n));

    std::vector<std::vector<double>> Q(n, std::vector<double>(n));
    parallel_for(static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t i) {
        for (size_t j = 0; j < n; ++j)
            Q[static_cast<size_t>(i)][j] = std::exp(-gamma * sq_dist(X[static_cast<size_t>(i)], X[j]));
    });

    // Feasible start: the first floor(nu*n) coefficients at the bound, the
    // next one takes the remainder so the sum is exactly 1.
    std::vector<double> alpha(n, 0.0);
    const size_t m = static_cast<size_t>(nu * static_cast<double>(n));
    for (size_t i = 0; i < m && i < n; ++i) alpha[i] = C;
    if (m < n) alpha[m] = 1.0 - static_cast<double>(m) * C;

    std::vector<double> grad(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        double g = 0.0;
        for (size_t j = 0; j < n; ++j) g += Q[i][j] * alpha[j];
        grad[i] = g;
    }

    // Maximal-violating-pair SMO on the pair constraint sum(alpha) = 1:
    // move mass from the largest gradient (among alpha > 0) to the
    // smallest (among alpha < C) until the pair gap closes.
    long iter = 0;
    double gap = 0.0;
    for (;; ++iter) {
        int up = -1, dn = -1;
        for (size_t i = 0; i < n; ++i) {
            if (alpha[i] < C && (up < 0 || grad[i] < grad[static_cast<size_t>(up)]))
                up = static_cast<int>(i);
            if (alpha[i] > 0.0 && (dn < 0 || grad[i] > grad[static_cast<size_t>(dn)]))
                dn = static_cast<int>(i);
        }
        if (up < 0 || dn < 0) { // fully bounded problem (nu = 1)
            gap = 0.0;
            break;
        }
        gap = grad[static_cast<size_t>(dn)] - grad[static_cast<size_t>(up)];
        if (gap <= kKktTol) break;
        if (iter >= kMaxIterations)
            throw ConvergenceFailure("one-class SVM SMO hit the iteration cap with KKT residual " +
                                     std::to_string(gap));

        const size_t i = static_cast<size_t>(up), j = static_cast<size_t>(dn);
        const double eta = Q[i][i] + Q[j][j] - 2.0 * Q[i][j];
        const double room_up = C - alpha[i];
        const double room_dn = alpha[j];
        double delta = eta > 1e-15 ? gap / eta : HUGE_VAL;
        delta = std::min(delta, std::min(room_up, room_dn));

        // Hit bounds exactly so the support-vector sets stay crisp.
        if (delta == room_up) alpha[i] = C;
        else alpha[i] += delta;
        if (delta == room_dn) alpha[j] = 0.0;
        else alpha[j] -= delta;

        for (size_t k = 0; k < n; ++k) grad[k] += delta * (Q[k][i] - Q[k][j]);
    }

    OcsvmModel model;
    model.gamma = gamma;
    model.nu = nu;
    model.n_train = static_cast<int>(n);
    model.iterations = static_cast<int>(iter);
    model.kkt_residual = gap;
    model.rho = solve_rho(alpha, grad, C);
    for (size_t i = 0; i < n; ++i) {
        if (alpha[i] > 0.0) {
            model.sv.push_back(X[i]);
            model.alpha.push_back(alpha[i]);
            model.sv_index.push_back(static_cast<int>(i));
        }
    }
    return model;
}

double decision_ocsvm(const OcsvmModel& m, const std::vector<double>& x) {
    double s = 0.0;
    for (size_t i = 0; i < m.sv.size(); ++i)
        s += m.alpha[i] * std::exp(-m.gamma * sq_dist(x, m.sv[i]));
    return s - m.rho;
}

double score_ocsvm(const OcsvmModel& m, const std::vector<double>& x) {
    return -decision_ocsvm(m, x);
}

bool anomalous_ocsvm(const OcsvmModel& m, const std::vector<double>& x) {
    return decision_ocsvm(m, x) < 0.0;
}

} // namespace vigil::learners
