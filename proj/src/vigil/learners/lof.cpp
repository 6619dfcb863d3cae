#include "vigil/learners/lof.hpp"

#include <algorithm>
#include <cmath>

#include "vigil/parallel.hpp"

namespace vigil::learners {

namespace {

constexpr double kDegenerateLrd = 1e12; // 1/epsilon, epsilon = 1e-12

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t j = 0; j < a.size(); ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return std::sqrt(s);
}

double quantile_index_value(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    long idx = static_cast<long>(std::ceil(q * n)) - 1;
    if (idx < 0) idx = 0;
    if (idx >= static_cast<long>(values.size())) idx = static_cast<long>(values.size()) - 1;
    return values[static_cast<size_t>(idx)];
}

} // namespace

LofModel train_lof(const Matrix& X, int k, double nu) {
    const size_t n = X.size();
    if (k < 1) throw TooFewPoints("LOF needs k >= 1");
    if (n < static_cast<size_t>(k) + 1)
        throw TooFewPoints("LOF needs at least k+1 points, got " + std::to_string(n));
    if (!(nu > 0.0 && nu < 1.0)) throw ConfigError("nu must be in (0,1)");
    for (const auto& row : X)
        if (row.size() != X[0].size()) throw InvariantViolation("ragged feature matrix");

    LofModel m;
    m.points = X;
    m.k = k;
    m.kdist.resize(n);
    m.lrd.resize(n);
    m.train_lof.resize(n);

    std::vector<std::vector<double>> D(n, std::vector<double>(n, 0.0));
    parallel_for(static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t a) {
        for (size_t b = 0; b < n; ++b)
            D[a][b] = dist(X[static_cast<size_t>(a)], X[b]);
    });

    // Leave-self-out k-dist and ties-inclusive neighborhoods.
    std::vector<std::vector<int>> nbrs(n);
    for (size_t a = 0; a < n; ++a) {
        std::vector<double> ds;
        ds.reserve(n - 1);
        for (size_t b = 0; b < n; ++b)
            if (b != a) ds.push_back(D[a][b]);
        std::nth_element(ds.begin(), ds.begin() + (k - 1), ds.end());
        m.kdist[a] = ds[static_cast<size_t>(k - 1)];
        for (size_t b = 0; b < n; ++b)
            if (b != a && D[a][b] <= m.kdist[a]) nbrs[a].push_back(static_cast<int>(b));
    }

    // lrd, then LOF, both summed in ascending neighbor-index order so the
    // values are bit-reproducible (and the oracle can match them exactly).
    for (size_t a = 0; a < n; ++a) {
        double reach = 0.0;
        for (int b : nbrs[a]) reach += std::max(m.kdist[static_cast<size_t>(b)], D[a][static_cast<size_t>(b)]);
        m.lrd[a] = reach == 0.0 ? kDegenerateLrd
                                : 1.0 / (reach / static_cast<double>(nbrs[a].size()));
    }
    for (size_t a = 0; a < n; ++a) {
        double acc = 0.0;
        for (int b : nbrs[a]) acc += m.lrd[static_cast<size_t>(b)] / m.lrd[a];
        m.train_lof[a] = acc / static_cast<double>(nbrs[a].size());
    }

    m.lof_threshold = quantile_index_value(m.train_lof, 1.0 - nu);
    return m;
}

double score_lof(const LofModel& m, const std::vector<double>& x) {
    const size_t n = m.points.size();
    if (x.size() != m.points[0].size()) throw InvariantViolation("query dimension mismatch");
    std::vector<double> dx(n);
    for (size_t b = 0; b < n; ++b) dx[b] = dist(x, m.points[b]);

    std::vector<double> ds = dx;
    std::nth_element(ds.begin(), ds.begin() + (m.k - 1), ds.end());
    const double kdist_x = ds[static_cast<size_t>(m.k - 1)];

    double reach = 0.0;
    size_t count = 0;
    for (size_t b = 0; b < n; ++b)
        if (dx[b] <= kdist_x) {
            reach += std::max(m.kdist[b], dx[b]);
            ++count;
        }
    const double lrd_x =
        reach == 0.0 ? kDegenerateLrd : 1.0 / (reach / static_cast<double>(count));

    double acc = 0.0;
    for (size_t b = 0; b < n; ++b)
        if (dx[b] <= kdist_x) acc += m.lrd[b] / lrd_x;
    return acc / static_cast<double>(count);
}

bool anomalous_lof(const LofModel& m, const std::vector<double>& x) {
    return score_lof(m, x) > m.lof_threshold;
}

} // namespace vigil::learners
