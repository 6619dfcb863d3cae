#include "vigil/learners/iforest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vigil/parallel.hpp"
#include "vigil/rng.hpp"

namespace vigil::learners {

namespace {

constexpr double kEulerMascheroni = 0.5772156649015328606;

double harmonic(int m) {
    if (m <= 0) return 0.0;
    if (m < 1024) {
        double h = 0.0;
        for (int i = 1; i <= m; ++i) h += 1.0 / static_cast<double>(i);
        return h;
    }
    return std::log(static_cast<double>(m)) + kEulerMascheroni + 1.0 / (2.0 * m);
}

double quantile_index_value(std::vector<double> values, double q) {
    std::sort(values.begin(), values.end());
    long idx = static_cast<long>(std::ceil(q * static_cast<double>(values.size()))) - 1;
    if (idx < 0) idx = 0;
    if (idx >= static_cast<long>(values.size())) idx = static_cast<long>(values.size()) - 1;
    return values[static_cast<size_t>(idx)];
}

struct TreeBuilder {
    const Matrix& X;
    int height_cap;
    Rng& rng;
    IsoForestModel::Tree tree;

    int build(std::vector<int> idx, int depth) {
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes[node_id].size = static_cast<int>(idx.size());
        if (depth >= height_cap || idx.size() <= 1) return node_id;

        const size_t d = X[0].size();
        std::vector<int> cands;
        std::vector<double> los(d), his(d);
        for (size_t f = 0; f < d; ++f) {
            double lo = X[idx[0]][f], hi = lo;
            for (int i : idx) {
                lo = std::min(lo, X[i][f]);
                hi = std::max(hi, X[i][f]);
            }
            los[f] = lo;
            his[f] = hi;
            if (hi > lo) cands.push_back(static_cast<int>(f));
        }
        if (cands.empty()) return node_id; // all duplicates

        const int f = cands[rng.uniform_int(cands.size())];
        const double split = rng.uniform(los[f], his[f]);
        std::vector<int> left, right;
        for (int i : idx)
            if (X[i][f] < split) left.push_back(i);
            else right.push_back(i);
        idx.clear();
        idx.shrink_to_fit();

        tree.nodes[node_id].feature = f;
        tree.nodes[node_id].split = split;
        const int l = build(std::move(left), depth + 1);
        tree.nodes[node_id].left = l;
        const int r = build(std::move(right), depth + 1);
        tree.nodes[node_id].right = r;
        return node_id;
    }
};

} // namespace

double average_path_length(int m) {
    if (m <= 1) return 0.0;
    return 2.0 * harmonic(m - 1) - 2.0 * static_cast<double>(m - 1) / static_cast<double>(m);
}

IsoForestModel train_iforest(const Matrix& X, int n_trees, int psi, double nu, uint64_t seed) {
    const size_t n = X.size();
    if (n < 5) throw TooFewPoints("isolation forest needs at least 5 points");
    if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
    if (!(nu > 0.0 && nu < 1.0)) throw ConfigError("nu must be in (0,1)");
    for (const auto& row : X)
        if (row.size() != X[0].size()) throw InvariantViolation("ragged feature matrix");

    IsoForestModel m;
    m.psi = std::min<int>(std::max(psi, 2), static_cast<int>(n));
    m.n_trees = n_trees;
    int cap = 0;
    while ((1 << cap) < m.psi) ++cap; // ceil(log2 psi)

    m.trees.resize(static_cast<size_t>(n_trees));
    // Per-tree derived streams keep the forest identical for any worker count.
    parallel_for(n_trees, [&](std::ptrdiff_t t) {
        Rng rng = Rng::derive(seed, {Rng::label("iforest"), static_cast<uint64_t>(t)});
        std::vector<int> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        rng.partial_shuffle(idx.data(), n, static_cast<size_t>(m.psi));
        idx.resize(static_cast<size_t>(m.psi));
        TreeBuilder builder{X, cap, rng, {}};
        builder.build(idx, 0);
        m.trees[static_cast<size_t>(t)] = std::move(builder.tree);
    });

    std::vector<double> scores(n);
    parallel_for(static_cast<std::ptrdiff_t>(n), [&](std::ptrdiff_t i) {
        scores[static_cast<size_t>(i)] = score_iforest(m, X[static_cast<size_t>(i)]);
    });
    m.score_threshold = quantile_index_value(scores, 1.0 - nu);
    return m;
}

double path_length_iforest(const IsoForestModel::Tree& tree, const std::vector<double>& x) {
    int node = 0;
    double depth = 0.0;
    for (;;) {
        const auto& nd = tree.nodes[static_cast<size_t>(node)];
        if (nd.feature < 0) return depth + average_path_length(nd.size);
        node = x[static_cast<size_t>(nd.feature)] < nd.split ? nd.left : nd.right;
        depth += 1.0;
    }
}

double score_iforest(const IsoForestModel& m, const std::vector<double>& x) {
    double sum = 0.0;
    for (const auto& t : m.trees) sum += path_length_iforest(t, x);
    const double eh = sum / static_cast<double>(m.trees.size());
    return std::exp2(-eh / average_path_length(m.psi));
}

bool anomalous_iforest(const IsoForestModel& m, const std::vector<double>& x) {
    return score_iforest(m, x) > m.score_threshold;
}

} // namespace vigil::learners
