#include "vigil/learners/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "vigil/parallel.hpp"

namespace vigil::learners {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

struct SplitCand {
    double gain = 0.0;
    int feature = -1;
    double split = 0.0;
    bool valid = false;
};

struct TreeGrower {
    const Matrix& X;
    // Per feature: (value, row) pairs sorted ascending by value then row.
    const std::vector<std::vector<std::pair<double, int>>>& cols;
    const std::vector<double>& g;
    const std::vector<double>& h;
    const GbtConfig& cfg;
    std::vector<char> mask; // in-node flags, valid only during a split search
    GbtModel::Tree tree;

    int grow(std::vector<int>& rows, int depth) {
        double G = 0.0, H = 0.0;
        for (int r : rows) {
            G += g[static_cast<size_t>(r)];
            H += h[static_cast<size_t>(r)];
        }

        const int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        SplitCand best;
        if (depth < cfg.max_depth && rows.size() >= 2) {
            for (int r : rows) mask[static_cast<size_t>(r)] = 1;
            const size_t n_features = X[0].size();
            std::vector<SplitCand> cand(n_features);
            parallel_for(static_cast<std::ptrdiff_t>(n_features), [&](std::ptrdiff_t jj) {
                const auto j = static_cast<size_t>(jj);
                const double lam = cfg.l2_lambda;
                const double parent = G * G / (H + lam);
                double GL = 0.0, HL = 0.0;
                double prev = 0.0;
                bool have_prev = false;
                SplitCand fb;
                for (const auto& [v, r] : cols[j]) {
                    if (!mask[static_cast<size_t>(r)]) continue;
                    if (have_prev && v > prev) {
                        const double GR = G - GL, HR = H - HL;
                        const double gain =
                            0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent);
                        if (gain > fb.gain)
                            fb = SplitCand{gain, static_cast<int>(j), (prev + v) / 2.0, true};
                    }
                    GL += g[static_cast<size_t>(r)];
                    HL += h[static_cast<size_t>(r)];
                    prev = v;
                    have_prev = true;
                }
                cand[j] = fb;
            });
            for (int r : rows) mask[static_cast<size_t>(r)] = 0;
            // Ascending feature order with a strict comparison keeps ties on
            // the first feature and the first cut position.
            for (const auto& c : cand)
                if (c.valid && c.gain > best.gain) best = c;
        }

        if (!best.valid || !(best.gain > 0.0)) {
            tree.nodes[static_cast<size_t>(id)].weight = -G / (H + cfg.l2_lambda);
            return id;
        }

        std::vector<int> left_rows, right_rows;
        left_rows.reserve(rows.size());
        right_rows.reserve(rows.size());
        for (int r : rows) {
            if (X[static_cast<size_t>(r)][static_cast<size_t>(best.feature)] < best.split)
                left_rows.push_back(r);
            else
                right_rows.push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        const int left = grow(left_rows, depth + 1);
        const int right = grow(right_rows, depth + 1);
        auto& node = tree.nodes[static_cast<size_t>(id)];
        node.feature = best.feature;
        node.split = best.split;
        node.left = left;
        node.right = right;
        return id;
    }
};

} // namespace

GbtModel train_gbt(const Matrix& X, const std::vector<int>& y, const GbtConfig& config) {
    const size_t n = X.size();
    if (n < 20)
        throw TooFewPoints("gradient boosting needs at least 20 rows, got " + std::to_string(n));
    const size_t d = X[0].size();
    for (const auto& row : X)
        if (row.size() != d) throw InvariantViolation("ragged feature matrix");
    if (y.size() != n) throw InvariantViolation("label count does not match row count");
    size_t pos = 0;
    for (int label : y) {
        if (label != 0 && label != 1) throw InvariantViolation("labels must be 0 or 1");
        pos += static_cast<size_t>(label);
    }
    if (pos == 0 || pos == n)
        throw DegenerateLabels("training labels are all " + std::to_string(y[0]));
    if (config.n_rounds < 1 || config.max_depth < 0)
        throw ConfigError("n_rounds must be >= 1 and max_depth >= 0");
    if (!(config.learning_rate > 0.0) || !(config.l2_lambda >= 0.0))
        throw ConfigError("learning_rate must be positive and l2_lambda non-negative");

    std::vector<std::vector<std::pair<double, int>>> cols(d);
    parallel_for(static_cast<std::ptrdiff_t>(d), [&](std::ptrdiff_t jj) {
        const auto j = static_cast<size_t>(jj);
        auto& col = cols[j];
        col.resize(n);
        for (size_t i = 0; i < n; ++i) col[i] = {X[i][j], static_cast<int>(i)};
        std::sort(col.begin(), col.end());
    });

    GbtModel model;
    model.config = config;
    model.n_features = static_cast<int>(d);
    model.trees.reserve(static_cast<size_t>(config.n_rounds));
    model.train_logloss.reserve(static_cast<size_t>(config.n_rounds));

    std::vector<double> margin(n, model.base_score);
    std::vector<double> g(n), h(n);
    for (int round = 0; round < config.n_rounds; ++round) {
        for (size_t i = 0; i < n; ++i) {
            const double p = sigmoid(margin[i]);
            g[i] = p - static_cast<double>(y[i]);
            h[i] = p * (1.0 - p);
        }

        TreeGrower grower{X, cols, g, h, config, std::vector<char>(n, 0), {}};
        std::vector<int> all(n);
        for (size_t i = 0; i < n; ++i) all[i] = static_cast<int>(i);
        grower.grow(all, 0);
        model.trees.push_back(std::move(grower.tree));

        const auto& tree = model.trees.back();
        double loss = 0.0;
        for (size_t i = 0; i < n; ++i) {
            margin[i] += config.learning_rate * tree_output_gbt(tree, X[i]);
            double p = sigmoid(margin[i]);
            p = std::clamp(p, 1e-12, 1.0 - 1e-12);
            loss -= y[i] == 1 ? std::log(p) : std::log(1.0 - p);
        }
        model.train_logloss.push_back(loss / static_cast<double>(n));
    }
    return model;
}

double tree_output_gbt(const GbtModel::Tree& tree, const std::vector<double>& x) {
    int id = 0;
    while (tree.nodes[static_cast<size_t>(id)].feature >= 0) {
        const auto& node = tree.nodes[static_cast<size_t>(id)];
        id = x[static_cast<size_t>(node.feature)] < node.split ? node.left : node.right;
    }
    return tree.nodes[static_cast<size_t>(id)].weight;
}

double predict_gbt(const GbtModel& m, const std::vector<double>& x) {
    if (static_cast<int>(x.size()) != m.n_features)
        throw InvariantViolation("feature count mismatch at prediction time");
    double margin = m.base_score;
    for (const auto& tree : m.trees) margin += m.config.learning_rate * tree_output_gbt(tree, x);
    return sigmoid(margin);
}

} // namespace vigil::learners
