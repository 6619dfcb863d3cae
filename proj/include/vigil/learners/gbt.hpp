#pragma once

#include <vector>

#include "vigil/errors.hpp"
#include "vigil/learners/matrix.hpp"

namespace vigil::learners {

// Gradient-boosted trees for binary classification with second-order
// logistic-loss statistics: g = p - y, h = p(1-p), leaf weight
// w = -G/(H + lambda), split gain
// 1/2 * [G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)].
// Prediction = sigmoid(base_score + learning_rate * sum of tree outputs).
struct GbtConfig {
    int n_rounds = 100;
    int max_depth = 3;
    double learning_rate = 0.1;
    double l2_lambda = 1.0;
};

struct GbtModel {
    struct Node {
        int feature = -1;   // -1 marks a leaf
        double split = 0.0; // left: x[feature] < split
        int left = -1;
        int right = -1;
        double weight = 0.0; // leaf output before learning_rate
    };
    struct Tree {
        std::vector<Node> nodes; // node 0 is the root
    };

    std::vector<Tree> trees;
    GbtConfig config;
    double base_score = 0.0; // initial log-odds, fixed at 0
    int n_features = 0;
    std::vector<double> train_logloss; // after each round; non-increasing
};

// Exact greedy split search over presorted feature columns; candidate cuts
// are midpoints between distinct consecutive values, ties broken by first
// feature then first position (strictly greater gain wins). Requires both
// labels present (DegenerateLabels) and n >= 20 (TooFewPoints).
GbtModel train_gbt(const Matrix& X, const std::vector<int>& y, const GbtConfig& config = {});

double tree_output_gbt(const GbtModel::Tree& tree, const std::vector<double>& x);
double predict_gbt(const GbtModel& m, const std::vector<double>& x); // P(label 1)

} // namespace vigil::learners
