#pragma once

#include <cstdint>
#include <vector>

#include "vigil/errors.hpp"
#include "vigil/learners/matrix.hpp"

namespace vigil::learners {

// Isolation forest: random partition trees over psi-point subsamples.
// Anomaly score s(x) = 2^(-E[h(x)]/c(psi)) where h is the path length
// (capped leaves add c(leaf size)) and c(m) = 2*H(m-1) - 2*(m-1)/m is the
// average BST path length, c(1) = c(0) = 0.
struct IsoForestModel {
    struct Node {
        int feature = -1;   // -1 marks a leaf
        double split = 0.0; // left: x[feature] < split
        int left = -1;
        int right = -1;
        int size = 0;       // points that reached this node during training
    };
    struct Tree {
        std::vector<Node> nodes; // node 0 is the root
    };

    std::vector<Tree> trees;
    int psi = 0;
    int n_trees = 0;
    double score_threshold = 0.0; // anomalous iff score > threshold
};

// Exact harmonic sum below 1024 (so c(2) = 1 exactly), Euler-Mascheroni
// approximation above.
double average_path_length(int m);

// Grows n_trees trees, each on a psi-subsample (without replacement) of X,
// height-capped at ceil(log2 psi). Splits pick a uniform feature among
// those with spread, then a uniform cut inside its range. The threshold is
// the (1-nu) quantile of the training scores. Deterministic per seed.
// Requires n >= 5 (TooFewPoints).
IsoForestModel train_iforest(const Matrix& X, int n_trees, int psi, double nu, uint64_t seed);

double path_length_iforest(const IsoForestModel::Tree& tree, const std::vector<double>& x);
double score_iforest(const IsoForestModel& m, const std::vector<double>& x);
bool anomalous_iforest(const IsoForestModel& m, const std::vector<double>& x);

} // namespace vigil::learners
