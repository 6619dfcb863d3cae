#pragma once

#include <vector>

#include "vigil/errors.hpp"
#include "vigil/learners/matrix.hpp"

namespace vigil::learners {

// Local Outlier Factor. k-dist(a) is the k-th smallest distance from a to
// the other points; the neighborhood is every point within k-dist
// (ties included). reach-dist_k(a,b) = max(k-dist(b), d(a,b)),
// lrd(a) = 1/mean reach-dist over the neighborhood (1e12 when the mean is
// zero, so duplicated sets land at LOF exactly 1), and
// LOF(a) = mean over neighbors b of lrd(b)/lrd(a).
struct LofModel {
    Matrix points;
    int k = 0;
    double lof_threshold = 0.0;     // anomalous iff LOF > threshold
    std::vector<double> kdist;      // leave-self-out k-dist per training point
    std::vector<double> lrd;        // leave-self-out lrd per training point
    std::vector<double> train_lof;  // leave-self-out LOF per training point
};

// Requires n >= k+1 and k >= 1 (TooFewPoints). Training LOF values are
// leave-self-out; the threshold is their (1-nu) quantile. All neighbor
// sums run in ascending point-index order, so values are reproducible to
// the last bit.
LofModel train_lof(const Matrix& X, int k, double nu);

inline int default_lof_k(size_t n) { return static_cast<int>(n) - 1 < 10 ? static_cast<int>(n) - 1 : 10; }

// LOF of a query point against the training set (the query is not part of
// the neighborhood graph).
double score_lof(const LofModel& m, const std::vector<double>& x);
bool anomalous_lof(const LofModel& m, const std::vector<double>& x);

} // namespace vigil::learners
