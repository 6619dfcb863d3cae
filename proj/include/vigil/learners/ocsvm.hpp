#pragma once

#include <vector>

#include "vigil/errors.hpp"
#include "vigil/learners/matrix.hpp"

namespace vigil::learners {

// One-class SVM with RBF kernel, trained in the dual:
//   min 1/2 a'Qa  s.t.  0 <= a_i <= 1/(nu*n), sum a_i = 1,
// where Q_ij = exp(-gamma*|x_i - x_j|^2). Decision value
// d(x) = sum_i a_i K(x, x_i) - rho; a point is anomalous iff d(x) < 0;
// the anomaly score is -d(x).
struct OcsvmModel {
    Matrix sv;                   // support vectors (training rows with a_i > 0)
    std::vector<double> alpha;   // matching dual coefficients
    std::vector<int> sv_index;   // row index of each SV in the training set
    double rho = 0.0;
    double gamma = 0.0;
    double nu = 0.0;
    int n_train = 0;
    int iterations = 0;          // SMO pair updates until convergence
    double kkt_residual = 0.0;   // final maximal-violating-pair gap
};

// Default RBF width: 1 / (n_features * mean per-feature variance).
double default_gamma(const Matrix& X);

// Solves the dual by maximal-violating-pair SMO to KKT tolerance 1e-6.
// rho is the mean gradient over free support vectors (midpoint of the
// feasible interval when none are free). Requires n >= 5 (TooFewPoints),
// 0 < nu <= 1 and gamma > 0 (ConfigError); raises ConvergenceFailure with
// the residual if the iteration cap is hit.
OcsvmModel train_ocsvm(const Matrix& X, double nu, double gamma);

double decision_ocsvm(const OcsvmModel& m, const std::vector<double>& x);
double score_ocsvm(const OcsvmModel& m, const std::vector<double>& x); // -d(x)
bool anomalous_ocsvm(const OcsvmModel& m, const std::vector<double>& x);

} // namespace vigil::learners
