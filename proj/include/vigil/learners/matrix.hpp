#pragma once

#include <vector>

namespace vigil::learners {

// Row-major dataset: rows are points, columns are features. The learners
// are dimension-agnostic; the monitoring pipeline always passes 10-column
// z-scored feature rows.
using Matrix = std::vector<std::vector<double>>;

} // namespace vigil::learners
