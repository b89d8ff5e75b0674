#pragma once

#include "aploc/types.hpp"

#include <vector>

namespace aploc {

/// Minimum-cost perfect assignment of the rows of a square cost matrix to
/// its columns (Hungarian algorithm, O(n^3)). Returns the assigned column
/// per row.
std::vector<int> min_cost_assignment(const Matrix& cost);

}  // namespace aploc
