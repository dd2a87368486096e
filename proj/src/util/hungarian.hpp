#pragma once

#include <cstddef>
#include <vector>

namespace am::util {

// Minimum-cost assignment on a rows x cols cost matrix (rows <= cols is
// not required; the matrix is padded internally). Returns, for each row,
// the assigned column or -1 when the row falls on padding.
std::vector<int> min_cost_assignment(const std::vector<std::vector<double>>& cost);

}  // namespace am::util
