#pragma once

// Reference benchmark cells: printed Pass@1 / Pass@5 percentages for
// n = 15 attempts. The success count c is implied by Pass@1.

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace am::testing {

struct TableCell {
  const char* where;  // table / case / column
  double pass1;
  double pass5;
};

inline const std::vector<TableCell>& reference_cells() {
  static const std::vector<TableCell> cells{
      {"main 7 qwen", 20.0, 73.6},         {"main 3 qwen", 46.7, 98.1},
      {"main 8 gpt5", 73.3, 100.0},        {"main 7 gpt4o-mini", 6.7, 33.3},
      {"main 8 gpt4o-mini", 40.0, 95.8},   {"main 9 gpt4o-mini", 26.7, 84.6},
      {"main 8 qwen", 13.3, 57.1},         {"main 10 qwen", 33.3, 91.6},
      {"main 10 glm", 53.3, 99.3},         {"main 9 qwen", 60.0, 99.8},
      {"main 13 glm", 6.7, 33.3},          {"main 1 gpt5", 100.0, 100.0},
      {"main 13 qwen", 0.0, 0.0},          {"compare 10 glm masa", 13.3, 57.1},
      {"compare 4 glm masa", 20.0, 73.6},  {"ablation 10 no-intent", 26.7, 84.6},
      {"ablation 12 no-cot", 20.0, 73.6},  {"ablation 5 no-intent", 46.7, 98.1},
  };
  return cells;
}

inline std::size_t implied_successes(double pass1, std::size_t n = 15) {
  return static_cast<std::size_t>(std::lround(pass1 / 100.0 * static_cast<double>(n)));
}

}  // namespace am::testing
