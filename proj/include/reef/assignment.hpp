#pragma once

#include <Eigen/Core>
#include <vector>

namespace reef {

struct Assignment {
  std::vector<int> row_to_col;  // -1 where the row is unassigned
  double cost = 0;

  std::vector<std::pair<int, int>> pairs() const;
};

// Rectangular linear assignment (Kuhn-Munkres with potentials). Assigns
// min(rows, cols) pairs minimizing the summed cost. Entries must be finite.
Assignment solve_assignment(const Eigen::MatrixXd& cost);

// Same, maximizing the summed score.
Assignment solve_assignment_max(const Eigen::MatrixXd& score);

}  // namespace reef
