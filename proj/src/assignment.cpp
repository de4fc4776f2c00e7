#include "reef/assignment.hpp"

#include <cmath>
#include <limits>

#include "reef/error.hpp"

namespace reef {

std::vector<std::pair<int, int>> Assignment::pairs() const {
  std::vector<std::pair<int, int>> out;
  for (int r = 0; r < static_cast<int>(row_to_col.size()); ++r)
    if (row_to_col[r] >= 0) out.emplace_back(r, row_to_col[r]);
  return out;
}

namespace {

// Shortest augmenting path with dual potentials for n <= m. Returns, for
// each row, the assigned column.
std::vector<int> hungarian_rows_le_cols(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      if (j1 == 0) throw InternalError("assignment solver failed to augment");
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j]) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace

Assignment solve_assignment(const Eigen::MatrixXd& cost) {
  Assignment result;
  const auto rows = cost.rows(), cols = cost.cols();
  result.row_to_col.assign(static_cast<std::size_t>(rows), -1);
  if (rows == 0 || cols == 0) return result;
  if (!cost.allFinite()) throw InternalError("assignment cost must be finite");

  if (rows <= cols) {
    result.row_to_col = hungarian_rows_le_cols(cost);
  } else {
    auto col_to_row = hungarian_rows_le_cols(cost.transpose());
    for (int c = 0; c < static_cast<int>(col_to_row.size()); ++c)
      result.row_to_col[col_to_row[c]] = c;
  }
  for (int r = 0; r < static_cast<int>(rows); ++r)
    if (result.row_to_col[r] >= 0) result.cost += cost(r, result.row_to_col[r]);
  return result;
}

Assignment solve_assignment_max(const Eigen::MatrixXd& score) {
  Assignment result = solve_assignment(-score);
  result.cost = -result.cost;
  return result;
}

}  // namespace reef
