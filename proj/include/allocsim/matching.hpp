#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

namespace allocsim {

/// Weight matrix for a bipartite assignment: rows are donors, columns are
/// candidate patients. Forbidden edges hold -infinity. Only strictly positive
/// weights are admissible; anything else is never matched.
template <typename Scalar>
using WeightMatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using WeightMatrix = WeightMatrixT<double>;

template <typename Scalar = double>
constexpr Scalar forbidden() {
  return -std::numeric_limits<Scalar>::infinity();
}

template <typename Scalar>
constexpr bool admissible(Scalar w) {
  return w > Scalar(0) && w < std::numeric_limits<Scalar>::infinity();
}

using Assignment = std::vector<std::pair<Eigen::Index, Eigen::Index>>;  // (row, col), sorted by row

template <typename Derived>
typename Derived::Scalar matching_weight(const Eigen::MatrixBase<Derived>& w, const Assignment& m) {
  typename Derived::Scalar total(0);
  for (const auto& [r, c] : m) total += w(r, c);
  return total;
}

namespace detail {

// Shortest-augmenting-path Hungarian algorithm with potentials, minimizing
// cost over an n x m matrix with n <= m. Returns the column of each row.
template <typename Scalar>
std::vector<Eigen::Index> hungarian_min(const WeightMatrixT<Scalar>& cost) {
  const Eigen::Index n = cost.rows();
  const Eigen::Index m = cost.cols();
  const Scalar inf = std::numeric_limits<Scalar>::infinity();
  // 1-based arrays; index 0 is the virtual root.
  std::vector<Scalar> u(n + 1, Scalar(0)), v(m + 1, Scalar(0));
  std::vector<Eigen::Index> p(m + 1, 0), way(m + 1, 0);
  for (Eigen::Index i = 1; i <= n; ++i) {
    p[0] = i;
    Eigen::Index j0 = 0;
    std::vector<Scalar> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const Eigen::Index i0 = p[j0];
      Scalar delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const Scalar cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= m; ++j) {
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
      const Eigen::Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Eigen::Index> row_to_col(n, -1);
  for (Eigen::Index j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace detail

/// Exact maximum-weight bipartite matching (Kuhn-Munkres, O(n^2 m)).
/// Inadmissible edges are treated as gain 0 during the solve and dropped from
/// the result, which makes "leave unmatched" free for every row.
template <typename Derived>
Assignment max_weight_matching(const Eigen::MatrixBase<Derived>& w) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index rows = w.rows();
  const Eigen::Index cols = w.cols();
  if (rows == 0 || cols == 0) return {};
  // Pad with zero-gain dummy columns so every row can be assigned.
  const Eigen::Index width = std::max(rows, cols);
  WeightMatrixT<Scalar> cost = WeightMatrixT<Scalar>::Zero(rows, width);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      if (admissible(w(r, c))) cost(r, c) = -w(r, c);
  const auto row_to_col = detail::hungarian_min<Scalar>(cost);
  Assignment out;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index c = row_to_col[r];
    if (c >= 0 && c < cols && admissible(w(r, c))) out.emplace_back(r, c);
  }
  return out;
}

/// Exhaustive search over all matchings; throws Error(TooLarge) beyond 8 rows.
Assignment brute_force_matching(const WeightMatrix& w);

/// Rows in order, each taking its best remaining admissible column.
/// Ties go to the lowest column index.
Assignment greedy_matching(const WeightMatrix& w);

}  // namespace allocsim
