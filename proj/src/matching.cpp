#include "allocsim/matching.hpp"

#include "allocsim/error.hpp"

#include <functional>
#include <string>

namespace allocsim {

Assignment brute_force_matching(const WeightMatrix& w) {
  if (w.rows() > 8)
    throw Error(ErrorCode::TooLarge,
                "brute force matching supports at most 8 rows, got " + std::to_string(w.rows()));
  const Eigen::Index rows = w.rows();
  const Eigen::Index cols = w.cols();
  std::vector<char> used(static_cast<std::size_t>(cols), 0);
  Assignment current, best;
  double best_total = 0.0;

  std::function<void(Eigen::Index, double)> search = [&](Eigen::Index r, double total) {
    if (r == rows) {
      if (total > best_total) {
        best_total = total;
        best = current;
      }
      return;
    }
    search(r + 1, total);  // row r unmatched
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (used[c] || !admissible(w(r, c))) continue;
      used[c] = 1;
      current.emplace_back(r, c);
      search(r + 1, total + w(r, c));
      current.pop_back();
      used[c] = 0;
    }
  };
  search(0, 0.0);
  return best;
}

Assignment greedy_matching(const WeightMatrix& w) {
  std::vector<char> used(static_cast<std::size_t>(w.cols()), 0);
  Assignment out;
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    Eigen::Index pick = -1;
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      if (used[c] || !admissible(w(r, c))) continue;
      if (pick < 0 || w(r, c) > w(r, pick)) pick = c;
    }
    if (pick >= 0) {
      used[pick] = 1;
      out.emplace_back(r, pick);
    }
  }
  return out;
}

}  // namespace allocsim
