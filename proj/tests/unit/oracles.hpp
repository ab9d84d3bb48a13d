#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "stepdeconv/kernels.hpp"
#include "stepdeconv/model.hpp"

namespace testing {

// min ||A b - y||^2 subject to |b_j| <= bound, by trying every assignment of
// each coordinate to {free, +bound, -bound} and keeping the best feasible one.
inline double box_ls_residual(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double bound) {
  const auto m = A.cols();
  std::size_t patterns = 1;
  for (Eigen::Index j = 0; j < m; ++j) patterns *= 3;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t p = 0; p < patterns; ++p) {
    std::vector<int> state(static_cast<std::size_t>(m));
    std::size_t code = p;
    std::vector<Eigen::Index> free;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      state[static_cast<std::size_t>(j)] = static_cast<int>(code % 3);
      code /= 3;
      if (state[static_cast<std::size_t>(j)] == 0) free.push_back(j);
      else b[j] = state[static_cast<std::size_t>(j)] == 1 ? bound : -bound;
    }
    const Eigen::VectorXd rhs = y - A * b;
    if (!free.empty()) {
      Eigen::MatrixXd af(A.rows(), static_cast<Eigen::Index>(free.size()));
      for (std::size_t a = 0; a < free.size(); ++a) af.col(static_cast<Eigen::Index>(a)) = A.col(free[a]);
      const Eigen::VectorXd z = af.householderQr().solve(rhs);
      if (z.cwiseAbs().maxCoeff() > bound) continue;
      for (std::size_t a = 0; a < free.size(); ++a) b[free[a]] = z[static_cast<Eigen::Index>(a)];
    }
    best = std::min(best, (A * b - y).squaredNorm());
  }
  return best;
}

struct GridOptimum {
  std::vector<double> taus;
  double rss = std::numeric_limits<double>::infinity();
};

// Brute force over every placement of k jumps on the equispaced grid
// t_g = x_1 + (g + 1/2)(x_n - x_1)/G. Heights by Householder QR on the
// partial-mass design; placements whose design is numerically rank
// deficient are skipped. rss is the mean squared residual.
inline GridOptimum exhaustive_grid_fit(const stepdeconv::Dataset& d, const stepdeconv::Kernel& k, std::size_t kk,
                                       std::size_t G, double bound) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const double lo = d.x.front(), hi = d.x.back();
  std::vector<double> grid(G);
  for (std::size_t g = 0; g < G; ++g) grid[g] = lo + (static_cast<double>(g) + 0.5) * (hi - lo) / static_cast<double>(G);
  const auto n = static_cast<Eigen::Index>(d.size());
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = d.y[static_cast<std::size_t>(i)];

  GridOptimum best;
  std::vector<std::size_t> idx(kk);
  for (std::size_t i = 0; i < kk; ++i) idx[i] = i;
  while (true) {
    std::vector<double> taus(kk);
    for (std::size_t i = 0; i < kk; ++i) taus[i] = grid[idx[i]];
    Eigen::MatrixXd A(n, static_cast<Eigen::Index>(kk + 1));
    for (Eigen::Index i = 0; i < n; ++i)
      for (std::size_t j = 0; j <= kk; ++j)
        A(i, static_cast<Eigen::Index>(j)) = stepdeconv::delta_phi(
            k, d.x[static_cast<std::size_t>(i)], j == 0 ? -inf : taus[j - 1], j == kk ? inf : taus[j]);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const auto sv = svd.singularValues();
    if (sv.minCoeff() > 1e-7 * sv.maxCoeff()) {
      const double rss = box_ls_residual(A, y, bound) / static_cast<double>(n);
      if (rss < best.rss) best = {taus, rss};
    }
    // Next combination in lexicographic order.
    std::size_t pos = kk;
    while (pos > 0 && idx[pos - 1] == G - kk + pos - 1) --pos;
    if (pos == 0) break;
    ++idx[pos - 1];
    for (std::size_t i = pos; i < kk; ++i) idx[i] = idx[i - 1] + 1;
  }
  return best;
}

}  // namespace testing
