#pragma once

// Brute-force reference solvers, written independently of src/solver.cpp.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

struct Minimum {
  Eigen::VectorXd w;
  double objective = std::numeric_limits<double>::infinity();
};

/// Exact minimum of ||A w - b||^2 over the unit simplex by enumerating
/// every support: on a support S the minimizer of the equality-constrained
/// problem solves the KKT system [2 A_S'A_S, 1; 1', 0] [w; mu] = [2 A_S'b; 1].
/// Candidates with a negative entry are infeasible and skipped; the global
/// minimum lies on some support, so the best feasible candidate is it.
inline Minimum simplex_by_supports(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  const int j = static_cast<int>(a.cols());
  Minimum best;
  for (int mask = 1; mask < (1 << j); ++mask) {
    std::vector<int> s;
    for (int i = 0; i < j; ++i)
      if (mask & (1 << i)) s.push_back(i);
    const int n = static_cast<int>(s.size());
    Eigen::MatrixXd as(a.rows(), n);
    for (int i = 0; i < n; ++i) as.col(i) = a.col(s[i]);
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + 1, n + 1);
    kkt.topLeftCorner(n, n) = 2.0 * as.transpose() * as;
    kkt.topRightCorner(n, 1).setOnes();
    kkt.bottomLeftCorner(1, n).setOnes();
    Eigen::VectorXd rhs(n + 1);
    rhs.head(n) = 2.0 * as.transpose() * b;
    rhs(n) = 1.0;
    Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    if ((kkt * sol - rhs).norm() > 1e-8 * (1.0 + rhs.norm())) continue;
    Eigen::VectorXd ws = sol.head(n);
    if (ws.minCoeff() < -1e-12) continue;
    Eigen::VectorXd w = Eigen::VectorXd::Zero(j);
    for (int i = 0; i < n; ++i) w(s[i]) = std::max(0.0, ws(i));
    w /= w.sum();
    const double f = (a * w - b).squaredNorm();
    if (f < best.objective) best = {w, f};
  }
  return best;
}

/// Grid minimum over the simplex with the given number of steps per unit.
/// Mass starts on the last column; moving m steps to column i adds
/// m * h * (a_i - a_last) to the residual. The outer coordinates are
/// enumerated, and along the innermost one the squared residual is a convex
/// quadratic in m, so its integer minimum sits at the floor or ceiling of
/// the clamped vertex.
inline double simplex_grid(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, int steps) {
  const int j = static_cast<int>(a.cols());
  if (j == 1) return (a.col(0) - b).squaredNorm();
  const double h = 1.0 / steps;
  const Eigen::VectorXd base = a.col(j - 1) - b;
  Eigen::MatrixXd delta(a.rows(), j - 1);
  for (int i = 0; i < j - 1; ++i) delta.col(i) = h * (a.col(i) - a.col(j - 1));

  double best = std::numeric_limits<double>::infinity();
  auto innermost = [&](const Eigen::VectorXd& r, int room) {
    const Eigen::VectorXd d = delta.col(j - 2);
    auto f = [&](int m) { return (r + m * d).squaredNorm(); };
    best = std::min({best, f(0), f(room)});
    const double dd = d.squaredNorm();
    if (dd > 0.0) {
      const double vertex = std::clamp(-r.dot(d) / dd, 0.0, static_cast<double>(room));
      best = std::min({best, f(static_cast<int>(std::floor(vertex))), f(static_cast<int>(std::ceil(vertex)))});
    }
  };
  std::function<void(int, int, const Eigen::VectorXd&)> rec = [&](int depth, int used, const Eigen::VectorXd& r) {
    if (depth == j - 2) {
      innermost(r, steps - used);
      return;
    }
    Eigen::VectorXd cur = r;
    for (int m = 0; m + used <= steps; ++m) {
      rec(depth + 1, used + m, cur);
      cur += delta.col(depth);
    }
  };
  rec(0, 0, base);
  return best;
}

}  // namespace oracle
