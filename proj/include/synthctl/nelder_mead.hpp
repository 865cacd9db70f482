#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

namespace synthctl {

struct NelderMeadOptions {
  int max_evaluations = 500;
  double initial_step = 1.0;
  // Stop once max - min of the simplex values is within
  // f_tolerance * (|min| + f_tolerance).
  double f_tolerance = 1e-8;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

/// Derivative-free minimization with the standard coefficients
/// (reflection 1, expansion 2, contraction 1/2, shrink 1/2). The initial
/// simplex is x0 plus initial_step along each axis. Never exceeds
/// max_evaluations (the initial simplex excepted). Fully deterministic.
template <class Objective>
NelderMeadResult nelder_mead(Objective&& f, const Eigen::VectorXd& x0,
                             const NelderMeadOptions& opt = {}) {
  const Eigen::Index n = x0.size();
  NelderMeadResult res;
  auto eval = [&](const Eigen::VectorXd& x) {
    ++res.evaluations;
    return f(x);
  };
  if (n == 0) {
    res.x = x0;
    res.value = eval(x0);
    res.converged = true;
    return res;
  }

  std::vector<Eigen::VectorXd> pts;
  std::vector<double> vals;
  pts.push_back(x0);
  vals.push_back(eval(x0));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd p = x0;
    p(i) += opt.initial_step;
    pts.push_back(p);
    vals.push_back(eval(p));
  }

  std::vector<std::size_t> order(static_cast<std::size_t>(n) + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
    std::vector<Eigen::VectorXd> p2;
    std::vector<double> v2;
    for (auto k : order) {
      p2.push_back(pts[k]);
      v2.push_back(vals[k]);
    }
    pts = std::move(p2);
    vals = std::move(v2);
  };

  const std::size_t last = static_cast<std::size_t>(n);
  while (true) {
    sort_simplex();
    const double spread = vals[last] - vals[0];
    if (spread <= opt.f_tolerance * (std::abs(vals[0]) + opt.f_tolerance)) {
      res.converged = true;
      break;
    }
    // Each iteration spends at most two evaluations before a shrink.
    if (res.evaluations + 2 > opt.max_evaluations) break;

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < last; ++k) centroid += pts[k];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + (centroid - pts[last]);
    const double fr = eval(xr);
    if (fr < vals[0]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[last]);
      const double fe = eval(xe);
      if (fe < fr) {
        pts[last] = xe;
        vals[last] = fe;
      } else {
        pts[last] = xr;
        vals[last] = fr;
      }
      continue;
    }
    if (fr < vals[last - 1]) {
      pts[last] = xr;
      vals[last] = fr;
      continue;
    }
    const bool outside = fr < vals[last];
    const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                       : Eigen::VectorXd(centroid + 0.5 * (pts[last] - centroid));
    const double fc = eval(xc);
    if (fc < (outside ? fr : vals[last])) {
      pts[last] = xc;
      vals[last] = fc;
      continue;
    }
    for (std::size_t k = 1; k <= last; ++k) {
      if (res.evaluations >= opt.max_evaluations) break;
      pts[k] = pts[0] + 0.5 * (pts[k] - pts[0]);
      vals[k] = eval(pts[k]);
    }
  }
  res.x = pts[0];
  res.value = vals[0];
  return res;
}

}  // namespace synthctl
