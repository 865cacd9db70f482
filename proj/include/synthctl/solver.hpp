#pragma once

// Numerical kernels behind every estimator: simplex-constrained weighted
// least squares, l1-ball-constrained least squares and ordinary least
// squares. All routines are deterministic functions of their inputs.

#include <Eigen/Dense>

namespace synthctl {

struct SolverSettings {
  // Stop when successive objectives differ by less than
  // objective_tol * max(1, objective at the starting point).
  double objective_tol = 1e-12;
  int max_iterations = 10000;
  // Simplex entries above -negative_clamp are clamped to zero on output.
  double negative_clamp = 1e-10;
  double sum_tol = 1e-8;
  // Relative rank threshold used to flag singular Gram matrices.
  double singular_tol = 1e-10;
  int power_iterations = 100;
};

/// Non-negative covariate importances normalized to sum to one.
class DiagonalImportance {
 public:
  DiagonalImportance() = default;
  /// Throws InvalidArgument for negative, non-finite or all-zero input.
  explicit DiagonalImportance(const Eigen::VectorXd& raw);
  static DiagonalImportance uniform(Eigen::Index k);

  const Eigen::VectorXd& values() const noexcept { return values_; }
  Eigen::Index size() const noexcept { return values_.size(); }

 private:
  Eigen::VectorXd values_;
};

struct SolveResult {
  Eigen::VectorXd weights;
  double objective = 0.0;  // not square-rooted
  int iterations = 0;
  bool converged = false;
  // The active-set refinement replaced the iterate.
  bool refined = false;
  // The reduced problem on the final support is rank deficient, so the
  // minimizer is not unique.
  bool non_unique = false;
};

struct OlsResult {
  Eigen::VectorXd weights;
  double intercept = 0.0;
  double objective = 0.0;  // residual sum of squares
  Eigen::Index rank = 0;
};

/// Euclidean projection onto {w : w >= 0, sum(w) = radius}.
Eigen::VectorXd project_simplex(const Eigen::VectorXd& v, double radius = 1.0);

/// Euclidean projection onto {w : ||w||_1 <= radius}.
Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& v, double radius);

/// Largest eigenvalue of AᵀA by power iteration from the all-ones vector.
double power_iteration_lmax(const Eigen::MatrixXd& a, int iterations);

/// min_w (x1 - X0 w)ᵀ diag(v) (x1 - X0 w) over the unit simplex.
/// Accelerated projected gradient from the uniform vector with step 1/L,
/// followed by an exact solve on the identified support.
SolveResult solve_simplex_wls(const Eigen::VectorXd& x1, const Eigen::MatrixXd& x0,
                              const Eigen::VectorXd& v, const SolverSettings& settings = {});

/// min_w ||y1 - Y0 w||² subject to ||w||_1 <= bound.
SolveResult solve_l1_ball_ls(const Eigen::VectorXd& y1, const Eigen::MatrixXd& y0, double bound,
                             const SolverSettings& settings = {});

/// Least squares of y1 on the columns of Y0 (plus an intercept column when
/// requested). Requires strictly more rows than parameters.
OlsResult solve_ols(const Eigen::VectorXd& y1, const Eigen::MatrixXd& y0, bool intercept);

}  // namespace synthctl
