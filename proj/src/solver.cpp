#include "synthctl/solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <vector>

#include "synthctl/error.hpp"

namespace synthctl {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) {
    throw Error(ErrorCode::NonFiniteInput, std::string(what) + " contains non-finite values");
  }
}

double objective_of(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& w) {
  return (a * w - b).squaredNorm();
}

struct PgOutcome {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

using Certifier = std::function<bool(const Eigen::VectorXd&, double)>;

// Accelerated projected gradient (FISTA) with function-value restart on
// f(w) = ||A w - b||². The gradient Lipschitz constant is 2 λmax(AᵀA).
// After iterations 1, 2, 4, 8, ... `certify` may hand the iterate to an
// exact method; success ends the loop.
PgOutcome projected_gradient(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                             Eigen::VectorXd x0,
                             const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& project,
                             const SolverSettings& settings, const Certifier& certify = {}) {
  PgOutcome out;
  out.x = std::move(x0);
  out.f = objective_of(a, b, out.x);
  const double tol = settings.objective_tol * std::max(1.0, out.f);

  double lipschitz = 2.0 * power_iteration_lmax(a, settings.power_iterations) * 1.01;
  if (!(lipschitz > 0.0)) {
    // A == 0: every feasible point is optimal.
    out.converged = true;
    return out;
  }

  Eigen::VectorXd y = out.x;
  double t = 1.0;
  bool momentum = false;
  for (int k = 0; k < settings.max_iterations; ++k) {
    out.iterations = k + 1;
    const Eigen::VectorXd grad = 2.0 * a.transpose() * (a * y - b);
    Eigen::VectorXd xn = project(y - grad / lipschitz);
    const double fn = objective_of(a, b, xn);

    if (fn > out.f) {
      if (momentum) {
        y = out.x;
        t = 1.0;
        momentum = false;
        continue;
      }
      // A plain projected step cannot increase f unless the step is too long;
      // anything within rounding of f means we are at the floor.
      if (fn - out.f > 1e-13 * std::max(1.0, out.f)) {
        lipschitz *= 2.0;
        continue;
      }
      out.converged = true;
      break;
    }

    const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    y = xn + ((t - 1.0) / tn) * (xn - out.x);
    momentum = true;
    const bool done = out.f - fn < tol;
    out.x = std::move(xn);
    out.f = fn;
    t = tn;
    if (done) {
      out.converged = true;
      break;
    }
    const int it = k + 1;
    if (certify && (it & (it - 1)) == 0 && certify(out.x, out.f)) {
      out.converged = true;
      break;
    }
  }
  return out;
}

struct ReducedSolve {
  Eigen::VectorXd ws;
  bool rank_deficient = false;
};

// min ||A_S w - b|| subject to cᵀw = rhs, as the minimum-norm correction
// from the centre point c·rhs/|S|. The correction lives in the complement
// of c, spanned by the trailing columns of the Householder reflector H that
// maps c/|c| to e1. Depends only on the support columns.
ReducedSolve solve_on_support(const Eigen::MatrixXd& as, const Eigen::VectorXd& b,
                              const Eigen::VectorXd& c, double rhs, double singular_tol) {
  const Eigen::Index n = as.cols();
  ReducedSolve out;
  out.ws = c * (rhs / static_cast<double>(n));
  if (n == 1) return out;

  Eigen::VectorXd u = c / c.norm();
  u(0) -= 1.0;
  const double uu = u.squaredNorm();
  const double beta = uu > 0.0 ? 2.0 / uu : 0.0;
  // (A_S H) without its first column.
  const Eigen::MatrixXd m =
      (as - beta * (as * u) * u.transpose()).rightCols(n - 1);
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(m);
  cod.setThreshold(singular_tol);
  out.rank_deficient = cod.rank() < m.cols();
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  z.tail(n - 1) = cod.solve(b - as * out.ws);
  out.ws += z - beta * u * u.dot(z);
  return out;
}

Eigen::MatrixXd columns(const Eigen::MatrixXd& a, const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(a.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = a.col(idx[k]);
  return out;
}

Eigen::VectorXd scatter(Eigen::Index n, const std::vector<Eigen::Index>& idx,
                        const Eigen::VectorXd& values) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(n);
  for (std::size_t k = 0; k < idx.size(); ++k) w(idx[k]) = values(static_cast<Eigen::Index>(k));
  return w;
}

struct Refined {
  Eigen::VectorXd w;
  bool rank_deficient = false;
};

// Primal active-set method for min ||A w - b||² over the unit simplex,
// started from a feasible point. Each step solves the equality-constrained
// problem on the current support; infeasible solutions are handled by a
// ratio-test step toward them, and the most violated dual condition adds a
// coordinate. The final iterate depends only on the support columns.
std::optional<Refined> active_set_simplex(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                          Eigen::VectorXd w, const SolverSettings& settings) {
  const Eigen::Index n = w.size();
  std::vector<char> in(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i = 0; i < n; ++i) in[static_cast<std::size_t>(i)] = w(i) > 0.0;

  const int max_steps = 3 * static_cast<int>(n) + 10;
  bool rank_deficient = false;
  // Rounding in the residual of a near-exact fit shows up in the gradient
  // at roughly this scale.
  const double grad_scale = 2.0 * a.cwiseAbs().maxCoeff() * std::max(b.norm(), (a * w).norm());
  Eigen::Index entered = -1;
  for (int step = 0; step < max_steps; ++step) {
    std::vector<Eigen::Index> support;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in[static_cast<std::size_t>(i)]) support.push_back(i);
    }
    if (support.empty()) return std::nullopt;
    const Eigen::Index m = static_cast<Eigen::Index>(support.size());
    auto sol = solve_on_support(columns(a, support), b, Eigen::VectorXd::Ones(m), 1.0,
                                settings.singular_tol);

    if ((sol.ws.array() > 0.0).all()) {
      w = scatter(n, support, sol.ws);
      rank_deficient = sol.rank_deficient;
      const Eigen::VectorXd grad = 2.0 * a.transpose() * (a * w - b);
      double lambda = 0.0;
      for (auto i : support) lambda += grad(i);
      lambda /= static_cast<double>(m);
      const double tol = 1e-11 * std::max({1.0, grad.cwiseAbs().maxCoeff(), grad_scale});
      Eigen::Index enter = -1;
      double worst = -tol;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (in[static_cast<std::size_t>(i)]) continue;
        if (grad(i) - lambda < worst) {
          worst = grad(i) - lambda;
          enter = i;
        }
      }
      if (enter < 0) return Refined{std::move(w), rank_deficient};
      in[static_cast<std::size_t>(enter)] = 1;
      entered = enter;
      continue;
    }

    // Step from w toward the subproblem solution until a coordinate hits zero.
    double alpha = 1.0;
    for (Eigen::Index k = 0; k < m; ++k) {
      const double cur = w(support[static_cast<std::size_t>(k)]);
      const double tgt = sol.ws(k);
      if (tgt <= 0.0 && cur - tgt > 0.0) alpha = std::min(alpha, cur / (cur - tgt));
    }
    // The coordinate that just entered wants to leave again without any
    // movement: the previous support was already optimal up to rounding.
    if (alpha == 0.0 && entered >= 0) {
      const auto pos = std::find(support.begin(), support.end(), entered) - support.begin();
      if (sol.ws(pos) <= 0.0) {
        w(entered) = 0.0;
        return Refined{std::move(w), rank_deficient};
      }
    }
    entered = -1;
    for (Eigen::Index k = 0; k < m; ++k) {
      const auto i = support[static_cast<std::size_t>(k)];
      w(i) += alpha * (sol.ws(k) - w(i));
      if (w(i) <= 0.0 || (sol.ws(k) <= 0.0 && w(i) <= 1e-15)) {
        w(i) = 0.0;
        in[static_cast<std::size_t>(i)] = 0;
      }
    }
  }
  return std::nullopt;
}

SolveResult finish(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, PgOutcome pg,
                   std::optional<Refined> refined) {
  SolveResult out;
  out.iterations = pg.iterations;
  out.converged = pg.converged;
  out.weights = std::move(pg.x);
  out.objective = pg.f;
  if (refined) {
    const double f = objective_of(a, b, refined->w);
    if (f <= pg.f + 1e-14 * std::max(1.0, pg.f)) {
      out.weights = std::move(refined->w);
      out.objective = f;
      out.refined = true;
      out.non_unique = refined->rank_deficient;
    }
  }
  return out;
}

}  // namespace

DiagonalImportance::DiagonalImportance(const Eigen::VectorXd& raw) {
  if (raw.size() == 0 || !raw.allFinite() || (raw.array() < 0.0).any()) {
    throw Error(ErrorCode::InvalidArgument, "importances must be finite and non-negative");
  }
  const double total = raw.sum();
  if (!(total > 0.0)) throw Error(ErrorCode::InvalidArgument, "importances sum to zero");
  values_ = raw / total;
}

DiagonalImportance DiagonalImportance::uniform(Eigen::Index k) {
  return DiagonalImportance(Eigen::VectorXd::Ones(k));
}

Eigen::VectorXd project_simplex(const Eigen::VectorXd& v, double radius) {
  const Eigen::Index n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    cumsum += u[static_cast<std::size_t>(j)];
    const double candidate = (cumsum - radius) / static_cast<double>(j + 1);
    if (u[static_cast<std::size_t>(j)] - candidate > 0.0) theta = candidate;
  }
  return (v.array() - theta).max(0.0).matrix();
}

Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& v, double radius) {
  if (v.lpNorm<1>() <= radius) return v;
  Eigen::VectorXd mag = project_simplex(v.cwiseAbs(), radius);
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v(i) < 0.0) mag(i) = -mag(i);
  }
  return mag;
}

double power_iteration_lmax(const Eigen::MatrixXd& a, int iterations) {
  if (a.size() == 0) return 0.0;
  // AᵀA and AAᵀ share their non-zero spectrum; iterate on the smaller one.
  const Eigen::MatrixXd gram = a.rows() < a.cols() ? Eigen::MatrixXd(a * a.transpose())
                                                   : Eigen::MatrixXd(a.transpose() * a);
  Eigen::VectorXd x = Eigen::VectorXd::Ones(gram.cols()).normalized();
  double lambda = 0.0;
  for (int k = 0; k < iterations; ++k) {
    Eigen::VectorXd y = gram * x;
    const double norm = y.norm();
    if (!(norm > 0.0)) {
      // The all-ones start can be orthogonal to the range; fall back to the
      // Frobenius bound, which dominates λmax.
      return a.squaredNorm();
    }
    lambda = norm;
    x = y / norm;
  }
  return lambda;
}

SolveResult solve_simplex_wls(const Eigen::VectorXd& x1, const Eigen::MatrixXd& x0,
                              const Eigen::VectorXd& v, const SolverSettings& settings) {
  if (x0.rows() < 1 || x0.cols() < 1) {
    throw Error(ErrorCode::InvalidArgument, "simplex solve needs K >= 1 and J >= 1");
  }
  if (x1.size() != x0.rows() || v.size() != x0.rows()) {
    throw Error(ErrorCode::InvalidArgument, "dimension mismatch in simplex solve");
  }
  require_finite(x1, "target");
  require_finite(x0, "donor matrix");
  require_finite(v, "importances");
  if ((v.array() < 0.0).any()) throw Error(ErrorCode::InvalidArgument, "negative importance");

  const Eigen::VectorXd root = v.cwiseSqrt();
  const Eigen::MatrixXd a = root.asDiagonal() * x0;
  const Eigen::VectorXd b = root.cwiseProduct(x1);
  const Eigen::Index j = x0.cols();

  // The active-set pass certifies optimality through the KKT conditions, so
  // once it succeeds from an intermediate iterate there is nothing left for
  // the gradient loop to do.
  std::optional<Refined> early;
  // Starting the active-set pass from the vertex the iterate leans on most
  // keeps its supports small.
  auto certify = [&](const Eigen::VectorXd& x, double f) {
    Eigen::Index top = 0;
    x.maxCoeff(&top);
    auto r = active_set_simplex(a, b, Eigen::VectorXd::Unit(j, top), settings);
    if (r && objective_of(a, b, r->w) <= f + 1e-14 * std::max(1.0, f)) {
      early = std::move(r);
      return true;
    }
    return false;
  };
  auto pg = projected_gradient(a, b, Eigen::VectorXd::Constant(j, 1.0 / static_cast<double>(j)),
                               [](const Eigen::VectorXd& y) { return project_simplex(y); },
                               settings, certify);
  auto refined = early ? std::move(early) : active_set_simplex(a, b, pg.x, settings);
  SolveResult out = finish(a, b, std::move(pg), std::move(refined));

  for (Eigen::Index i = 0; i < j; ++i) {
    if (out.weights(i) < 0.0 && out.weights(i) >= -settings.negative_clamp) out.weights(i) = 0.0;
  }
  // Left-to-right sum so zero entries never change the rounding.
  const double total = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
  if (std::abs(total - 1.0) > settings.sum_tol) {
    throw Error(ErrorCode::InvalidArgument, "simplex solve lost feasibility");
  }
  out.weights /= total;
  out.objective = objective_of(a, b, out.weights);
  return out;
}

SolveResult solve_l1_ball_ls(const Eigen::VectorXd& y1, const Eigen::MatrixXd& y0, double bound,
                             const SolverSettings& settings) {
  if (!(bound > 0.0) || !std::isfinite(bound)) {
    throw Error(ErrorCode::InvalidArgument, "l1 bound must be positive");
  }
  if (y0.rows() < 1 || y0.cols() < 1 || y1.size() != y0.rows()) {
    throw Error(ErrorCode::InvalidArgument, "dimension mismatch in l1-ball solve");
  }
  require_finite(y1, "target");
  require_finite(y0, "donor matrix");

  const Eigen::Index j = y0.cols();
  const double start = std::min(1.0, bound) / static_cast<double>(j);
  // The l1 ball is the image of a simplex over (positive part, negative
  // part, slack) scaled by the bound; refine in that lifted space.
  Eigen::MatrixXd lifted(y0.rows(), 2 * j + 1);
  lifted << bound * y0, -bound * y0, Eigen::VectorXd::Zero(y0.rows());
  auto refine = [&](const Eigen::VectorXd& x) -> std::optional<Refined> {
    Eigen::VectorXd u(2 * j + 1);
    u.head(j) = x.cwiseMax(0.0) / bound;
    u.segment(j, j) = (-x).cwiseMax(0.0) / bound;
    u(2 * j) = std::max(0.0, 1.0 - x.lpNorm<1>() / bound);
    Eigen::Index top = 0;
    u.maxCoeff(&top);
    auto lifted_sol = active_set_simplex(lifted, y1, Eigen::VectorXd::Unit(2 * j + 1, top), settings);
    // The paired columns make the vertex start degenerate more often than
    // in the plain simplex case; retry from the iterate itself.
    if (!lifted_sol) lifted_sol = active_set_simplex(lifted, y1, u / u.sum(), settings);
    if (!lifted_sol) return std::nullopt;
    Eigen::VectorXd w = bound * (lifted_sol->w.head(j) - lifted_sol->w.segment(j, j));
    return Refined{std::move(w), lifted_sol->rank_deficient};
  };
  std::optional<Refined> early;
  auto certify = [&](const Eigen::VectorXd& x, double f) {
    auto r = refine(x);
    if (r && objective_of(y0, y1, r->w) <= f + 1e-14 * std::max(1.0, f)) {
      early = std::move(r);
      return true;
    }
    return false;
  };
  auto pg = projected_gradient(y0, y1, Eigen::VectorXd::Constant(j, start),
                               [bound](const Eigen::VectorXd& y) { return project_l1_ball(y, bound); },
                               settings, certify);
  auto refined = early ? std::move(early) : refine(pg.x);
  return finish(y0, y1, std::move(pg), std::move(refined));
}

OlsResult solve_ols(const Eigen::VectorXd& y1, const Eigen::MatrixXd& y0, bool intercept) {
  require_finite(y1, "target");
  require_finite(y0, "regressors");
  if (y0.rows() != y1.size()) throw Error(ErrorCode::InvalidArgument, "dimension mismatch in OLS");
  const Eigen::Index params = y0.cols() + (intercept ? 1 : 0);
  if (y1.size() <= params) {
    throw Error(ErrorCode::UnderdeterminedSystem,
                "OLS needs more observations (" + std::to_string(y1.size()) + ") than parameters (" +
                    std::to_string(params) + ")");
  }
  OlsResult out;
  if (params == 0) {
    out.weights = Eigen::VectorXd(0);
    out.objective = y1.squaredNorm();
    return out;
  }
  Eigen::MatrixXd design(y0.rows(), params);
  if (intercept) {
    design.col(0).setOnes();
    design.rightCols(y0.cols()) = y0;
  } else {
    design = y0;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  const Eigen::VectorXd beta = qr.solve(y1);
  out.rank = qr.rank();
  if (intercept) {
    out.intercept = beta(0);
    out.weights = beta.tail(y0.cols());
  } else {
    out.weights = beta;
  }
  out.objective = (design * beta - y1).squaredNorm();
  return out;
}

}  // namespace synthctl
