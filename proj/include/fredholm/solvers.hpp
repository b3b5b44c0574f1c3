#pragma once

// Closed-form solvers for the risk functionals, plus prediction.
//
// All methods produce a representer expansion f(.) = sum_i alpha_i k(., p_i);
// the solver picks the coefficients by minimizing its risk functional:
//
//  krls      ||Y - K a||^2 + lambda a'Ka            -> (K + lambda I) a = Y
//  vrisk     (Y - K a)'V(Y - K a) + lambda a'Ka     -> reduced (VK + lambda I) a = VY
//            (canonical normal equations (KVK + lambda K) a = KVY; the reduced
//            system has the same solutions whenever K is invertible and avoids
//            squaring the condition number; a singular reduced system falls
//            back to the canonical form with a 1e-10 ridge on the Gram factor)
//  fredholm  ||KF KH a - Y||^2 + lambda a'KH a      -> (KF'KF KH + lambda I) a = KF'Y
//  msdf      (KF K A)'(KF K A) - 2 (KF K A)'KD Y + lambda A'KA
//                                                   -> (KF'KF K + lambda I) A = KF'KD Y
//            (the cross term carries an explicit factor 2 so this closed form
//            is the exact stationary point; the box constraint 0 <= KA <= 1 is
//            enforced by clipping predictions, with an optional
//            projected-gradient solver that enforces it during training)
//  laprls    sum_{i<=n_l}(y_i - (Ka)_i)^2 + (c1/n)(Ka)'L(Ka) + c2 a'Ka
//                                                   -> (JK + (c1/n)LK + c2 I) a = J Y_pad
//
// Constant prefactors (1/n, 1/n_l) are absorbed into the grid-searched
// regularization weights. Linear systems use dense partial-pivoting LU;
// condition numbers above 1e12 are recorded as warnings in the provenance
// note, and singular systems raise errors naming the conditioning failure.

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fredholm/common.hpp"
#include "fredholm/kernels.hpp"
#include "fredholm/vmatrix.hpp"

namespace fredholm {

struct ModelCoefficients {
  Eigen::VectorXd alpha;
  Eigen::MatrixXd expansion_points;
  KernelSpec kernel;
  std::string method;
  double lambda = 0.0;
  std::string solver_note;
};

struct LaplacianWeights {
  KernelSpec kernel; // GaussianRBF adjacency weights
  int knn = 0;       // 0 = fully connected; otherwise symmetrized k-nearest graph
};

struct LaplacianMatrix {
  Eigen::MatrixXd values;
  std::string weight_spec;
};

// Raised when a closed-form linear system is numerically singular. Grid
// drivers treat this as "this hyperparameter cell failed", not as a fatal
// error, so extreme grid corners cannot abort a whole search.
struct SingularSystemError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

struct LuSolve {
  Eigen::VectorXd x;
  double rcond = 0.0;
  bool ok = false;
};

inline LuSolve try_lu_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b) {
  LuSolve r;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
  r.rcond = lu.rcond();
  r.x = lu.solve(b);
  r.ok = r.x.allFinite() && r.rcond >= 1e-15;
  return r;
}

inline std::string conditioning_note(double rcond) {
  std::string note = "rcond=" + fmt_double(rcond);
  if (rcond < 1e-12) note += ";warning:condition-number>1e12";
  return note;
}

[[noreturn]] inline void throw_singular(const char* ctx, double rcond) {
  throw SingularSystemError(std::string(ctx) + ": singular linear system (rcond=" +
                            fmt_double(rcond) + ")");
}

inline void check_square_symmetric(const Eigen::MatrixXd& M, const char* what) {
  check_arg(M.rows() > 0 && M.rows() == M.cols(),
            std::string(what) + ": matrix must be square and non-empty");
  const double scale = std::max(1.0, M.cwiseAbs().maxCoeff());
  check_arg((M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale,
            std::string(what) + ": matrix must be symmetric");
}

inline void check_lambda(double lambda, const char* what, bool allow_zero) {
  check_arg(std::isfinite(lambda) && (lambda > 0.0 || (allow_zero && lambda == 0.0)),
            std::string(what) + ": lambda must be finite and positive");
}

inline void check_response(const Eigen::VectorXd& Y, Eigen::Index n, const char* what) {
  check_arg(Y.size() == n, std::string(what) + ": response length mismatch");
  check_arg(Y.allFinite(), std::string(what) + ": response must be finite");
}

} // namespace detail

// (K + lambda I) a = Y. lambda = 0 is allowed only when K is numerically
// nonsingular (exact interpolation).
inline ModelCoefficients solve_krls(const GramMatrix& K, const Eigen::VectorXd& Y,
                                    double lambda) {
  detail::check_square_symmetric(K.values, "solve_krls");
  detail::check_lambda(lambda, "solve_krls", /*allow_zero=*/true);
  detail::check_response(Y, K.values.rows(), "solve_krls");
  const Eigen::Index n = K.values.rows();
  const Eigen::MatrixXd A = K.values + lambda * Eigen::MatrixXd::Identity(n, n);
  const auto sol = detail::try_lu_solve(A, Y);
  if (!sol.ok) detail::throw_singular("solve_krls", sol.rcond);
  ModelCoefficients m;
  m.alpha = sol.x;
  m.expansion_points = K.col_points;
  m.kernel = K.spec;
  m.method = "krls";
  m.lambda = lambda;
  m.solver_note = "closed-form;" + detail::conditioning_note(sol.rcond);
  return m;
}

// Reduced V-risk system (VK + lambda I) a = VY with canonical fallback.
inline ModelCoefficients solve_vrisk(const GramMatrix& K, const VMatrix& V,
                                     const Eigen::VectorXd& Y, double lambda) {
  detail::check_square_symmetric(K.values, "solve_vrisk(K)");
  detail::check_arg(V.values.rows() == K.values.rows() && V.values.cols() == K.values.cols(),
                    "solve_vrisk: V and K dimensions must match");
  detail::check_square_symmetric(V.values, "solve_vrisk(V)");
  detail::check_lambda(lambda, "solve_vrisk", /*allow_zero=*/false);
  detail::check_response(Y, K.values.rows(), "solve_vrisk");
  const Eigen::Index n = K.values.rows();
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);

  ModelCoefficients m;
  m.expansion_points = K.col_points;
  m.kernel = K.spec;
  m.method = "vrisk";
  m.lambda = lambda;

  const auto reduced = detail::try_lu_solve(V.values * K.values + lambda * I, V.values * Y);
  if (reduced.ok) {
    m.alpha = reduced.x;
    m.solver_note = "reduced;" + detail::conditioning_note(reduced.rcond);
    return m;
  }
  // Canonical normal equations with a small ridge on the Gram factor.
  const Eigen::MatrixXd Kr = K.values + 1e-10 * I;
  const auto canonical =
      detail::try_lu_solve(Kr * V.values * Kr + lambda * Kr, Kr * (V.values * Y));
  if (!canonical.ok) detail::throw_singular("solve_vrisk", canonical.rcond);
  m.alpha = canonical.x;
  m.solver_note = "canonical-fallback(ridge=1e-10);" + detail::conditioning_note(canonical.rcond);
  return m;
}

// (KF'KF KH + lambda I) a = KF'Y; expansion over all n points.
inline ModelCoefficients solve_fredholm(const GramMatrix& K_F, const GramMatrix& K_H,
                                        const Eigen::VectorXd& Y, double lambda) {
  detail::check_square_symmetric(K_H.values, "solve_fredholm(K_H)");
  detail::check_arg(K_F.values.cols() == K_H.values.rows(),
                    "solve_fredholm: K_F columns must index the expansion points");
  detail::check_lambda(lambda, "solve_fredholm", /*allow_zero=*/false);
  detail::check_response(Y, K_F.values.rows(), "solve_fredholm");
  const Eigen::Index n = K_H.values.rows();
  const Eigen::MatrixXd M =
      K_F.values.transpose() * K_F.values * K_H.values +
      lambda * Eigen::MatrixXd::Identity(n, n);
  const auto sol = detail::try_lu_solve(M, K_F.values.transpose() * Y);
  if (!sol.ok) detail::throw_singular("solve_fredholm", sol.rcond);
  ModelCoefficients m;
  m.alpha = sol.x;
  m.expansion_points = K_H.col_points;
  m.kernel = K_H.spec;
  m.method = "fredholm";
  m.lambda = lambda;
  m.solver_note = "closed-form;" + detail::conditioning_note(sol.rcond);
  return m;
}

namespace detail {

inline void check_msdf_shapes(const GramMatrix& K_F, const GramMatrix& K,
                              const GramMatrix& K_D, const Eigen::VectorXd& Y) {
  check_square_symmetric(K.values, "solve_msdf(K)");
  check_arg(K_F.values.cols() == K.values.rows(),
            "solve_msdf: K_F columns must index the expansion points");
  check_arg(K_D.values.rows() == K_F.values.rows() &&
                K_D.values.cols() == K_F.values.rows(),
            "solve_msdf: K_D must be square over the labeled points");
  check_response(Y, K_F.values.rows(), "solve_msdf");
}

} // namespace detail

// (KF'KF K + lambda I) A = KF'KD Y; box constraint deferred to predict-time
// clipping.
inline ModelCoefficients solve_msdf(const GramMatrix& K_F, const GramMatrix& K,
                                    const GramMatrix& K_D, const Eigen::VectorXd& Y,
                                    double lambda) {
  detail::check_msdf_shapes(K_F, K, K_D, Y);
  detail::check_lambda(lambda, "solve_msdf", /*allow_zero=*/false);
  const Eigen::Index n = K.values.rows();
  const Eigen::MatrixXd M = K_F.values.transpose() * K_F.values * K.values +
                            lambda * Eigen::MatrixXd::Identity(n, n);
  const auto sol = detail::try_lu_solve(M, K_F.values.transpose() * (K_D.values * Y));
  if (!sol.ok) detail::throw_singular("solve_msdf", sol.rcond);
  ModelCoefficients m;
  m.alpha = sol.x;
  m.expansion_points = K.col_points;
  m.kernel = K.spec;
  m.method = "msdf";
  m.lambda = lambda;
  m.solver_note = "closed-form;" + detail::conditioning_note(sol.rcond);
  return m;
}

struct PgOptions {
  int max_iter = 10000;
  double tol = 1e-9;
};

// Projected-gradient MSDF: enforces 0 <= KA <= 1 on the training outputs.
// Gradient steps of 1/L with L the largest Hessian eigenvalue (power
// iteration), plus Nesterov momentum with adaptive restart so the iteration
// reaches oracle-grade accuracy within its budget; stops when the fixed-point
// residual of the projection step drops below tol. The feasibility projection
// maps the fitted values back through K, so K must be invertible. Doubles as
// the test oracle for the constrained objective.
inline ModelCoefficients solve_msdf_pg(const GramMatrix& K_F, const GramMatrix& K,
                                       const GramMatrix& K_D, const Eigen::VectorXd& Y,
                                       double lambda, const PgOptions& opt = {}) {
  detail::check_msdf_shapes(K_F, K, K_D, Y);
  detail::check_lambda(lambda, "solve_msdf_pg", /*allow_zero=*/false);
  const Eigen::Index n = K.values.rows();
  const Eigen::MatrixXd& Km = K.values;
  const Eigen::MatrixXd BtB = K_F.values.transpose() * K_F.values;
  const Eigen::VectorXd c = K_F.values.transpose() * (K_D.values * Y);

  // Hessian H = 2 (K BtB K + lambda K); largest eigenvalue by power iteration.
  auto hessian_apply = [&](const Eigen::VectorXd& v) {
    return Eigen::VectorXd(2.0 * (Km * (BtB * (Km * v))) + 2.0 * lambda * (Km * v));
  };
  Eigen::VectorXd v = Eigen::VectorXd::Ones(n).normalized();
  double L = 1.0;
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd hv = hessian_apply(v);
    const double norm = hv.norm();
    if (norm <= 0.0) break;
    L = norm;
    v = hv / norm;
  }
  const double step = 1.0 / std::max(L, 1e-12);

  Eigen::PartialPivLU<Eigen::MatrixXd> k_lu(Km);
  if (k_lu.rcond() < 1e-15) {
    throw std::runtime_error("solve_msdf_pg: target Gram matrix must be invertible "
                             "for the feasibility projection (rcond=" +
                             fmt_double(k_lu.rcond()) + ")");
  }
  auto project = [&](const Eigen::VectorXd& A) {
    const Eigen::VectorXd s = Km * A;
    const Eigen::VectorXd clipped = s.cwiseMax(0.0).cwiseMin(1.0);
    if (clipped == s) return A;
    return Eigen::VectorXd(A + k_lu.solve(clipped - s));
  };

  auto gradient = [&](const Eigen::VectorXd& a) {
    return Eigen::VectorXd(2.0 * (Km * (BtB * (Km * a))) - 2.0 * (Km * c) +
                           2.0 * lambda * (Km * a));
  };
  Eigen::VectorXd A = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = A;
  double t = 1.0;
  int iters = 0;
  for (; iters < opt.max_iter; ++iters) {
    const Eigen::VectorXd next = project(y - step * gradient(y));
    const double resid = (next - y).norm();
    const Eigen::VectorXd diff = next - A;
    if ((y - next).dot(diff) > 0.0) {
      t = 1.0; // momentum points uphill: restart
      y = next;
    } else {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
      y = next + ((t - 1.0) / t_next) * diff;
      t = t_next;
    }
    A = next;
    if (resid <= opt.tol * std::max(1.0, A.norm())) {
      ++iters;
      break;
    }
  }
  detail::check_state(A.allFinite(), "solve_msdf_pg: diverged to non-finite coefficients");
  ModelCoefficients m;
  m.alpha = A;
  m.expansion_points = K.col_points;
  m.kernel = K.spec;
  m.method = "msdf-pg";
  m.lambda = lambda;
  m.solver_note = "projected-gradient(iters=" + std::to_string(iters) +
                  ",step=" + fmt_double(step) + ")";
  return m;
}

// L = 2(D - W) so that f'Lf = sum_{i,j} w_ij (f_i - f_j)^2 under the full
// double sum. Weights are Gaussian, optionally masked to a symmetrized
// k-nearest-neighbor graph; w_ii = 0.
inline LaplacianMatrix graph_laplacian(const Eigen::MatrixXd& points,
                                       const LaplacianWeights& weights) {
  detail::check_points(points, "graph_laplacian");
  const Eigen::Index n = points.rows();
  detail::check_arg(n >= 2, "graph_laplacian: need at least two points");
  detail::check_arg(weights.kernel.family == KernelFamily::GaussianRBF,
                    "graph_laplacian: adjacency weights use a GaussianRBF spec");
  weights.kernel.validate();
  detail::check_arg(weights.knn >= 0 && weights.knn < n,
                    "graph_laplacian: kNN parameter must be < n");

  Eigen::MatrixXd W(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    W(i, i) = 0.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double w = detail::eval_kernel_unchecked(weights.kernel, points.row(i),
                                                     points.row(j));
      W(i, j) = w;
      W(j, i) = w;
    }
  }

  if (weights.knn > 0) {
    // keep w_ij iff j is among the knn nearest of i or vice versa
    Eigen::MatrixXd mask = Eigen::MatrixXd::Zero(n, n);
    std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n - 1));
    for (Eigen::Index i = 0; i < n; ++i) {
      dist.clear();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        dist.emplace_back((points.row(i) - points.row(j)).squaredNorm(), j);
      }
      std::sort(dist.begin(), dist.end());
      for (int k = 0; k < weights.knn; ++k) {
        mask(i, dist[static_cast<std::size_t>(k)].second) = 1.0;
        mask(dist[static_cast<std::size_t>(k)].second, i) = 1.0;
      }
    }
    W = W.cwiseProduct(mask);
  }

  LaplacianMatrix lap;
  lap.values = 2.0 * (Eigen::MatrixXd(W.rowwise().sum().asDiagonal()) - W);
  lap.weight_spec = (weights.knn > 0 ? "knn(" + std::to_string(weights.knn) + ")+" : "") +
                    weights.kernel.id();
  return lap;
}

// (JK + (c1/n) LK + c2 I) a = J Y_pad; the first n_l expansion points are the
// labeled ones.
inline ModelCoefficients solve_laprls(const GramMatrix& K, const LaplacianMatrix& L,
                                      const Eigen::VectorXd& Y, double c1, double c2) {
  detail::check_square_symmetric(K.values, "solve_laprls(K)");
  const Eigen::Index n = K.values.rows();
  detail::check_arg(L.values.rows() == n && L.values.cols() == n,
                    "solve_laprls: Laplacian and Gram dimensions must match");
  const Eigen::Index n_l = Y.size();
  detail::check_arg(n_l >= 1 && n_l <= n,
                    "solve_laprls: need 1 <= n_labeled <= n responses");
  detail::check_arg(Y.allFinite(), "solve_laprls: response must be finite");
  detail::check_arg(std::isfinite(c1) && c1 >= 0.0, "solve_laprls: c1 must be >= 0");
  detail::check_arg(std::isfinite(c2) && c2 > 0.0, "solve_laprls: c2 must be > 0");

  Eigen::MatrixXd M = c2 * Eigen::MatrixXd::Identity(n, n);
  M.topRows(n_l) += K.values.topRows(n_l); // J K
  M += (c1 / static_cast<double>(n)) * (L.values * K.values);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs.head(n_l) = Y;

  const auto sol = detail::try_lu_solve(M, rhs);
  if (!sol.ok) detail::throw_singular("solve_laprls", sol.rcond);
  ModelCoefficients m;
  m.alpha = sol.x;
  m.expansion_points = K.col_points;
  m.kernel = K.spec;
  m.method = "laprls";
  m.lambda = c2;
  m.solver_note = "closed-form(c1=" + fmt_double(c1) + ");" +
                  detail::conditioning_note(sol.rcond) + ";laplacian=" + L.weight_spec;
  return m;
}

// Raw representer scores s_j = sum_i alpha_i k(x_j, p_i).
inline Eigen::VectorXd predict_raw(const ModelCoefficients& model,
                                   const Eigen::MatrixXd& X_new) {
  detail::check_points(X_new, "predict(X_new)");
  detail::check_arg(X_new.cols() == model.expansion_points.cols(),
                    "predict: dimension mismatch with expansion points");
  detail::check_arg(model.alpha.size() == model.expansion_points.rows(),
                    "predict: coefficient/expansion size mismatch");
  detail::check_arg(model.alpha.allFinite(), "predict: coefficients must be finite");
  return gram(model.kernel, X_new, model.expansion_points).values * model.alpha;
}

// Clipped probability estimates in [0,1].
inline Eigen::VectorXd predict(const ModelCoefficients& model,
                               const Eigen::MatrixXd& X_new) {
  return predict_raw(model, X_new).cwiseMax(0.0).cwiseMin(1.0);
}

} // namespace fredholm
