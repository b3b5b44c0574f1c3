#pragma once

// Independent oracles and fixtures shared by the unit and acceptance suites.
// Everything here is computed from first principles (direct sums, quadrature,
// gradient-based minimization) and deliberately avoids the library's own
// closed forms so the two routes stay independent.

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "fredholm/common.hpp"
#include "fredholm/vmatrix.hpp"

namespace testsupport {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// Bessel J_n via the integral representation
//   J_n(x) = (1/pi) * integral_0^pi cos(n*tau - x*sin(tau)) dtau.
// The integrand extends to an even 2*pi-periodic analytic function, so the
// trapezoid rule converges geometrically; m = 4096 is far beyond sufficient
// for x up to several hundred.
// ---------------------------------------------------------------------------
inline double bessel_j_oracle(int n, double x) {
  const int m = 4096;
  const double h = kPi / m;
  auto f = [&](double tau) { return std::cos(n * tau - x * std::sin(tau)); };
  double sum = 0.5 * (f(0.0) + f(kPi));
  for (int k = 1; k < m; ++k) sum += f(k * h);
  return sum * h / kPi;
}

// ---------------------------------------------------------------------------
// Quadratic objectives (value + gradient) for the risk functionals the
// closed-form solvers are supposed to minimize. Factors of 2 are kept
// explicit; the minimizer is unaffected but gradient checks are exact.
// ---------------------------------------------------------------------------
struct Quadratic {
  std::function<double(const VectorXd&)> value;
  std::function<VectorXd(const VectorXd&)> grad;
  Index dim = 0;
};

// ||Y - K a||^2 + lambda a' K a
inline Quadratic krls_objective(MatrixXd K, VectorXd Y, double lambda) {
  Quadratic q;
  q.dim = K.cols();
  q.value = [=](const VectorXd& a) {
    return (Y - K * a).squaredNorm() + lambda * a.dot(K * a);
  };
  q.grad = [=](const VectorXd& a) {
    return VectorXd(2.0 * (K * (K * a - Y)) + 2.0 * lambda * (K * a));
  };
  return q;
}

// (Y - K a)' V (Y - K a) + lambda a' K a
inline Quadratic vrisk_objective(MatrixXd K, MatrixXd V, VectorXd Y, double lambda) {
  Quadratic q;
  q.dim = K.cols();
  q.value = [=](const VectorXd& a) {
    const VectorXd r = Y - K * a;
    return r.dot(V * r) + lambda * a.dot(K * a);
  };
  q.grad = [=](const VectorXd& a) {
    return VectorXd(-2.0 * (K * (V * (Y - K * a))) + 2.0 * lambda * (K * a));
  };
  return q;
}

// ||KF KH a - Y||^2 + lambda a' KH a   (KF is n_l x n, KH is n x n)
inline Quadratic fredholm_objective(MatrixXd KF, MatrixXd KH, VectorXd Y, double lambda) {
  Quadratic q;
  q.dim = KH.cols();
  q.value = [=](const VectorXd& a) {
    return (KF * (KH * a) - Y).squaredNorm() + lambda * a.dot(KH * a);
  };
  q.grad = [=](const VectorXd& a) {
    return VectorXd(2.0 * (KH * (KF.transpose() * (KF * (KH * a) - Y))) +
                    2.0 * lambda * (KH * a));
  };
  return q;
}

// (KF K A)'(KF K A) - 2 (KF K A)' KD Y + lambda A' K A
inline Quadratic msdf_objective(MatrixXd KF, MatrixXd K, MatrixXd KD, VectorXd Y,
                                double lambda) {
  Quadratic q;
  q.dim = K.cols();
  q.value = [=](const VectorXd& A) {
    const VectorXd s = KF * (K * A);
    return s.squaredNorm() - 2.0 * s.dot(KD * Y) + lambda * A.dot(K * A);
  };
  q.grad = [=](const VectorXd& A) {
    return VectorXd(2.0 * (K * (KF.transpose() * (KF * (K * A)))) -
                    2.0 * (K * (KF.transpose() * (KD * Y))) +
                    2.0 * lambda * (K * A));
  };
  return q;
}

// sum_{i<n_l} (y_i - (K a)_i)^2 + (c1/n) (K a)' L (K a) + c2 a' K a
inline Quadratic laprls_objective(MatrixXd K, MatrixXd L, VectorXd Y, Index n_labeled,
                                  double c1, double c2) {
  Quadratic q;
  q.dim = K.cols();
  const double n = static_cast<double>(K.cols());
  q.value = [=](const VectorXd& a) {
    const VectorXd s = K * a;
    double fit = 0.0;
    for (Index i = 0; i < n_labeled; ++i) {
      const double r = Y[i] - s[i];
      fit += r * r;
    }
    return fit + (c1 / n) * s.dot(L * s) + c2 * a.dot(K * a);
  };
  q.grad = [=](const VectorXd& a) {
    const VectorXd s = K * a;
    VectorXd jr = VectorXd::Zero(K.rows());
    for (Index i = 0; i < n_labeled; ++i) jr[i] = s[i] - Y[i];
    return VectorXd(2.0 * (K * jr) + 2.0 * (c1 / n) * (K * (L * s)) +
                    2.0 * c2 * (K * a));
  };
  return q;
}

// ---------------------------------------------------------------------------
// Conjugate gradients with exact line search on a convex quadratic, using only
// gradient evaluations (Hessian-vector products come from gradient
// differences, so the oracle never touches the closed-form algebra).
// ---------------------------------------------------------------------------
inline VectorXd cg_minimize(const Quadratic& q, VectorXd x, double tol = 1e-12,
                            int max_iter = 0) {
  const Index n = q.dim;
  if (max_iter <= 0) max_iter = static_cast<int>(100 * n + 400);
  VectorXd g = q.grad(x);
  const double gnorm0 = std::max(1.0, g.norm());
  VectorXd d = -g;
  double g2 = g.squaredNorm();
  for (int it = 0; it < max_iter; ++it) {
    if (std::sqrt(g2) <= tol * gnorm0) break;
    const VectorXd Hd = q.grad(x + d) - g;
    const double dHd = d.dot(Hd);
    if (!(dHd > 0.0)) break;
    const double t = -g.dot(d) / dHd;
    x += t * d;
    const VectorXd g_new = g + t * Hd;
    const double g2_new = g_new.squaredNorm();
    d = -g_new + (g2_new / g2) * d;
    g = g_new;
    g2 = g2_new;
    if ((it + 1) % static_cast<int>(n + 1) == 0) d = -g; // periodic restart
  }
  return x;
}

// Central finite-difference gradient.
inline VectorXd fd_gradient(const std::function<double(const VectorXd&)>& f,
                            const VectorXd& x, double h = 1e-5) {
  VectorXd g(x.size());
  VectorXd xp = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double xi = x[i];
    xp[i] = xi + h;
    const double fp = f(xp);
    xp[i] = xi - h;
    const double fm = f(xp);
    xp[i] = xi;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double gradient_rel_error(const Quadratic& q, const VectorXd& x, double h = 1e-5) {
  const VectorXd ga = q.grad(x);
  const VectorXd gf = fd_gradient(q.value, x, h);
  const double denom = std::max({ga.norm(), gf.norm(), 1e-12});
  return (ga - gf).norm() / denom;
}

// ---------------------------------------------------------------------------
// Brute-force AUC: average over all positive/negative pairs, ties count 1/2.
// The running sum advances in exact 0.5 steps, so the final division matches
// the rank-based route bit for bit.
// ---------------------------------------------------------------------------
inline double brute_force_auc(const VectorXd& scores, const VectorXi& labels) {
  double wins = 0.0;
  long long pos = 0, neg = 0;
  for (Index i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg) += 1;
  for (Index i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1) continue;
    for (Index j = 0; j < labels.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

// ---------------------------------------------------------------------------
// Naive V-matrix builders: direct triple loops straight from the defining
// sums/products, no blocking, no reuse.
// ---------------------------------------------------------------------------
inline MatrixXd naive_uniform_v(const MatrixXd& X, const VectorXd& upper, bool additive) {
  const Index n = X.rows(), d = X.cols();
  MatrixXd V(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      double acc = additive ? 0.0 : 1.0;
      for (Index k = 0; k < d; ++k) {
        const double term = upper[k] - std::max(X(i, k), X(j, k));
        if (additive) acc += term;
        else acc *= term;
      }
      V(i, j) = acc;
    }
  }
  return V;
}

// Max form: sum_t prod_k step(x_t^k - max(x_i^k, x_j^k)).
inline MatrixXd naive_semi_indicator_v(const MatrixXd& X, const MatrixXd& anchors) {
  const Index n = X.rows(), m = anchors.rows(), d = X.cols();
  MatrixXd V(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      double sum = 0.0;
      for (Index t = 0; t < m; ++t) {
        double prod = 1.0;
        for (Index k = 0; k < d; ++k) {
          if (anchors(t, k) < std::max(X(i, k), X(j, k))) {
            prod = 0.0;
            break;
          }
        }
        sum += prod;
      }
      V(i, j) = sum;
    }
  }
  return V;
}

// Two-indicator product form: sum_t [prod_k step(x_t^k - x_i^k)] * [prod_k step(x_t^k - x_j^k)].
inline MatrixXd naive_semi_indicator_v_product(const MatrixXd& X, const MatrixXd& anchors) {
  const Index n = X.rows(), m = anchors.rows(), d = X.cols();
  auto dominated = [&](Index t, Index i) {
    for (Index k = 0; k < d; ++k) {
      if (anchors(t, k) < X(i, k)) return 0.0;
    }
    return 1.0;
  };
  MatrixXd V(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      double sum = 0.0;
      for (Index t = 0; t < m; ++t) sum += dominated(t, i) * dominated(t, j);
      V(i, j) = sum;
    }
  }
  return V;
}

inline MatrixXd naive_cdf_v(const MatrixXd& X) { return naive_semi_indicator_v(X, X); }

// sum_t exp(-(||x_t - x_i||^2 + ||x_t - x_j||^2) / sigma), t ascending.
inline MatrixXd naive_semi_gaussian_v(const MatrixXd& X, const MatrixXd& anchors,
                                      double sigma) {
  const Index n = X.rows(), m = anchors.rows();
  MatrixXd V(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      double sum = 0.0;
      for (Index t = 0; t < m; ++t) {
        const double di = (anchors.row(t) - X.row(i)).squaredNorm();
        const double dj = (anchors.row(t) - X.row(j)).squaredNorm();
        sum += std::exp(-(di + dj) / sigma);
      }
      V(i, j) = sum;
    }
  }
  return V;
}

// ---------------------------------------------------------------------------
// Synthetic data.
// ---------------------------------------------------------------------------
inline MatrixXd random_points(Index n, Index d, double lo, double hi, std::uint64_t seed) {
  fredholm::RandomStream rng{seed, 0xA11CE5ull};
  MatrixXd X(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) X(i, j) = rng.uniform(lo, hi);
  return X;
}

// Two spherical Gaussian classes centered at -+ separation/2 on the first axis.
inline MatrixXd gaussian_blobs(Index n, Index d, double separation, std::uint64_t seed,
                               VectorXi* labels_out) {
  fredholm::RandomStream rng{seed, 0xB10B5ull};
  MatrixXd X(n, d);
  VectorXi y(n);
  for (Index i = 0; i < n; ++i) {
    y[i] = static_cast<int>(i % 2);
    const double center = (y[i] == 1 ? 0.5 : -0.5) * separation;
    for (Index j = 0; j < d; ++j) X(i, j) = rng.normal() + (j == 0 ? center : 0.0);
  }
  if (labels_out) *labels_out = y;
  return X;
}

// ---------------------------------------------------------------------------
// Empirical-convergence oracle: (1/m) * semi_indicator_v with m uniform
// anchors should approach the uniform-measure integral
//   integral_{[0,1]^d} step(t - x_i) * step(t - x_j) dt,
// evaluated here by a dense midpoint-grid quadrature (factorized over
// dimensions, since both the integrand and the measure are products).
// ---------------------------------------------------------------------------
inline double uniform_box_integral(const MatrixXd& X, Index i, Index j, int grid) {
  double q = 1.0;
  for (Index k = 0; k < X.cols(); ++k) {
    const double lo = std::max(X(i, k), X(j, k));
    int count = 0;
    for (int g = 0; g < grid; ++g) {
      if ((g + 0.5) / grid >= lo) ++count;
    }
    q *= static_cast<double>(count) / grid;
  }
  return q;
}

struct ConvergenceErrors {
  double small_anchors = 0.0;
  double large_anchors = 0.0;
};

// Mean (over seeds) max-entry error of (1/m)*SIV against the quadrature
// oracle, at two anchor counts. Labeled points are fixed; anchors are the
// labeled prefix plus fresh uniform draws per seed.
inline ConvergenceErrors siv_convergence_errors(Index n_labeled, Index d,
                                                Index m_small, Index m_large,
                                                int n_seeds) {
  const MatrixXd X = random_points(n_labeled, d, 0.05, 0.95, 999);
  MatrixXd oracle(n_labeled, n_labeled);
  for (Index i = 0; i < n_labeled; ++i)
    for (Index j = 0; j < n_labeled; ++j)
      oracle(i, j) = uniform_box_integral(X, i, j, 4000);

  ConvergenceErrors out;
  for (int s = 0; s < n_seeds; ++s) {
    for (bool large : {false, true}) {
      const Index m = large ? m_large : m_small;
      MatrixXd anchors(m, d);
      anchors.topRows(n_labeled) = X;
      anchors.bottomRows(m - n_labeled) =
          random_points(m - n_labeled, d, 0.0, 1.0,
                        0x51D5EEDull + 1000 * static_cast<std::uint64_t>(s) + static_cast<std::uint64_t>(m));
      const fredholm::VMatrix v = fredholm::semi_indicator_v(X, anchors);
      const double err =
          ((v.values / static_cast<double>(m)) - oracle).cwiseAbs().maxCoeff();
      (large ? out.large_anchors : out.small_anchors) += err / n_seeds;
    }
  }
  return out;
}

inline double cond_number(const MatrixXd& A) {
  Eigen::JacobiSVD<MatrixXd> svd(A);
  const auto& s = svd.singularValues();
  const double smin = s[s.size() - 1];
  return smin > 0.0 ? s[0] / smin : std::numeric_limits<double>::infinity();
}

} // namespace testsupport
