#pragma once

// V-matrix builders. A V-matrix weights mutual products of residuals in the
// regression risk; entry (i,j) is the inner product of the two indicator (or
// Gaussian) functions anchored at labeled points i and j, taken under an
// empirical measure over anchor points.
//
// Kinds:
//  - uniform (and its additive variant): closed-form integral under the
//    uniform measure on the data's bounding box, V_ij = prod_k (C_k - max)
//    with C_k the labeled max of coordinate k.
//  - cdf: empirical-CDF measure over the labeled points themselves.
//  - semi-indicator / semi-gaussian: empirical measure over labeled plus
//    unlabeled anchors; the anchor set must contain the labeled points as its
//    prefix.
//  - identity: reduction device (turns the V-risk into plain least squares).
//
// No 1/n normalization is applied; scaling is absorbed by the regularization
// weight during model selection (scaling equivalence is tested on the solver).
//
// The semi_* builders are blocked (0/1 anchor matrix product for the
// indicator; cached squared distances for the Gaussian) but keep a fixed
// per-entry summation order, so their output is bitwise identical to the
// naive triple loop and independent of the parallel schedule.

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "fredholm/common.hpp"
#include "fredholm/kernels.hpp"

namespace fredholm {

enum class VMatrixKind {
  UniformIndicator,
  UniformIndicatorAdditive,
  CdfIndicator,
  SemiIndicator,
  SemiGaussian,
  Identity,
};

inline const char* vmatrix_kind_name(VMatrixKind k) {
  switch (k) {
    case VMatrixKind::UniformIndicator: return "uniform";
    case VMatrixKind::UniformIndicatorAdditive: return "uniform-additive";
    case VMatrixKind::CdfIndicator: return "cdf";
    case VMatrixKind::SemiIndicator: return "semi-indicator";
    case VMatrixKind::SemiGaussian: return "semi-gaussian";
    case VMatrixKind::Identity: return "identity";
  }
  throw std::invalid_argument("vmatrix_kind_name: unknown kind");
}

inline VMatrixKind vmatrix_kind_from_name(const std::string& name) {
  if (name == "uniform") return VMatrixKind::UniformIndicator;
  if (name == "uniform-additive") return VMatrixKind::UniformIndicatorAdditive;
  if (name == "cdf") return VMatrixKind::CdfIndicator;
  if (name == "semi-indicator") return VMatrixKind::SemiIndicator;
  if (name == "semi-gaussian") return VMatrixKind::SemiGaussian;
  if (name == "identity") return VMatrixKind::Identity;
  throw std::invalid_argument("unknown V-matrix kind: " + name);
}

struct VMatrixSpec {
  VMatrixKind kind = VMatrixKind::Identity;
  double sigma = 1.0; // SemiGaussian width; houses the squared width sigma^2
  std::string anchor_points; // identifier of the anchor set the matrix was built from
};

struct VMatrix {
  Eigen::MatrixXd values;
  VMatrixSpec spec;
  Eigen::Index n_labeled = 0;
  Eigen::Index n_anchors = 0;
};

namespace detail {

inline std::string anchor_id(Eigen::Index n_labeled, Eigen::Index n_anchors,
                             Eigen::Index d) {
  return "labeled=" + std::to_string(n_labeled) +
         ";anchors=" + std::to_string(n_anchors) + ";d=" + std::to_string(d);
}

inline void check_anchor_prefix(const Eigen::MatrixXd& labeled,
                                const Eigen::MatrixXd& anchors) {
  check_points(labeled, "v-matrix(labeled)");
  check_points(anchors, "v-matrix(anchors)");
  check_arg(labeled.cols() == anchors.cols(),
            "v-matrix: labeled and anchor points must share dimensionality");
  check_arg(anchors.rows() >= labeled.rows(),
            "v-matrix: anchor set must contain the labeled points");
  check_arg((anchors.topRows(labeled.rows()).array() == labeled.array()).all(),
            "v-matrix: anchor set must begin with the labeled points");
}

// 0/1 dominance matrix: phi(t,i) = 1 iff anchors.row(t) >= labeled.row(i)
// componentwise. Entries are exact small integers, so the blocked product
// phi' * phi below is bitwise identical to the naive triple loop.
inline Eigen::MatrixXd dominance_matrix(const Eigen::MatrixXd& labeled,
                                        const Eigen::MatrixXd& anchors) {
  const Eigen::Index m = anchors.rows(), n = labeled.rows(), d = labeled.cols();
  Eigen::MatrixXd phi(m, n);
  for (Eigen::Index t = 0; t < m; ++t) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double dominated = 1.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        if (anchors(t, k) < labeled(i, k)) {
          dominated = 0.0;
          break;
        }
      }
      phi(t, i) = dominated;
    }
  }
  return phi;
}

} // namespace detail

// Closed-form V under the uniform measure on the labeled bounding box:
// V_ij = prod_k (C_k - max(x_i^k, x_j^k)) with C_k = max_i x_i^k, or the sum
// over k in the additive variant.
inline VMatrix uniform_indicator_v(const Eigen::MatrixXd& labeled, bool additive = false) {
  detail::check_points(labeled, "uniform_indicator_v");
  const Eigen::Index n = labeled.rows(), d = labeled.cols();
  const Eigen::VectorXd upper = labeled.colwise().maxCoeff();
  VMatrix v;
  v.values.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      double acc = additive ? 0.0 : 1.0;
      for (Eigen::Index k = 0; k < d; ++k) {
        const double term = upper[k] - std::max(labeled(i, k), labeled(j, k));
        if (additive) acc += term;
        else acc *= term;
      }
      v.values(i, j) = acc;
      v.values(j, i) = acc;
    }
  }
  v.spec.kind = additive ? VMatrixKind::UniformIndicatorAdditive
                         : VMatrixKind::UniformIndicator;
  v.spec.anchor_points = detail::anchor_id(n, n, d);
  v.n_labeled = n;
  v.n_anchors = n;
  return v;
}

// Empirical measure over an explicit anchor set (labeled prefix + unlabeled):
// V_ij = sum_t prod_k step(x_t^k - max(x_i^k, x_j^k)).
inline VMatrix semi_indicator_v(const Eigen::MatrixXd& labeled,
                                const Eigen::MatrixXd& anchors) {
  detail::check_anchor_prefix(labeled, anchors);
  const Eigen::MatrixXd phi = detail::dominance_matrix(labeled, anchors);
  VMatrix v;
  v.values = phi.transpose() * phi;
  v.spec.kind = VMatrixKind::SemiIndicator;
  v.spec.anchor_points = detail::anchor_id(labeled.rows(), anchors.rows(), labeled.cols());
  v.n_labeled = labeled.rows();
  v.n_anchors = anchors.rows();
  return v;
}

// Empirical-CDF measure: anchors are the labeled points themselves.
inline VMatrix cdf_indicator_v(const Eigen::MatrixXd& labeled) {
  VMatrix v = semi_indicator_v(labeled, labeled);
  v.spec.kind = VMatrixKind::CdfIndicator;
  return v;
}

// Gaussian anchor functions: V_ij = sum_t exp(-(||x_t-x_i||^2 + ||x_t-x_j||^2)/sigma),
// summed in ascending anchor order per entry (bitwise-reproducible).
inline VMatrix semi_gaussian_v(const Eigen::MatrixXd& labeled,
                               const Eigen::MatrixXd& anchors, double sigma,
                               int jobs = 1) {
  detail::check_anchor_prefix(labeled, anchors);
  detail::check_arg(std::isfinite(sigma) && sigma > 0.0,
                    "semi_gaussian_v: sigma must be finite and > 0");
  const Eigen::Index m = anchors.rows(), n = labeled.rows();
  Eigen::MatrixXd dist(m, n);
  for (Eigen::Index t = 0; t < m; ++t)
    for (Eigen::Index i = 0; i < n; ++i)
      dist(t, i) = (anchors.row(t) - labeled.row(i)).squaredNorm();
  VMatrix v;
  v.values.resize(n, n);
  parallel_for(static_cast<std::size_t>(n), jobs, [&](std::size_t row) {
    const auto i = static_cast<Eigen::Index>(row);
    for (Eigen::Index j = 0; j <= i; ++j) {
      double sum = 0.0;
      for (Eigen::Index t = 0; t < m; ++t) {
        sum += std::exp(-(dist(t, i) + dist(t, j)) / sigma);
      }
      v.values(i, j) = sum;
      v.values(j, i) = sum;
    }
  });
  v.spec.kind = VMatrixKind::SemiGaussian;
  v.spec.sigma = sigma;
  v.spec.anchor_points = detail::anchor_id(n, m, labeled.cols());
  v.n_labeled = n;
  v.n_anchors = m;
  return v;
}

inline VMatrix identity_v(Eigen::Index n_labeled) {
  detail::check_arg(n_labeled >= 1, "identity_v: n_labeled must be >= 1");
  VMatrix v;
  v.values = Eigen::MatrixXd::Identity(n_labeled, n_labeled);
  v.spec.kind = VMatrixKind::Identity;
  v.spec.anchor_points = detail::anchor_id(n_labeled, n_labeled, 0);
  v.n_labeled = n_labeled;
  v.n_anchors = n_labeled;
  return v;
}

} // namespace fredholm
