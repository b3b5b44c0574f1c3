#pragma once

// Kernel families and Gram-matrix construction.
//
// Conventions:
//  - Widths multiply the distance: gaussian is exp(-sigma*||x-y||^2),
//    laplacian is exp(-sigma*||x-y||).
//  - bessel(x,y) = J_{order+1}(sigma*r) / r^(exponent*(order+1)) with
//    r = ||x-y||; at r -> 0 the series limit is finite only for exponent == 1,
//    otherwise the kernel is evaluated at a small floor radius (see below).
//  - anova(x,y) = (sum_h exp(-sigma*(x_h-y_h)^2))^degree.
//  - indicator(x,y) = prod_h step(x_h - y_h) with step(z) = 1 for z >= 0.
//    This family is directional: k(x,y) != k(y,x) in general.

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "fredholm/common.hpp"

namespace fredholm {

enum class KernelFamily { GaussianRBF, Laplacian, Bessel, AnovaRBF, IndicatorStep };

inline const char* family_name(KernelFamily f) {
  switch (f) {
    case KernelFamily::GaussianRBF: return "gaussian";
    case KernelFamily::Laplacian: return "laplacian";
    case KernelFamily::Bessel: return "bessel";
    case KernelFamily::AnovaRBF: return "anova";
    case KernelFamily::IndicatorStep: return "indicator";
  }
  throw std::invalid_argument("family_name: unknown kernel family");
}

inline KernelFamily family_from_name(const std::string& name) {
  if (name == "gaussian") return KernelFamily::GaussianRBF;
  if (name == "laplacian") return KernelFamily::Laplacian;
  if (name == "bessel") return KernelFamily::Bessel;
  if (name == "anova") return KernelFamily::AnovaRBF;
  if (name == "indicator") return KernelFamily::IndicatorStep;
  throw std::invalid_argument("unknown kernel family name: " + name);
}

struct KernelSpec {
  KernelFamily family = KernelFamily::GaussianRBF;
  double sigma = 1.0;       // width factor (multiplies the distance)
  int degree = 2;           // anova outer power D >= 1
  int order = 0;            // bessel order parameter nu >= 0
  int bessel_exponent = 1;  // bessel denominator exponent n >= 1

  void validate() const {
    detail::check_arg(std::isfinite(sigma) && sigma > 0.0,
                      "KernelSpec: sigma must be finite and > 0");
    detail::check_arg(degree >= 1, "KernelSpec: degree must be >= 1");
    detail::check_arg(order >= 0, "KernelSpec: order must be >= 0");
    detail::check_arg(bessel_exponent >= 1, "KernelSpec: bessel_exponent must be >= 1");
  }

  bool symmetric() const { return family != KernelFamily::IndicatorStep; }

  // Stable text id used in logs and deterministic tie-breaking.
  std::string id() const {
    std::string s = family_name(family);
    s += "(sigma=" + fmt_double(sigma);
    if (family == KernelFamily::AnovaRBF) s += ",degree=" + std::to_string(degree);
    if (family == KernelFamily::Bessel) {
      s += ",order=" + std::to_string(order);
      s += ",exponent=" + std::to_string(bessel_exponent);
    }
    s += ")";
    return s;
  }

  // Total order (family, then parameters); used for deterministic tie-breaks.
  friend bool operator<(const KernelSpec& a, const KernelSpec& b) {
    auto key = [](const KernelSpec& k) {
      return std::make_tuple(static_cast<int>(k.family), k.sigma, k.degree,
                             k.order, k.bessel_exponent);
    };
    return key(a) < key(b);
  }
  friend bool operator==(const KernelSpec& a, const KernelSpec& b) {
    return a.family == b.family && a.sigma == b.sigma && a.degree == b.degree &&
           a.order == b.order && a.bessel_exponent == b.bessel_exponent;
  }
};

namespace detail {

// Radius below which the bessel kernel switches to its r -> 0 rule. For
// exponent == 1 the limit (sigma/2)^(order+1) / Gamma(order+2) is exact; for
// exponent >= 2 the kernel diverges at 0 and is clamped to its value at the
// floor radius, keeping Gram entries finite for duplicated points.
inline constexpr double kBesselRadiusFloor = 1e-8;

inline double bessel_value(const KernelSpec& spec, double r) {
  const double nu1 = static_cast<double>(spec.order + 1);
  if (r < kBesselRadiusFloor) {
    if (spec.bessel_exponent == 1) {
      return std::pow(spec.sigma / 2.0, nu1) / std::tgamma(nu1 + 1.0);
    }
    r = kBesselRadiusFloor;
  }
  const double denom = std::pow(r, static_cast<double>(spec.bessel_exponent) * nu1);
  return std::cyl_bessel_j(nu1, spec.sigma * r) / denom;
}

// Integer power by repeated multiplication (degree is small).
inline double int_pow(double base, int e) {
  double acc = 1.0;
  for (int i = 0; i < e; ++i) acc *= base;
  return acc;
}

// Kernel evaluation without argument validation; x and y must be same-length
// finite vectors and spec must be valid.
template <typename VecA, typename VecB>
double eval_kernel_unchecked(const KernelSpec& spec, const VecA& x, const VecB& y) {
  switch (spec.family) {
    case KernelFamily::GaussianRBF:
      return std::exp(-spec.sigma * (x - y).squaredNorm());
    case KernelFamily::Laplacian:
      return std::exp(-spec.sigma * (x - y).norm());
    case KernelFamily::Bessel:
      return bessel_value(spec, (x - y).norm());
    case KernelFamily::AnovaRBF: {
      double sum = 0.0;
      for (Eigen::Index h = 0; h < x.size(); ++h) {
        const double d = x[h] - y[h];
        sum += std::exp(-spec.sigma * d * d);
      }
      return int_pow(sum, spec.degree);
    }
    case KernelFamily::IndicatorStep: {
      for (Eigen::Index h = 0; h < x.size(); ++h) {
        if (x[h] < y[h]) return 0.0;
      }
      return 1.0;
    }
  }
  throw std::invalid_argument("eval_kernel: unknown kernel family");
}

inline void check_points(const Eigen::MatrixXd& points, const char* what) {
  check_arg(points.rows() > 0 && points.cols() > 0,
            std::string(what) + ": point set must be non-empty");
  check_arg(points.allFinite(), std::string(what) + ": points must be finite");
}

} // namespace detail

// Single kernel evaluation with full validation.
inline double eval_kernel(const KernelSpec& spec, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& y) {
  spec.validate();
  detail::check_arg(x.size() > 0 && x.size() == y.size(),
                    "eval_kernel: x and y must be non-empty and same length");
  detail::check_arg(x.allFinite() && y.allFinite(),
                    "eval_kernel: inputs must be finite");
  return detail::eval_kernel_unchecked(spec, x, y);
}

// Gram matrix values[i][j] = k(rows[i], cols[j]) plus the spec and the point
// sets it was built from.
struct GramMatrix {
  Eigen::MatrixXd values;
  Eigen::MatrixXd row_points;
  Eigen::MatrixXd col_points;
  KernelSpec spec;
};

inline GramMatrix gram(const KernelSpec& spec, const Eigen::MatrixXd& rows,
                       const Eigen::MatrixXd& cols, int jobs = 1) {
  spec.validate();
  detail::check_points(rows, "gram(rows)");
  detail::check_points(cols, "gram(cols)");
  detail::check_arg(rows.cols() == cols.cols(),
                    "gram: row and col point sets must share dimensionality");
  GramMatrix g;
  g.values.resize(rows.rows(), cols.rows());
  parallel_for(static_cast<std::size_t>(rows.rows()), jobs, [&](std::size_t i) {
    const auto xi = rows.row(static_cast<Eigen::Index>(i));
    for (Eigen::Index j = 0; j < cols.rows(); ++j) {
      g.values(static_cast<Eigen::Index>(i), j) =
          detail::eval_kernel_unchecked(spec, xi, cols.row(j));
    }
  });
  detail::check_state(g.values.allFinite(), "gram: produced a non-finite entry");
  g.row_points = rows;
  g.col_points = cols;
  g.spec = spec;
  return g;
}

inline GramMatrix gram(const KernelSpec& spec, const Eigen::MatrixXd& points,
                       int jobs = 1) {
  return gram(spec, points, points, jobs);
}

} // namespace fredholm
