#pragma once

// Ranking and decision metrics.

#include <algorithm>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "fredholm/common.hpp"

namespace fredholm {

namespace detail {

inline void check_binary_labels(const Eigen::VectorXi& labels, const char* what) {
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    check_arg(labels[i] == 0 || labels[i] == 1,
              std::string(what) + ": labels must be 0 or 1");
  }
}

} // namespace detail

// Mann-Whitney AUC: the fraction of (positive, negative) pairs where the
// positive outscores the negative, ties counting 1/2. Computed from midranks
// kept as doubled integers, so the single final division reproduces the
// all-pairs enumeration bit for bit.
inline double auc(const Eigen::VectorXd& scores, const Eigen::VectorXi& labels) {
  const Eigen::Index n = scores.size();
  detail::check_arg(n > 0 && labels.size() == n,
                    "auc: scores and labels must be non-empty and same length");
  detail::check_arg(scores.allFinite(), "auc: scores must be finite");
  detail::check_binary_labels(labels, "auc");
  long long pos = 0;
  for (Eigen::Index i = 0; i < n; ++i) pos += labels[i];
  const long long neg = static_cast<long long>(n) - pos;
  detail::check_arg(pos > 0 && neg > 0, "auc: both classes must be present");

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return scores[a] < scores[b];
  });

  // Tie group occupying ranks r+1..r+g has doubled midrank 2r + g + 1,
  // an exact integer.
  double doubled_rank_sum_pos = 0.0;
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double doubled = 2.0 * static_cast<double>(i) + static_cast<double>(j - i) + 1.0;
    for (Eigen::Index k = i; k < j; ++k) {
      if (labels[order[k]] == 1) doubled_rank_sum_pos += doubled;
    }
    i = j;
  }
  const double p = static_cast<double>(pos), m = static_cast<double>(neg);
  return (doubled_rank_sum_pos - p * (p + 1.0)) / (2.0 * p * m);
}

// Fraction of correct decisions under the rule: score >= threshold -> class 1.
inline double accuracy(const Eigen::VectorXd& scores, const Eigen::VectorXi& labels,
                       double threshold = 0.5) {
  const Eigen::Index n = scores.size();
  detail::check_arg(n > 0 && labels.size() == n,
                    "accuracy: scores and labels must be non-empty and same length");
  detail::check_arg(scores.allFinite(), "accuracy: scores must be finite");
  detail::check_binary_labels(labels, "accuracy");
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int decision = scores[i] >= threshold ? 1 : 0;
    if (decision == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

} // namespace fredholm
