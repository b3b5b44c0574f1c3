#pragma once

// Repeated stratified k-fold cross-validation and exhaustive grid search over
// methods x kernels x parameters.
//
// Method map:
//   krls  kernel ridge regression on the labeled training portion
//   iv    V-risk with the empirical-CDF indicator V built on labeled data
//   gv    V-risk with the Gaussian V built on labeled data only
//   siv   V-risk with the indicator V over labeled + unlabeled anchors
//   sgv   V-risk with the Gaussian V over labeled + unlabeled anchors
//   fred  Fredholm regularization; operator and hypothesis kernels share the
//         cell's kernel spec, expansion over labeled + unlabeled points
//   mr    manifold regularization (LapRLS); graph weights are Gaussian with
//         the cell kernel's width, c2 = lambda, c1 from its own grid
//   msdf  model selection via distribution fitting: operator x data kernel
//         grid (the M_ij table) with the cell kernel as hypothesis space
//
// Every fold refits the z-score normalizer on its labeled training portion
// and applies it to the held-out and unlabeled points. The unlabeled pool is
// available to the semi-supervised methods in every fold (anchors = labeled
// training points first, then unlabeled) and never participates in metrics.
//
// Metrics: AUC on raw scores, accuracy at 0.5. When every held-out fold of a
// repeat contains both classes, AUC/accuracy are recorded per fold; otherwise
// that repeat's held-out scores are pooled into a single record (fold = -1),
// which also covers leave-one-out. Repeats whose training portions would be
// single-class are re-seeded once, then reported as errors.
//
// Determinism: fold assignments derive from (seed, repeat, attempt); fits are
// deterministic; repeat x fold contexts write to preassigned slots, so results
// are bitwise identical under any --jobs setting.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fredholm/common.hpp"
#include "fredholm/dataset.hpp"
#include "fredholm/kernels.hpp"
#include "fredholm/metrics.hpp"
#include "fredholm/solvers.hpp"
#include "fredholm/vmatrix.hpp"

namespace fredholm {

enum class Method { Krls, Iv, Gv, Siv, Sgv, Fred, Mr, Msdf };

inline const char* method_name(Method m) {
  switch (m) {
    case Method::Krls: return "krls";
    case Method::Iv: return "iv";
    case Method::Gv: return "gv";
    case Method::Siv: return "siv";
    case Method::Sgv: return "sgv";
    case Method::Fred: return "fred";
    case Method::Mr: return "mr";
    case Method::Msdf: return "msdf";
  }
  throw std::invalid_argument("method_name: unknown method");
}

inline Method method_from_name(const std::string& name) {
  for (Method m : {Method::Krls, Method::Iv, Method::Gv, Method::Siv, Method::Sgv,
                   Method::Fred, Method::Mr, Method::Msdf}) {
    if (name == method_name(m)) return m;
  }
  throw std::invalid_argument("unknown method: " + name);
}

inline bool method_uses_unlabeled(Method m) {
  return m == Method::Siv || m == Method::Sgv || m == Method::Fred ||
         m == Method::Mr || m == Method::Msdf;
}

struct CvSettings {
  int repeats = 10;
  int folds = 5;
};

struct ExperimentConfig {
  Method method = Method::Krls;
  std::vector<KernelSpec> kernel_grid;           // target / hypothesis kernel
  std::vector<KernelSpec> operator_kernel_grid;  // msdf only
  std::vector<KernelSpec> data_kernel_grid;      // msdf only
  std::vector<double> lambda_grid;               // lambda (c2 for mr)
  std::vector<double> mr_c1_grid;                // mr only
  std::vector<double> sigma_v_grid;              // gv/sgv squared width
  CvSettings cv;
  std::uint64_t seed = 0;
  SplitProportions split;
};

// Log-spaced decades 1e-4 .. 1e2.
inline std::vector<double> default_lambda_grid() {
  return {1e-4, 1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2};
}

struct GridCell {
  KernelSpec kernel;
  std::optional<KernelSpec> operator_kernel; // msdf
  std::optional<KernelSpec> data_kernel;     // msdf
  double lambda = 1.0;
  std::optional<double> c1;                  // mr
  std::optional<double> sigma_v;             // gv/sgv

  std::string id() const {
    std::string s = "kernel=" + kernel.id();
    if (operator_kernel) s += ";operator=" + operator_kernel->id();
    if (data_kernel) s += ";data=" + data_kernel->id();
    s += ";lambda=" + fmt_double(lambda);
    if (c1) s += ";c1=" + fmt_double(*c1);
    if (sigma_v) s += ";sigma_v=" + fmt_double(*sigma_v);
    return s;
  }

  // Tie-break sort key: (operator, data) kernel ids, then the target kernel.
  std::string kernel_sort_key() const {
    return (operator_kernel ? operator_kernel->id() : kernel.id()) + "|" +
           (data_kernel ? data_kernel->id() : std::string()) + "|" + kernel.id();
  }
};

struct FoldScore {
  int repeat = 0;
  int fold = 0; // -1 for a pooled-repeat record
  double auc = 0.0;
  double accuracy = 0.0;
};

struct CellResult {
  GridCell cell;
  std::vector<FoldScore> scores;
  double mean_auc = 0.0;
  double mean_accuracy = 0.0;
  // Contexts in which the cell's linear system was numerically singular. A
  // cell that failed anywhere is excluded from selection (its surviving fold
  // scores are kept for inspection, but means over differing fold subsets are
  // not comparable).
  int failed_contexts = 0;

  bool failed() const { return failed_contexts > 0; }
};

struct CVResult {
  Method method = Method::Krls;
  std::vector<CellResult> cells;
  std::size_t best_index = 0;
  Eigen::Index n_labeled = 0;
  Eigen::Index n_unlabeled = 0;

  const CellResult& best_cell() const {
    detail::check_state(best_index < cells.size(), "CVResult: empty result");
    return cells[best_index];
  }
};

// Selection rule shared by every evaluation mode: max mean AUC among cells
// that completed every context; ties broken toward the larger lambda
// (stronger regularization), then the lexicographically smaller kernel sort
// key, then the earlier cell. Errors if every cell failed.
inline std::size_t select_best_index(const std::vector<CellResult>& cells) {
  detail::check_arg(!cells.empty(), "select_best_index: no cells");
  std::size_t best = cells.size();
  for (std::size_t c = 0; c < cells.size(); ++c) {
    if (cells[c].failed()) continue;
    if (best == cells.size()) {
      best = c;
      continue;
    }
    const CellResult& a = cells[c];
    const CellResult& b = cells[best];
    bool better = false;
    if (a.mean_auc != b.mean_auc) {
      better = a.mean_auc > b.mean_auc;
    } else if (a.cell.lambda != b.cell.lambda) {
      better = a.cell.lambda > b.cell.lambda;
    } else {
      better = a.cell.kernel_sort_key() < b.cell.kernel_sort_key();
    }
    if (better) best = c;
  }
  detail::check_state(best < cells.size(),
                      "select_best_index: every grid cell failed as numerically "
                      "singular");
  return best;
}

namespace detail {

inline void check_positive_grid(const std::vector<double>& grid, const char* what) {
  check_arg(!grid.empty(), std::string(what) + " must be non-empty");
  for (const double v : grid)
    check_arg(std::isfinite(v) && v > 0.0, std::string(what) + " entries must be > 0");
}

} // namespace detail

inline void validate_config(const ExperimentConfig& config) {
  detail::check_arg(!config.kernel_grid.empty(), "config: kernel_grid must be non-empty");
  for (const KernelSpec& k : config.kernel_grid) k.validate();
  detail::check_positive_grid(config.lambda_grid, "config: lambda_grid");
  detail::check_arg(config.cv.repeats >= 1, "config: cv repeats must be >= 1");
  detail::check_arg(config.cv.folds >= 2, "config: cv folds must be >= 2");
  if (config.method == Method::Msdf) {
    detail::check_arg(!config.operator_kernel_grid.empty() &&
                          !config.data_kernel_grid.empty(),
                      "config: msdf needs operator and data kernel grids");
    for (const KernelSpec& k : config.operator_kernel_grid) k.validate();
    for (const KernelSpec& k : config.data_kernel_grid) k.validate();
  }
  if (config.method == Method::Mr) {
    detail::check_arg(!config.mr_c1_grid.empty(), "config: mr needs a c1 grid");
    for (const double v : config.mr_c1_grid)
      detail::check_arg(std::isfinite(v) && v >= 0.0, "config: c1 entries must be >= 0");
  }
  if (config.method == Method::Gv || config.method == Method::Sgv) {
    detail::check_positive_grid(config.sigma_v_grid, "config: sigma_v_grid");
  }
}

// Cartesian expansion in a fixed deterministic order.
inline std::vector<GridCell> expand_grid(const ExperimentConfig& config) {
  validate_config(config);
  std::vector<GridCell> cells;
  for (const KernelSpec& kernel : config.kernel_grid) {
    switch (config.method) {
      case Method::Msdf:
        for (const KernelSpec& op : config.operator_kernel_grid) {
          for (const KernelSpec& data : config.data_kernel_grid) {
            for (const double lambda : config.lambda_grid) {
              GridCell c;
              c.kernel = kernel;
              c.operator_kernel = op;
              c.data_kernel = data;
              c.lambda = lambda;
              cells.push_back(c);
            }
          }
        }
        break;
      case Method::Mr:
        for (const double lambda : config.lambda_grid) {
          for (const double c1 : config.mr_c1_grid) {
            GridCell c;
            c.kernel = kernel;
            c.lambda = lambda;
            c.c1 = c1;
            cells.push_back(c);
          }
        }
        break;
      case Method::Gv:
      case Method::Sgv:
        for (const double lambda : config.lambda_grid) {
          for (const double sv : config.sigma_v_grid) {
            GridCell c;
            c.kernel = kernel;
            c.lambda = lambda;
            c.sigma_v = sv;
            cells.push_back(c);
          }
        }
        break;
      default:
        for (const double lambda : config.lambda_grid) {
          GridCell c;
          c.kernel = kernel;
          c.lambda = lambda;
          cells.push_back(c);
        }
    }
  }
  return cells;
}

namespace detail {

// Per-context cache of Gram matrices, V-matrices, and Laplacians so grid
// cells sharing a kernel spec reuse the expensive builds. One workspace per
// (repeat, fold) context; never shared across threads.
struct FitWorkspace {
  Eigen::MatrixXd Xt;      // labeled training portion (normalized)
  Eigen::VectorXd Yt;      // responses for Xt
  Eigen::MatrixXd Xh;      // scoring points (normalized)
  Eigen::MatrixXd anchors; // [Xt; unlabeled], normalized

  std::map<std::string, GramMatrix> grams;
  std::map<std::string, VMatrix> vmats;
  std::map<std::string, LaplacianMatrix> laps;

  const GramMatrix& gram_for(const char* role, const KernelSpec& spec,
                             const Eigen::MatrixXd& rows, const Eigen::MatrixXd& cols) {
    const std::string key = std::string(role) + "|" + spec.id();
    auto it = grams.find(key);
    if (it == grams.end()) it = grams.emplace(key, gram(spec, rows, cols)).first;
    return it->second;
  }

  const VMatrix& vmatrix_for(Method method, const std::optional<double>& sigma_v) {
    std::string key = method_name(method);
    if (sigma_v) key += "|" + fmt_double(*sigma_v);
    auto it = vmats.find(key);
    if (it == vmats.end()) {
      VMatrix v;
      switch (method) {
        case Method::Iv: v = cdf_indicator_v(Xt); break;
        case Method::Gv: v = semi_gaussian_v(Xt, Xt, *sigma_v); break;
        case Method::Siv: v = semi_indicator_v(Xt, anchors); break;
        case Method::Sgv: v = semi_gaussian_v(Xt, anchors, *sigma_v); break;
        default: throw std::invalid_argument("vmatrix_for: not a V-matrix method");
      }
      it = vmats.emplace(key, std::move(v)).first;
    }
    return it->second;
  }

  const LaplacianMatrix& laplacian_for(double sigma) {
    const std::string key = fmt_double(sigma);
    auto it = laps.find(key);
    if (it == laps.end()) {
      LaplacianWeights w;
      w.kernel.family = KernelFamily::GaussianRBF;
      w.kernel.sigma = sigma;
      it = laps.emplace(key, graph_laplacian(anchors, w)).first;
    }
    return it->second;
  }
};

struct CellFit {
  Eigen::VectorXd alpha;
  double penalty = 0.0;                  // alpha' K alpha with the method's penalty gram
  const GramMatrix* score_gram = nullptr; // cross-gram onto the scoring points
};

// Fit one grid cell; scores follow as score_gram->values * alpha.
inline CellFit fit_cell(Method method, const GridCell& cell, FitWorkspace& ws) {
  CellFit fit;
  switch (method) {
    case Method::Krls: {
      const GramMatrix& K = ws.gram_for("tt", cell.kernel, ws.Xt, ws.Xt);
      fit.alpha = solve_krls(K, ws.Yt, cell.lambda).alpha;
      fit.penalty = fit.alpha.dot(K.values * fit.alpha);
      fit.score_gram = &ws.gram_for("ht", cell.kernel, ws.Xh, ws.Xt);
      return fit;
    }
    case Method::Iv:
    case Method::Gv:
    case Method::Siv:
    case Method::Sgv: {
      const GramMatrix& K = ws.gram_for("tt", cell.kernel, ws.Xt, ws.Xt);
      const VMatrix& V = ws.vmatrix_for(method, cell.sigma_v);
      fit.alpha = solve_vrisk(K, V, ws.Yt, cell.lambda).alpha;
      fit.penalty = fit.alpha.dot(K.values * fit.alpha);
      fit.score_gram = &ws.gram_for("ht", cell.kernel, ws.Xh, ws.Xt);
      return fit;
    }
    case Method::Fred: {
      const GramMatrix& KF = ws.gram_for("ta", cell.kernel, ws.Xt, ws.anchors);
      const GramMatrix& KH = ws.gram_for("aa", cell.kernel, ws.anchors, ws.anchors);
      fit.alpha = solve_fredholm(KF, KH, ws.Yt, cell.lambda).alpha;
      fit.penalty = fit.alpha.dot(KH.values * fit.alpha);
      fit.score_gram = &ws.gram_for("ha", cell.kernel, ws.Xh, ws.anchors);
      return fit;
    }
    case Method::Mr: {
      const GramMatrix& K = ws.gram_for("aa", cell.kernel, ws.anchors, ws.anchors);
      const LaplacianMatrix& L = ws.laplacian_for(cell.kernel.sigma);
      fit.alpha = solve_laprls(K, L, ws.Yt, *cell.c1, cell.lambda).alpha;
      fit.penalty = fit.alpha.dot(K.values * fit.alpha);
      fit.score_gram = &ws.gram_for("ha", cell.kernel, ws.Xh, ws.anchors);
      return fit;
    }
    case Method::Msdf: {
      const GramMatrix& KF = ws.gram_for("ta", *cell.operator_kernel, ws.Xt, ws.anchors);
      const GramMatrix& K = ws.gram_for("aa", cell.kernel, ws.anchors, ws.anchors);
      const GramMatrix& KD = ws.gram_for("tt", *cell.data_kernel, ws.Xt, ws.Xt);
      fit.alpha = solve_msdf(KF, K, KD, ws.Yt, cell.lambda).alpha;
      fit.penalty = fit.alpha.dot(K.values * fit.alpha);
      fit.score_gram = &ws.gram_for("ha", cell.kernel, ws.Xh, ws.anchors);
      return fit;
    }
  }
  throw std::invalid_argument("fit_cell: unknown method");
}

// Raw held-out scores for one grid cell.
inline Eigen::VectorXd fit_and_score_cell(Method method, const GridCell& cell,
                                          FitWorkspace& ws) {
  const CellFit fit = fit_cell(method, cell, ws);
  return fit.score_gram->values * fit.alpha;
}

// Scores for every cell in one context; a size-0 vector marks a cell whose
// linear system was numerically singular in this context (extreme grid
// corners must not abort the whole search). MSDF groups cells that share
// (kernel, operator, lambda) so the LU factorization is reused across the
// data-kernel axis; results are identical to the per-cell route because the
// factored matrix and the solve path are the same.
inline std::vector<Eigen::VectorXd> score_all_cells(Method method,
                                                    const std::vector<GridCell>& cells,
                                                    FitWorkspace& ws) {
  std::vector<Eigen::VectorXd> scores(cells.size());
  if (method != Method::Msdf) {
    for (std::size_t c = 0; c < cells.size(); ++c) {
      try {
        scores[c] = fit_and_score_cell(method, cells[c], ws);
      } catch (const SingularSystemError&) {
        scores[c] = Eigen::VectorXd();
      }
    }
    return scores;
  }
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    groups[cells[c].kernel.id() + "|" + cells[c].operator_kernel->id() + "|" +
           fmt_double(cells[c].lambda)]
        .push_back(c);
  }
  for (const auto& [key, members] : groups) {
    (void)key;
    const GridCell& head = cells[members.front()];
    const GramMatrix& KF = ws.gram_for("ta", *head.operator_kernel, ws.Xt, ws.anchors);
    const GramMatrix& K = ws.gram_for("aa", head.kernel, ws.anchors, ws.anchors);
    const Eigen::Index n = K.values.rows();
    const Eigen::MatrixXd M = KF.values.transpose() * KF.values * K.values +
                              head.lambda * Eigen::MatrixXd::Identity(n, n);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
    if (lu.rcond() < 1e-15) continue;  // whole group singular: size-0 scores
    const GramMatrix& scoring = ws.gram_for("ha", head.kernel, ws.Xh, ws.anchors);
    for (const std::size_t c : members) {
      const GramMatrix& KD = ws.gram_for("tt", *cells[c].data_kernel, ws.Xt, ws.Xt);
      const Eigen::VectorXd alpha =
          lu.solve(KF.values.transpose() * (KD.values * ws.Yt));
      if (!alpha.allFinite()) continue;  // size-0 marks the failed cell
      scores[c] = scoring.values * alpha;
    }
  }
  return scores;
}

} // namespace detail

// Evaluation engine shared by cross-validation, test-set evaluation, and the
// stability sweep: fit every cell on (X_train, Y) with the given unlabeled
// pool and return raw scores for X_score. Inputs are un-normalized; the
// z-score normalizer is fit on X_train here.
inline std::vector<Eigen::VectorXd> evaluate_cells(
    Method method, const std::vector<GridCell>& cells, const Eigen::MatrixXd& X_train,
    const Eigen::VectorXi& y_train, const Eigen::MatrixXd& X_unlabeled,
    const Eigen::MatrixXd& X_score) {
  detail::check_arg(X_train.rows() == y_train.size(),
                    "evaluate_cells: feature/label size mismatch");
  detail::FitWorkspace ws;
  const Normalizer norm = fit_normalizer(X_train);
  ws.Xt = apply_normalizer(norm, X_train);
  ws.Yt = y_train.cast<double>();
  ws.Xh = apply_normalizer(norm, X_score);
  if (X_unlabeled.rows() > 0 && method_uses_unlabeled(method)) {
    ws.anchors.resize(ws.Xt.rows() + X_unlabeled.rows(), ws.Xt.cols());
    ws.anchors.topRows(ws.Xt.rows()) = ws.Xt;
    ws.anchors.bottomRows(X_unlabeled.rows()) = apply_normalizer(norm, X_unlabeled);
  } else {
    ws.anchors = ws.Xt;
  }
  return detail::score_all_cells(method, cells, ws);
}

namespace detail {

struct FoldPlan {
  std::vector<int> assignment; // fold id per labeled item
  bool pooled = false;         // some held-out fold is single-class
};

inline FoldPlan plan_repeat_folds(const Eigen::VectorXi& labels, const CvSettings& cv,
                                  std::uint64_t seed, int repeat) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    RandomStream rng{seed, 0x4B464F4C44ull, static_cast<std::uint64_t>(repeat),
                     static_cast<std::uint64_t>(attempt)};
    FoldPlan plan;
    plan.assignment = stratified_folds(labels, cv.folds, rng);
    bool training_ok = true;
    plan.pooled = false;
    for (int f = 0; f < cv.folds && training_ok; ++f) {
      int train_pos = 0, train_neg = 0, held_pos = 0, held_neg = 0;
      for (Eigen::Index i = 0; i < labels.size(); ++i) {
        const bool held = plan.assignment[static_cast<std::size_t>(i)] == f;
        (held ? (labels[i] == 1 ? held_pos : held_neg)
              : (labels[i] == 1 ? train_pos : train_neg)) += 1;
      }
      if (train_pos == 0 || train_neg == 0) training_ok = false;
      if (held_pos == 0 || held_neg == 0) plan.pooled = true;
    }
    if (training_ok) return plan;
  }
  throw std::runtime_error(
      "kfold_cv: single-class training portion persists after one re-seed (repeat " +
      std::to_string(repeat) + ")");
}

} // namespace detail

// Repeated stratified k-fold CV of the full grid on the dataset. The
// labeled/unlabeled split happens inside (test indices are left untouched);
// see the header comment for the fold, normalization, and pooling rules.
inline CVResult kfold_cv(const ExperimentConfig& config, const Dataset& ds,
                         int jobs = 1) {
  const std::vector<GridCell> cells = expand_grid(config);
  const DataSplit split = split_dataset(ds, config.split, config.seed);
  const Eigen::MatrixXd X_l = take_rows(ds.features, split.labeled_idx);
  const Eigen::VectorXi y_l = take_labels(ds.labels, split.labeled_idx);
  const Eigen::MatrixXd X_u = take_rows(ds.features, split.unlabeled_idx);

  const int repeats = config.cv.repeats;
  const int folds = config.cv.folds;
  std::vector<detail::FoldPlan> plans;
  plans.reserve(static_cast<std::size_t>(repeats));
  for (int r = 0; r < repeats; ++r) {
    plans.push_back(detail::plan_repeat_folds(y_l, config.cv, config.seed, r));
  }

  // parallel over (repeat, fold) contexts; each writes only its own slot
  const auto n_contexts = static_cast<std::size_t>(repeats * folds);
  std::vector<std::vector<Eigen::VectorXd>> context_scores(n_contexts);
  std::vector<std::vector<Eigen::Index>> context_held(n_contexts);
  parallel_for(n_contexts, jobs, [&](std::size_t ctx) {
    const int r = static_cast<int>(ctx) / folds;
    const int f = static_cast<int>(ctx) % folds;
    std::vector<Eigen::Index> train_rows, held_rows;
    for (Eigen::Index i = 0; i < y_l.size(); ++i) {
      (plans[static_cast<std::size_t>(r)].assignment[static_cast<std::size_t>(i)] == f
           ? held_rows
           : train_rows)
          .push_back(i);
    }
    context_held[ctx] = held_rows;
    if (held_rows.empty()) return; // k > class spread can leave a fold empty
    context_scores[ctx] =
        evaluate_cells(config.method, cells, take_rows(X_l, train_rows),
                       take_labels(y_l, train_rows), X_u, take_rows(X_l, held_rows));
  });

  CVResult result;
  result.method = config.method;
  result.n_labeled = X_l.rows();
  result.n_unlabeled = X_u.rows();
  result.cells.resize(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellResult& cr = result.cells[c];
    cr.cell = cells[c];
    for (int r = 0; r < repeats; ++r) {
      const bool pooled = plans[static_cast<std::size_t>(r)].pooled;
      std::vector<double> pool_scores;
      std::vector<int> pool_labels;
      bool repeat_failed = false;
      for (int f = 0; f < folds; ++f) {
        const std::size_t ctx = static_cast<std::size_t>(r * folds + f);
        const auto& held = context_held[ctx];
        if (held.empty()) continue;
        const Eigen::VectorXd& s = context_scores[ctx][c];
        if (s.size() == 0) {  // numerically singular in this context
          ++cr.failed_contexts;
          repeat_failed = true;
          continue;
        }
        if (pooled) {
          for (Eigen::Index i = 0; i < s.size(); ++i) {
            pool_scores.push_back(s[i]);
            pool_labels.push_back(y_l[held[static_cast<std::size_t>(i)]]);
          }
        } else {
          const Eigen::VectorXi yh = take_labels(y_l, held);
          cr.scores.push_back({r, f, auc(s, yh), accuracy(s, yh)});
        }
      }
      if (pooled && !repeat_failed) {
        Eigen::VectorXd s(static_cast<Eigen::Index>(pool_scores.size()));
        Eigen::VectorXi y(static_cast<Eigen::Index>(pool_labels.size()));
        for (std::size_t i = 0; i < pool_scores.size(); ++i) {
          s[static_cast<Eigen::Index>(i)] = pool_scores[i];
          y[static_cast<Eigen::Index>(i)] = pool_labels[i];
        }
        cr.scores.push_back({r, -1, auc(s, y), accuracy(s, y)});
      }
    }
    if (cr.failed() || cr.scores.empty()) {
      cr.mean_auc = std::numeric_limits<double>::quiet_NaN();
      cr.mean_accuracy = std::numeric_limits<double>::quiet_NaN();
    } else {
      double auc_sum = 0.0, acc_sum = 0.0;
      for (const FoldScore& fs : cr.scores) {
        auc_sum += fs.auc;
        acc_sum += fs.accuracy;
      }
      const auto n_scores = static_cast<double>(cr.scores.size());
      cr.mean_auc = auc_sum / n_scores;
      cr.mean_accuracy = acc_sum / n_scores;
    }
  }

  result.best_index = select_best_index(result.cells);
  return result;
}

// Exhaustive Cartesian evaluation (Table-3 style): every cell is scored by
// repeated k-fold CV and the argmax cell is selected.
inline CVResult grid_search(const ExperimentConfig& config, const Dataset& ds,
                            int jobs = 1) {
  return kfold_cv(config, ds, jobs);
}

} // namespace fredholm
