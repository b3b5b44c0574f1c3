// Acceptance gate: end-to-end checks of the library and the benchmark CLI.
// Each criterion prints exactly one PASS/FAIL line; the exit status is the
// number of failed criteria.
//
// Usage:
//   acceptance [--datasets <dir>] [--cli <fredholm-binary>] [--work <dir>]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fredholm/experiment.hpp"
#include "support/test_support.hpp"

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;
using namespace fredholm;
using namespace testsupport;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

int g_failures = 0;

using Verdict = std::pair<bool, std::string>;

void run_criterion(const char* name, const std::function<Verdict()>& body) {
  Verdict v{false, {}};
  try {
    v = body();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  std::printf("%s %s%s%s\n", v.first ? "PASS" : "FAIL", name,
              v.second.empty() ? "" : " -- ", v.second.c_str());
  std::fflush(stdout);
  if (!v.first) ++g_failures;
}

double rel_diff(const VectorXd& a, const VectorXd& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

double min_eigenvalue(const MatrixXd& m) {
  const MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  return es.eigenvalues().minCoeff();
}

int worker_jobs() {
  const unsigned hc = std::thread::hardware_concurrency();
  return std::max(1, std::min(8, static_cast<int>(hc)));
}

std::string fmt(double v) { return fmt_double(v); }

// ---------------------------------------------------------------------------
// 1. Every closed-form solver matches an independent gradient-based
//    minimization of its documented objective within 1e-5 relative
//    coefficient error on >= 20 random instances (n <= 12), in < 1 minute.
// ---------------------------------------------------------------------------
// Reconstruct the (exact) Hessian of a quadratic from gradient calls, so the
// conditioning guard measures the problem the oracle actually solves.
double quadratic_cond(const Quadratic& q) {
  const VectorXd g0 = q.grad(VectorXd::Zero(q.dim));
  MatrixXd h(q.dim, q.dim);
  for (Index i = 0; i < q.dim; ++i)
    h.col(i) = q.grad(VectorXd::Unit(q.dim, i)) - g0;
  return cond_number(h);
}

Verdict oracle_equivalence() {
  Timer timer;
  int instances = 0;
  double worst = 0.0;

  KernelSpec target;
  target.sigma = 0.8;
  KernelSpec op;
  op.family = KernelFamily::Laplacian;
  op.sigma = 1.1;
  KernelSpec data;
  data.family = KernelFamily::AnovaRBF;
  data.sigma = 0.6;
  data.degree = 2;
  KernelSpec weights;
  weights.sigma = 0.9;

  for (std::uint64_t seed = 1; instances < 20 && seed <= 2000; ++seed) {
    const Index n = 5 + static_cast<Index>(seed % 8);       // 5..12
    const Index d = 1 + static_cast<Index>(seed % 3);       // 1..3
    const Index n_l = 2 + static_cast<Index>(seed % (n - 2));
    const double lambda = std::pow(10.0, static_cast<double>(seed % 5) - 2.0);

    const MatrixXd X = random_points(n, d, -1.0, 1.0, 7 * seed + 3);
    const MatrixXd Xl = X.topRows(n_l);
    const GramMatrix K = gram(target, X, X);
    const GramMatrix Kll = gram(target, Xl, Xl);
    const GramMatrix KF = gram(target, Xl, X);
    const GramMatrix KFo = gram(op, Xl, X);
    const GramMatrix KD = gram(data, Xl, Xl);
    const VMatrix V = cdf_indicator_v(Xl);
    LaplacianWeights w;
    w.kernel = weights;
    const LaplacianMatrix L = graph_laplacian(X, w);
    const double c1 = 0.4;

    RandomStream rng({seed, 0xACCEull});
    VectorXd Yl(n_l);
    for (Index i = 0; i < n_l; ++i) Yl[i] = static_cast<double>(rng.uniform_int(0, 1));

    const std::vector<std::pair<VectorXd, Quadratic>> cases = {
        {solve_krls(Kll, Yl, lambda).alpha, krls_objective(Kll.values, Yl, lambda)},
        {solve_vrisk(Kll, V, Yl, lambda).alpha,
         vrisk_objective(Kll.values, V.values, Yl, lambda)},
        {solve_fredholm(KF, K, Yl, lambda).alpha,
         fredholm_objective(KF.values, K.values, Yl, lambda)},
        {solve_msdf(KFo, K, KD, Yl, lambda).alpha,
         msdf_objective(KFo.values, K.values, KD.values, Yl, lambda)},
        {solve_laprls(K, L, Yl, c1, lambda).alpha,
         laprls_objective(K.values, L.values, Yl, n_l, c1, lambda)}};

    // Resample while any objective is too ill-conditioned for a first-order
    // oracle to certify 1e-5 coefficient agreement.
    bool usable = true;
    for (const auto& [alpha, q] : cases) usable = usable && quadratic_cond(q) <= 1e5;
    if (!usable) continue;
    ++instances;

    for (const auto& [alpha, q] : cases)
      worst = std::max(worst, rel_diff(alpha, cg_minimize(q, VectorXd::Zero(q.dim))));
  }

  const double elapsed = timer.seconds();
  const bool pass = instances >= 20 && worst <= 1e-5 && elapsed < 60.0;
  return {pass, "instances=" + std::to_string(instances) +
                    " worst_rel_err=" + fmt(worst) + " elapsed_s=" + fmt(elapsed)};
}

// ---------------------------------------------------------------------------
// 2. V-matrix suite: the two documented forms of the semi-supervised
//    indicator matrix agree exactly; SIV/SGV are PSD on 100 random
//    instances; SIV without unlabeled anchors reduces to the CDF matrix;
//    the hand-enumerated fixtures come out exactly.
// ---------------------------------------------------------------------------
Verdict vmatrix_suite() {
  double max_form_gap = 0.0;
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const Index n_l = 2 + static_cast<Index>(seed % 7);
    const Index m = n_l + static_cast<Index>(seed % 9);
    const Index d = 1 + static_cast<Index>(seed % 3);
    MatrixXd anchors = random_points(m, d, 0.0, 1.0, 31 * seed);
    const MatrixXd X = anchors.topRows(n_l);
    const MatrixXd max_form = naive_semi_indicator_v(X, anchors);
    const MatrixXd product_form = naive_semi_indicator_v_product(X, anchors);
    const MatrixXd lib = semi_indicator_v(X, anchors).values;
    max_form_gap = std::max(max_form_gap, (max_form - product_form).cwiseAbs().maxCoeff());
    max_form_gap = std::max(max_form_gap, (lib - max_form).cwiseAbs().maxCoeff());
  }
  if (max_form_gap != 0.0)
    return {false, "indicator forms disagree by " + fmt(max_form_gap)};

  double min_eig = 0.0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const Index n_l = 2 + static_cast<Index>(seed % 9);
    const Index m = n_l + static_cast<Index>(seed % 15);
    const Index d = 1 + static_cast<Index>(seed % 4);
    MatrixXd anchors = random_points(m, d, -1.0, 1.0, 17 * seed + 5);
    const MatrixXd X = anchors.topRows(n_l);
    min_eig = std::min(min_eig, min_eigenvalue(semi_indicator_v(X, anchors).values));
    const double sigma = 0.5 + 0.1 * static_cast<double>(seed % 10);
    min_eig =
        std::min(min_eig, min_eigenvalue(semi_gaussian_v(X, anchors, sigma).values));
  }
  if (min_eig < -1e-10) return {false, "min eigenvalue " + fmt(min_eig)};

  double reduction_gap = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const MatrixXd X =
        random_points(2 + static_cast<Index>(seed % 8), 2, 0.0, 1.0, 91 * seed);
    reduction_gap = std::max(
        reduction_gap,
        (semi_indicator_v(X, X).values - cdf_indicator_v(X).values).cwiseAbs().maxCoeff());
  }
  if (reduction_gap != 0.0)
    return {false, "no-unlabeled reduction gap " + fmt(reduction_gap)};

  MatrixXd two(2, 1);
  two << 0.0, 1.0;
  MatrixXd expected_cdf(2, 2);
  expected_cdf << 2.0, 1.0, 1.0, 1.0;
  if (cdf_indicator_v(two).values != expected_cdf)
    return {false, "2-point CDF fixture mismatch"};
  MatrixXd three(3, 1);
  three << 0.0, 1.0, 0.5;  // labeled prefix {0,1}, unlabeled anchor {0.5}
  MatrixXd expected_siv(2, 2);
  expected_siv << 3.0, 1.0, 1.0, 1.0;
  if (semi_indicator_v(two, three).values != expected_siv)
    return {false, "3-anchor indicator fixture mismatch"};

  return {true, "forms exact, min_eig=" + fmt(min_eig) + ", fixtures exact"};
}

// ---------------------------------------------------------------------------
// 3. Reduction chain: identity V -> V-risk equals kernel ridge; c1 = 0 ->
//    LapRLS equals kernel ridge on the labeled block; identity-kernel
//    distribution fitting at lambda -> 0 returns A = Y. Each within 1e-8.
// ---------------------------------------------------------------------------
Verdict reduction_chain() {
  double worst = 0.0;
  KernelSpec spec;
  spec.sigma = 0.6;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Index n = 4 + static_cast<Index>(seed % 6);
    const MatrixXd X = random_points(n, 2, -1.0, 1.0, 13 * seed);
    const GramMatrix K = gram(spec, X, X);
    RandomStream rng({seed, 0xCAFEull});
    VectorXd Y(n);
    for (Index i = 0; i < n; ++i) Y[i] = static_cast<double>(rng.uniform_int(0, 1));
    const double lambda = 0.05 + 0.1 * static_cast<double>(seed % 4);

    worst = std::max(worst, rel_diff(solve_vrisk(K, identity_v(n), Y, lambda).alpha,
                                     solve_krls(K, Y, lambda).alpha));

    const Index n_l = 2 + static_cast<Index>(seed % 3);
    LaplacianWeights w;
    w.kernel.sigma = 1.0;
    const LaplacianMatrix L = graph_laplacian(X, w);
    const VectorXd full = solve_laprls(K, L, Y.head(n_l), 0.0, lambda).alpha;
    const GramMatrix Kll = gram(spec, X.topRows(n_l), X.topRows(n_l));
    const VectorXd labeled_block = solve_krls(Kll, Y.head(n_l), lambda).alpha;
    worst = std::max(worst, rel_diff(full.head(n_l), labeled_block));
    worst = std::max(worst, full.tail(n - n_l).norm());

    GramMatrix I;
    I.values = MatrixXd::Identity(n, n);
    I.col_points = X;
    I.row_points = X;
    const VectorXd A = solve_msdf(I, I, I, Y, 1e-12).alpha;
    worst = std::max(worst, rel_diff(A, Y));
  }
  return {worst <= 1e-8, "worst_gap=" + fmt(worst)};
}

// ---------------------------------------------------------------------------
// 4. Analytic gradients of the risk functionals match central finite
//    differences within 1e-5 relative error at random points.
// ---------------------------------------------------------------------------
Verdict gradient_checks() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Index n = 6;
    const Index n_l = 4;
    const MatrixXd X = random_points(n, 2, -1.0, 1.0, 41 * seed);
    const MatrixXd Xl = X.topRows(n_l);
    KernelSpec spec;
    spec.sigma = 0.7;
    const GramMatrix K = gram(spec, X, X);
    const GramMatrix Kll = gram(spec, Xl, Xl);
    const GramMatrix KF = gram(spec, Xl, X);
    RandomStream rng({seed, 0x6EAD5ull});
    VectorXd Yl(n_l);
    for (Index i = 0; i < n_l; ++i) Yl[i] = static_cast<double>(rng.uniform_int(0, 1));
    const VMatrix V = cdf_indicator_v(Xl);
    LaplacianWeights w;
    w.kernel.sigma = 1.0;
    const LaplacianMatrix L = graph_laplacian(X, w);

    const std::vector<Quadratic> objectives = {
        krls_objective(Kll.values, Yl, 0.3),
        vrisk_objective(Kll.values, V.values, Yl, 0.3),
        fredholm_objective(KF.values, K.values, Yl, 0.3),
        msdf_objective(KF.values, K.values, Kll.values, Yl, 0.3),
        laprls_objective(K.values, L.values, Yl, n_l, 0.5, 0.3)};
    for (const Quadratic& q : objectives) {
      VectorXd point(q.dim);
      for (Index i = 0; i < q.dim; ++i) point[i] = rng.normal();
      worst = std::max(worst, gradient_rel_error(q, point));
    }
  }
  return {worst <= 1e-5, "worst_rel_err=" + fmt(worst)};
}

// ---------------------------------------------------------------------------
// 5. AUC equals brute-force pairwise enumeration exactly on 1000 random
//    vectors; exact-arithmetic monotone transforms leave it unchanged.
// ---------------------------------------------------------------------------
Verdict metric_oracle() {
  int checked = 0;
  for (std::uint64_t seed = 1; checked < 1000; ++seed) {
    RandomStream rng({seed, 0xA0Cull});
    const Index n = 2 + static_cast<Index>(rng.uniform_index(199));
    VectorXd s(n);
    VectorXi y(n);
    const bool quantize = (seed % 2) == 0;
    const double levels = 2.0 + static_cast<double>(seed % 9);
    for (Index i = 0; i < n; ++i) {
      const double u = rng.uniform01();
      s[i] = quantize ? std::floor(u * levels) / levels : u;
      y[i] = static_cast<int>(rng.uniform_index(2));
    }
    if (y.minCoeff() == y.maxCoeff()) continue;  // AUC needs both classes
    ++checked;
    if (auc(s, y) != brute_force_auc(s, y))
      return {false, "mismatch vs brute force at case " + std::to_string(checked)};
    // Exact monotone transforms: scaling by a power of two and subtracting
    // 0.5 are both exact in binary floating point, so invariance is bitwise.
    if (auc(VectorXd(2.0 * s), y) != auc(s, y) ||
        auc(VectorXd(s.array() - 0.5), y) != auc(s, y))
      return {false, "monotone-transform variance at case " + std::to_string(checked)};
  }
  return {true, "1000 vectors exact, transforms invariant"};
}

// ---------------------------------------------------------------------------
// 6. Benchmark reproduction at desk scale: with the documented default grids
//    at 25% training, kernel ridge lands within +-0.07 of the reference AUC
//    (0.84 breast cancer, 0.76 heart) and the best distribution-fitting cell
//    is at least as good; on sonar at 1% training at least one operator/data
//    cell beats kernel ridge. Runtime < 30 minutes.
// ---------------------------------------------------------------------------
Verdict benchmark_reproduction(const fs::path& datasets_dir) {
  Timer timer;
  const int jobs = worker_jobs();
  // Documented defaults: seed 0, 25% labeled, 10x5 CV, default grids.
  RunConfig rc = parse_run_config(json::object());
  rc.datasets_dir = datasets_dir.string();
  const DatasetCatalog cat = load_catalog(rc.datasets_dir);

  auto best_auc = [&](const std::string& dataset, Method m) {
    const CatalogEntry* entry = cat.find(dataset);
    detail::check_state(entry != nullptr, "dataset missing: " + dataset);
    const Dataset ds = load_from_catalog(*entry);
    const ExperimentConfig ec = resolve_experiment(rc, m, ds.features.cols());
    return kfold_cv(ec, ds, jobs).best_cell().mean_auc;
  };

  const double bc_krls = best_auc("breast_cancer", Method::Krls);
  const double bc_msdf = best_auc("breast_cancer", Method::Msdf);
  const double heart_krls = best_auc("heart_statlog", Method::Krls);
  const double heart_msdf = best_auc("heart_statlog", Method::Msdf);

  // sonar at 1% labeled: single held-out evaluation (cross-validation is
  // impossible with two labeled points).
  const CatalogEntry* entry = cat.find("sonar");
  detail::check_state(entry != nullptr, "dataset missing: sonar");
  const Dataset sonar = load_from_catalog(*entry);
  RunConfig rc1 = rc;
  rc1.proportions = {.labeled = 0.01, .unlabeled = 0.74, .test = 0.25};
  const ExperimentConfig krls_ec =
      resolve_experiment(rc1, Method::Krls, sonar.features.cols());
  const double sonar_krls = test_evaluate(krls_ec, sonar).best_cell().mean_auc;
  const ExperimentConfig msdf_ec =
      resolve_experiment(rc1, Method::Msdf, sonar.features.cols());
  const CVResult sonar_msdf = test_evaluate(msdf_ec, sonar);
  double sonar_best_cell = 0.0;
  for (const CellResult& cr : sonar_msdf.cells)
    if (!cr.failed()) sonar_best_cell = std::max(sonar_best_cell, cr.mean_auc);

  const double elapsed = timer.seconds();
  const bool pass = std::abs(bc_krls - 0.84) <= 0.07 && bc_msdf >= bc_krls &&
                    std::abs(heart_krls - 0.76) <= 0.07 && heart_msdf >= heart_krls &&
                    sonar_best_cell > sonar_krls && elapsed < 1800.0;
  return {pass, "bc krls=" + fmt(bc_krls) + " (ref 0.84+-0.07) msdf=" + fmt(bc_msdf) +
                    "; heart krls=" + fmt(heart_krls) + " (ref 0.76+-0.07) msdf=" +
                    fmt(heart_msdf) + "; sonar@1% krls=" + fmt(sonar_krls) +
                    " best_cell=" + fmt(sonar_best_cell) + "; elapsed_s=" + fmt(elapsed)};
}

// ---------------------------------------------------------------------------
// 7. Stability: across the lambda sweep on breast cancer, each V-matrix
//    method's max-min AUC spread is at most 1.25x the Fredholm baseline's.
// ---------------------------------------------------------------------------
Verdict stability_sweep(const fs::path& datasets_dir, const fs::path& work) {
  RunConfig rc = parse_run_config(json::object());
  rc.datasets_dir = datasets_dir.string();
  rc.stability.methods = {Method::Iv, Method::Siv, Method::Fred};
  const RunManifest man = cmd_stability(rc, work / "stability", worker_jobs());
  if (!man.errors.empty()) return {false, "sweep errors: " + man.errors.front()};

  std::ifstream in(work / "stability" / "stability_summary.json");
  detail::check_state(in.good(), "stability summary missing");
  json summary;
  in >> summary;
  const double iv = summary.at("spreads").at("iv").at("spread").get<double>();
  const double siv = summary.at("spreads").at("siv").at("spread").get<double>();
  const double fred = summary.at("spreads").at("fred").at("spread").get<double>();
  const bool pass = iv <= 1.25 * fred && siv <= 1.25 * fred;
  return {pass, "spread iv=" + fmt(iv) + " siv=" + fmt(siv) + " fred=" + fmt(fred) +
                    " (limit 1.25x fred)"};
}

// ---------------------------------------------------------------------------
// 8. Anchor convergence: the quadrature-oracle error of (1/m) * SIV shrinks
//    by >= 1.5x when anchors grow from 100 to 400, averaged over 20 seeds.
// ---------------------------------------------------------------------------
Verdict anchor_convergence() {
  const ConvergenceErrors err = siv_convergence_errors(8, 2, 100, 400, 20);
  const double ratio = err.small_anchors / err.large_anchors;
  return {ratio >= 1.5, "err(100)=" + fmt(err.small_anchors) +
                            " err(400)=" + fmt(err.large_anchors) +
                            " ratio=" + fmt(ratio) + " (need >= 1.5)"};
}

// ---------------------------------------------------------------------------
// 9. Determinism: the CLI rerun with the same config produces byte-identical
//    outputs when --jobs varies (manifest compared modulo its timestamp).
// ---------------------------------------------------------------------------
std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  detail::check_state(in.good(), "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Verdict determinism(const fs::path& cli, const fs::path& datasets_dir,
                    const fs::path& work) {
  if (cli.empty()) return {false, "no --cli binary provided"};
  const fs::path dir = work / "determinism";
  fs::create_directories(dir);
  json cfg;
  cfg["seed"] = 5;
  cfg["datasets_dir"] = datasets_dir.string();
  cfg["datasets"] = {"heart_statlog"};
  cfg["methods"] = {"krls", "siv"};
  cfg["proportions"] = {{"labeled", 0.5}, {"unlabeled", 0.5}, {"test", 0.0}};
  cfg["cv"] = {{"repeats", 2}, {"folds", 3}};
  cfg["grids"] = {{"kernels", json::array({json{{"family", "gaussian"}, {"sigma", "d"}}})},
                  {"lambdas", {0.1, 1.0}}};
  const fs::path cfg_path = dir / "config.json";
  atomic_write_file(cfg_path, cfg.dump(2) + "\n");

  for (const int jobs : {1, 4}) {
    const std::string cmd = "'" + cli.string() + "' bench --config '" +
                            cfg_path.string() + "' --out '" +
                            (dir / ("out" + std::to_string(jobs))).string() +
                            "' --jobs " + std::to_string(jobs) + " > '" +
                            (dir / "cli.log").string() + "' 2>&1";
    const int status = std::system(cmd.c_str());
    if (status != 0)
      return {false, "cli exited with status " + std::to_string(status)};
  }

  for (const char* name : {"bench_cells.csv", "bench_best.csv", "bench_summary.csv",
                           "bench_summary.json"}) {
    if (slurp(dir / "out1" / name) != slurp(dir / "out4" / name))
      return {false, std::string(name) + " differs between --jobs 1 and --jobs 4"};
  }
  const std::string m1 = slurp(dir / "out1" / "manifest.json");
  const std::string m4 = slurp(dir / "out4" / "manifest.json");
  const json j1 = json::parse(m1);
  json j4 = json::parse(m4);
  j4["created_at"] = j1.at("created_at");
  if (j1.dump() != j4.dump())
    return {false, "manifest.json differs beyond created_at"};
  return {true, "bench outputs byte-identical for --jobs 1 vs 4"};
}

}  // namespace

int main(int argc, char** argv) {
  fs::path datasets_dir = "datasets";
  fs::path cli;
  fs::path work = fs::temp_directory_path() / "fredholm_acceptance";
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--datasets") datasets_dir = argv[i + 1];
    else if (flag == "--cli") cli = argv[i + 1];
    else if (flag == "--work") work = argv[i + 1];
    else {
      std::fprintf(stderr, "unknown flag: %s\n", flag.c_str());
      return 1;
    }
  }
  std::error_code ec;
  fs::remove_all(work, ec);
  fs::create_directories(work);

  run_criterion("oracle-equivalence", oracle_equivalence);
  run_criterion("vmatrix-suite", vmatrix_suite);
  run_criterion("reduction-chain", reduction_chain);
  run_criterion("gradient-checks", gradient_checks);
  run_criterion("metric-oracle", metric_oracle);
  run_criterion("benchmark-reproduction",
                [&] { return benchmark_reproduction(datasets_dir); });
  run_criterion("stability-sweep", [&] { return stability_sweep(datasets_dir, work); });
  run_criterion("anchor-convergence", anchor_convergence);
  run_criterion("determinism", [&] { return determinism(cli, datasets_dir, work); });

  std::printf("%d of 9 criteria passed\n", 9 - g_failures);
  return g_failures;
}
