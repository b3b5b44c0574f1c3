#pragma once

// Experiment layer: JSON run configurations, the on-disk dataset catalog,
// run manifests with stable identifiers, and the four benchmark commands
// (bench, stability, learning-curve, vmatrix) with CSV/JSON artifact
// writers.
//
// Reproducibility contract: every command derives all randomness from the
// config seed, formats numbers with fmt_double, and writes files atomically.
// manifest.json carries a manifest_id hashed over (library version,
// subcommand, canonical expanded config, seed, dataset fingerprints) -- no
// timestamps -- so reruns of the same configuration produce byte-identical
// artifacts except for the created_at line of manifest.json, regardless of
// the --jobs setting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "fredholm/common.hpp"
#include "fredholm/cross_validation.hpp"
#include "fredholm/dataset.hpp"
#include "fredholm/kernels.hpp"
#include "fredholm/metrics.hpp"
#include "fredholm/solvers.hpp"
#include "fredholm/vmatrix.hpp"

namespace fredholm {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Width tokens: kernel and V-matrix widths may scale with the feature
// dimension d, resolved per dataset. Accepted forms:
//   number      -> that value
//   "d"         -> d
//   "1/d"       -> 1 / d
//   "<mult>d"   -> mult * d        (e.g. "2d", "0.5d")
// ---------------------------------------------------------------------------

struct WidthToken {
  double value = 1.0;  // used when token is empty
  std::string token;   // "", "d", "1/d", or "<mult>d"

  double resolve(Eigen::Index d) const {
    detail::check_arg(d >= 1, "WidthToken: dimension must be >= 1");
    const auto dim = static_cast<double>(d);
    double out = 0.0;
    if (token.empty()) {
      out = value;
    } else if (token == "d") {
      out = dim;
    } else if (token == "1/d") {
      out = 1.0 / dim;
    } else {
      out = std::stod(token.substr(0, token.size() - 1)) * dim;
    }
    detail::check_arg(std::isfinite(out) && out > 0.0,
                      "WidthToken: resolved width must be positive");
    return out;
  }

  json to_json() const { return token.empty() ? json(value) : json(token); }
};

inline WidthToken parse_width_token(const json& j, const std::string& where) {
  WidthToken w;
  if (j.is_number()) {
    w.value = j.get<double>();
    detail::check_arg(std::isfinite(w.value) && w.value > 0.0,
                      where + ": width must be a positive number");
    return w;
  }
  detail::check_arg(j.is_string(), where + ": width must be a number or token");
  const auto s = j.get<std::string>();
  if (s == "d" || s == "1/d") {
    w.token = s;
    return w;
  }
  detail::check_arg(s.size() >= 2 && s.back() == 'd',
                    where + ": unrecognized width token '" + s + "'");
  std::size_t used = 0;
  double mult = 0.0;
  try {
    mult = std::stod(s.substr(0, s.size() - 1), &used);
  } catch (const std::exception&) {
    throw std::invalid_argument(where + ": unrecognized width token '" + s + "'");
  }
  detail::check_arg(used == s.size() - 1 && std::isfinite(mult) && mult > 0.0,
                    where + ": unrecognized width token '" + s + "'");
  w.token = s;
  return w;
}

// A kernel whose width may be a token; resolved against a dataset dimension.
struct KernelTemplate {
  KernelSpec spec;  // sigma ignored when width.token is non-empty
  WidthToken width;

  KernelSpec resolve(Eigen::Index d) const {
    KernelSpec k = spec;
    k.sigma = width.resolve(d);
    k.validate();
    return k;
  }

  json to_json() const {
    json j;
    j["family"] = family_name(spec.family);
    j["sigma"] = width.to_json();
    if (spec.family == KernelFamily::AnovaRBF) j["degree"] = spec.degree;
    if (spec.family == KernelFamily::Bessel) {
      j["order"] = spec.order;
      j["exponent"] = spec.bessel_exponent;
    }
    return j;
  }
};

namespace detail {

inline void check_keys(const json& obj, const std::string& where,
                       std::initializer_list<const char*> allowed) {
  check_arg(obj.is_object(), where + ": expected a JSON object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* key : allowed)
      if (item.key() == key) {
        ok = true;
        break;
      }
    check_arg(ok, where + ": unknown key '" + item.key() + "'");
  }
}

}  // namespace detail

inline KernelTemplate parse_kernel_template(const json& j, const std::string& where) {
  detail::check_keys(j, where, {"family", "sigma", "degree", "order", "exponent"});
  detail::check_arg(j.contains("family"), where + ": kernel needs a 'family'");
  KernelTemplate t;
  t.spec.family = family_from_name(j.at("family").get<std::string>());
  if (j.contains("sigma")) t.width = parse_width_token(j.at("sigma"), where);
  if (j.contains("degree")) t.spec.degree = j.at("degree").get<int>();
  if (j.contains("order")) t.spec.order = j.at("order").get<int>();
  if (j.contains("exponent")) t.spec.bessel_exponent = j.at("exponent").get<int>();
  KernelSpec probe = t.spec;
  probe.sigma = 1.0;  // width resolved later; validate the discrete fields now
  probe.validate();
  return t;
}

// ---------------------------------------------------------------------------
// Run configuration (JSON)
// ---------------------------------------------------------------------------

struct StabilitySettings {
  std::string dataset = "breast_cancer";
  std::vector<Method> methods{Method::Krls, Method::Iv, Method::Siv, Method::Fred};
  std::vector<double> lambdas = default_lambda_grid();
  KernelTemplate kernel;  // defaults to gaussian width "d"
  int demo_n = 20;
  int demo_repetitions = 500;
  double demo_beta = 1.0;
  double demo_lambda = 1e-3;
};

struct LearningCurveSettings {
  std::string dataset = "sonar";
  std::vector<double> fractions{0.01, 0.05, 0.10, 0.25, 0.50};
  double test_fraction = 0.25;
  std::vector<Method> methods{Method::Krls, Method::Msdf};
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string evaluation = "cv";  // "cv" | "test"
  SplitProportions proportions{0.25, 0.75, 0.0};
  CvSettings cv{10, 5};
  std::string datasets_dir = "datasets";
  std::vector<std::string> datasets{"breast_cancer", "heart_statlog", "sonar"};
  std::vector<Method> methods{Method::Krls, Method::Iv,  Method::Gv,
                              Method::Siv,  Method::Sgv, Method::Fred,
                              Method::Mr,   Method::Msdf};
  std::vector<KernelTemplate> kernels;           // shared hypothesis grid
  std::vector<KernelTemplate> msdf_kernels;      // msdf hypothesis grid
  std::vector<KernelTemplate> operator_kernels;  // msdf rows of the M table
  std::vector<KernelTemplate> data_kernels;      // msdf columns of the M table
  std::vector<double> lambdas = default_lambda_grid();
  std::vector<double> mr_c1{0.1, 1.0, 10.0};
  std::vector<WidthToken> sigma_v;  // gv/sgv squared-width grid
  StabilitySettings stability;
  LearningCurveSettings learning_curve;
};

namespace detail {

inline KernelTemplate default_kernel_template(KernelFamily family) {
  KernelTemplate t;
  t.spec.family = family;
  t.spec.degree = 2;
  t.spec.order = 0;
  t.spec.bessel_exponent = 1;
  t.width.token = "d";
  return t;
}

// The four benchmark kernel families at width d (operator/data grids).
inline std::vector<KernelTemplate> default_kernel_grid() {
  return {default_kernel_template(KernelFamily::GaussianRBF),
          default_kernel_template(KernelFamily::Laplacian),
          default_kernel_template(KernelFamily::Bessel),
          default_kernel_template(KernelFamily::AnovaRBF)};
}

// Hypothesis-kernel grid for the distribution-fitting method: the benchmark
// width d plus the inverse-dimension width, whose squared-distance exponent
// is O(1) on z-scored data regardless of dimension.
inline std::vector<KernelTemplate> default_msdf_hypothesis_grid() {
  KernelTemplate narrow = default_kernel_template(KernelFamily::GaussianRBF);
  KernelTemplate scaled = narrow;
  scaled.width.token = "1/d";
  return {narrow, scaled};
}

inline std::vector<KernelTemplate> parse_kernel_list(const json& j,
                                                     const std::string& where) {
  check_arg(j.is_array() && !j.empty(), where + ": expected a non-empty array");
  std::vector<KernelTemplate> out;
  out.reserve(j.size());
  for (const auto& item : j) out.push_back(parse_kernel_template(item, where));
  return out;
}

inline std::vector<double> parse_number_list(const json& j, const std::string& where) {
  check_arg(j.is_array() && !j.empty(), where + ": expected a non-empty array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& item : j) {
    check_arg(item.is_number(), where + ": expected numbers");
    out.push_back(item.get<double>());
  }
  return out;
}

inline std::vector<Method> parse_method_list(const json& j, const std::string& where) {
  check_arg(j.is_array() && !j.empty(), where + ": expected a non-empty array");
  std::vector<Method> out;
  out.reserve(j.size());
  for (const auto& item : j) out.push_back(method_from_name(item.get<std::string>()));
  return out;
}

}  // namespace detail

inline RunConfig parse_run_config(const json& j) {
  detail::check_keys(j, "config",
                     {"seed", "evaluation", "proportions", "cv", "datasets_dir",
                      "datasets", "methods", "grids", "stability", "learning_curve"});
  RunConfig rc;
  rc.kernels = {detail::default_kernel_template(KernelFamily::GaussianRBF)};
  rc.msdf_kernels = detail::default_msdf_hypothesis_grid();
  rc.operator_kernels = detail::default_kernel_grid();
  rc.data_kernels = detail::default_kernel_grid();
  rc.sigma_v = {parse_width_token(json("d"), "grids.sigma_v")};
  // The regularization sweep contrasts method stability in the smooth
  // (high-bias) kernel regime, where the lambda response is informative; at
  // width d the Gram matrix is nearly the identity and every lambda profile
  // degenerates to noise.
  rc.stability.kernel = detail::default_kernel_template(KernelFamily::GaussianRBF);
  rc.stability.kernel.width.token = "1/d";

  if (j.contains("seed")) rc.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("evaluation")) {
    rc.evaluation = j.at("evaluation").get<std::string>();
    detail::check_arg(rc.evaluation == "cv" || rc.evaluation == "test",
                      "config: evaluation must be 'cv' or 'test'");
  }
  if (j.contains("proportions")) {
    const json& p = j.at("proportions");
    detail::check_keys(p, "config.proportions", {"labeled", "unlabeled", "test"});
    if (p.contains("labeled")) rc.proportions.labeled = p.at("labeled").get<double>();
    if (p.contains("unlabeled"))
      rc.proportions.unlabeled = p.at("unlabeled").get<double>();
    if (p.contains("test")) rc.proportions.test = p.at("test").get<double>();
  }
  if (j.contains("cv")) {
    const json& c = j.at("cv");
    detail::check_keys(c, "config.cv", {"repeats", "folds"});
    if (c.contains("repeats")) rc.cv.repeats = c.at("repeats").get<int>();
    if (c.contains("folds")) rc.cv.folds = c.at("folds").get<int>();
  }
  if (j.contains("datasets_dir"))
    rc.datasets_dir = j.at("datasets_dir").get<std::string>();
  if (j.contains("datasets")) {
    rc.datasets.clear();
    for (const auto& item : j.at("datasets"))
      rc.datasets.push_back(item.get<std::string>());
    detail::check_arg(!rc.datasets.empty(), "config: datasets must be non-empty");
  }
  if (j.contains("methods")) rc.methods = detail::parse_method_list(j.at("methods"), "config.methods");
  if (j.contains("grids")) {
    const json& g = j.at("grids");
    detail::check_keys(g, "config.grids",
                       {"kernels", "msdf_kernels", "operator_kernels", "data_kernels",
                        "lambdas", "mr_c1", "sigma_v"});
    if (g.contains("kernels"))
      rc.kernels = detail::parse_kernel_list(g.at("kernels"), "grids.kernels");
    if (g.contains("msdf_kernels"))
      rc.msdf_kernels = detail::parse_kernel_list(g.at("msdf_kernels"), "grids.msdf_kernels");
    if (g.contains("operator_kernels"))
      rc.operator_kernels =
          detail::parse_kernel_list(g.at("operator_kernels"), "grids.operator_kernels");
    if (g.contains("data_kernels"))
      rc.data_kernels = detail::parse_kernel_list(g.at("data_kernels"), "grids.data_kernels");
    if (g.contains("lambdas"))
      rc.lambdas = detail::parse_number_list(g.at("lambdas"), "grids.lambdas");
    if (g.contains("mr_c1"))
      rc.mr_c1 = detail::parse_number_list(g.at("mr_c1"), "grids.mr_c1");
    if (g.contains("sigma_v")) {
      const json& sv = g.at("sigma_v");
      detail::check_arg(sv.is_array() && !sv.empty(),
                        "grids.sigma_v: expected a non-empty array");
      rc.sigma_v.clear();
      for (const auto& item : sv)
        rc.sigma_v.push_back(parse_width_token(item, "grids.sigma_v"));
    }
  }
  if (j.contains("stability")) {
    const json& s = j.at("stability");
    detail::check_keys(s, "config.stability",
                       {"dataset", "methods", "lambdas", "kernel", "demo_n",
                        "demo_repetitions", "demo_beta", "demo_lambda"});
    if (s.contains("dataset")) rc.stability.dataset = s.at("dataset").get<std::string>();
    if (s.contains("methods"))
      rc.stability.methods = detail::parse_method_list(s.at("methods"), "stability.methods");
    if (s.contains("lambdas"))
      rc.stability.lambdas = detail::parse_number_list(s.at("lambdas"), "stability.lambdas");
    if (s.contains("kernel"))
      rc.stability.kernel = parse_kernel_template(s.at("kernel"), "stability.kernel");
    if (s.contains("demo_n")) rc.stability.demo_n = s.at("demo_n").get<int>();
    if (s.contains("demo_repetitions"))
      rc.stability.demo_repetitions = s.at("demo_repetitions").get<int>();
    if (s.contains("demo_beta")) rc.stability.demo_beta = s.at("demo_beta").get<double>();
    if (s.contains("demo_lambda"))
      rc.stability.demo_lambda = s.at("demo_lambda").get<double>();
    detail::check_arg(rc.stability.demo_n >= 2 && rc.stability.demo_repetitions >= 1,
                      "stability: demo_n >= 2 and demo_repetitions >= 1 required");
  }
  if (j.contains("learning_curve")) {
    const json& l = j.at("learning_curve");
    detail::check_keys(l, "config.learning_curve",
                       {"dataset", "fractions", "test_fraction", "methods"});
    if (l.contains("dataset"))
      rc.learning_curve.dataset = l.at("dataset").get<std::string>();
    if (l.contains("fractions"))
      rc.learning_curve.fractions =
          detail::parse_number_list(l.at("fractions"), "learning_curve.fractions");
    if (l.contains("test_fraction"))
      rc.learning_curve.test_fraction = l.at("test_fraction").get<double>();
    if (l.contains("methods"))
      rc.learning_curve.methods =
          detail::parse_method_list(l.at("methods"), "learning_curve.methods");
  }
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  detail::check_state(in.good(), "cannot open config file: " + path.string());
  json j;
  in >> j;
  return parse_run_config(j);
}

// Canonical fully-expanded echo of the configuration; defaults are
// materialized so that the manifest hash does not depend on which keys the
// input file spelled out. nlohmann::json orders object keys, which makes the
// dump canonical.
inline json config_to_json(const RunConfig& rc) {
  json j;
  j["seed"] = rc.seed;
  j["evaluation"] = rc.evaluation;
  j["proportions"] = {{"labeled", rc.proportions.labeled},
                      {"unlabeled", rc.proportions.unlabeled},
                      {"test", rc.proportions.test}};
  j["cv"] = {{"repeats", rc.cv.repeats}, {"folds", rc.cv.folds}};
  j["datasets_dir"] = rc.datasets_dir;
  j["datasets"] = rc.datasets;
  json methods = json::array();
  for (const Method m : rc.methods) methods.push_back(method_name(m));
  j["methods"] = methods;
  json grids;
  auto kernel_array = [](const std::vector<KernelTemplate>& ts) {
    json a = json::array();
    for (const KernelTemplate& t : ts) a.push_back(t.to_json());
    return a;
  };
  grids["kernels"] = kernel_array(rc.kernels);
  grids["msdf_kernels"] = kernel_array(rc.msdf_kernels);
  grids["operator_kernels"] = kernel_array(rc.operator_kernels);
  grids["data_kernels"] = kernel_array(rc.data_kernels);
  grids["lambdas"] = rc.lambdas;
  grids["mr_c1"] = rc.mr_c1;
  json sv = json::array();
  for (const WidthToken& w : rc.sigma_v) sv.push_back(w.to_json());
  grids["sigma_v"] = sv;
  j["grids"] = grids;
  json stability;
  stability["dataset"] = rc.stability.dataset;
  json smethods = json::array();
  for (const Method m : rc.stability.methods) smethods.push_back(method_name(m));
  stability["methods"] = smethods;
  stability["lambdas"] = rc.stability.lambdas;
  stability["kernel"] = rc.stability.kernel.to_json();
  stability["demo_n"] = rc.stability.demo_n;
  stability["demo_repetitions"] = rc.stability.demo_repetitions;
  stability["demo_beta"] = rc.stability.demo_beta;
  stability["demo_lambda"] = rc.stability.demo_lambda;
  j["stability"] = stability;
  json lc;
  lc["dataset"] = rc.learning_curve.dataset;
  lc["fractions"] = rc.learning_curve.fractions;
  lc["test_fraction"] = rc.learning_curve.test_fraction;
  json lmethods = json::array();
  for (const Method m : rc.learning_curve.methods) lmethods.push_back(method_name(m));
  lc["methods"] = lmethods;
  j["learning_curve"] = lc;
  return j;
}

// Expand the shared grids into a per-method experiment for a dataset of
// dimension d.
inline ExperimentConfig resolve_experiment(const RunConfig& rc, Method method,
                                           Eigen::Index d) {
  ExperimentConfig ec;
  ec.method = method;
  const std::vector<KernelTemplate>& hypothesis =
      method == Method::Msdf ? rc.msdf_kernels : rc.kernels;
  for (const KernelTemplate& t : hypothesis) ec.kernel_grid.push_back(t.resolve(d));
  if (method == Method::Msdf) {
    for (const KernelTemplate& t : rc.operator_kernels)
      ec.operator_kernel_grid.push_back(t.resolve(d));
    for (const KernelTemplate& t : rc.data_kernels)
      ec.data_kernel_grid.push_back(t.resolve(d));
  }
  ec.lambda_grid = rc.lambdas;
  if (method == Method::Mr) ec.mr_c1_grid = rc.mr_c1;
  if (method == Method::Gv || method == Method::Sgv)
    for (const WidthToken& w : rc.sigma_v) ec.sigma_v_grid.push_back(w.resolve(d));
  ec.cv = rc.cv;
  ec.seed = rc.seed;
  ec.split = rc.proportions;
  return ec;
}

// ---------------------------------------------------------------------------
// Dataset catalog (datasets/manifest.json)
// ---------------------------------------------------------------------------

struct CatalogEntry {
  std::string name;
  std::filesystem::path path;  // absolute or relative to the catalog dir
  CsvLoadOptions options;
};

struct DatasetCatalog {
  std::filesystem::path dir;
  std::vector<CatalogEntry> entries;

  const CatalogEntry* find(const std::string& name) const {
    for (const CatalogEntry& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }
};

inline DatasetCatalog load_catalog(const std::filesystem::path& dir) {
  const std::filesystem::path manifest = dir / "manifest.json";
  std::ifstream in(manifest);
  detail::check_state(in.good(), "cannot open dataset manifest: " + manifest.string());
  json j;
  in >> j;
  detail::check_keys(j, "dataset manifest", {"datasets"});
  detail::check_arg(j.contains("datasets") && j.at("datasets").is_array(),
                    "dataset manifest: 'datasets' array required");
  DatasetCatalog cat;
  cat.dir = dir;
  for (const auto& item : j.at("datasets")) {
    detail::check_keys(item, "dataset manifest entry",
                       {"name", "path", "label_column", "positive_label",
                        "positive_threshold", "drop_columns", "notes", "source"});
    CatalogEntry e;
    e.name = item.at("name").get<std::string>();
    e.path = dir / item.at("path").get<std::string>();
    e.options.name = e.name;
    e.options.label_column = item.at("label_column").get<std::string>();
    if (item.contains("positive_label"))
      e.options.positive_label = item.at("positive_label").get<std::string>();
    if (item.contains("positive_threshold"))
      e.options.positive_threshold = item.at("positive_threshold").get<double>();
    if (item.contains("drop_columns"))
      for (const auto& c : item.at("drop_columns"))
        e.options.drop_columns.push_back(c.get<std::string>());
    detail::check_arg(cat.find(e.name) == nullptr,
                      "dataset manifest: duplicate name " + e.name);
    cat.entries.push_back(std::move(e));
  }
  return cat;
}

inline Dataset load_from_catalog(const CatalogEntry& entry) {
  return load_csv(entry.path, entry.options);
}

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

struct RunManifest {
  std::string subcommand;
  std::uint64_t seed = 0;
  json config;  // canonical expanded config
  std::vector<std::pair<std::string, std::string>> dataset_fingerprints;
  std::vector<std::string> outputs;
  std::vector<std::string> errors;

  // Stable across reruns and --jobs settings; excludes timestamps, outputs
  // and errors so it can be computed before the run.
  std::string manifest_id() const {
    std::string blob = std::string(kVersion) + "\n" + subcommand + "\n" +
                       std::to_string(seed) + "\n" + config.dump() + "\n";
    std::vector<std::pair<std::string, std::string>> prints = dataset_fingerprints;
    std::sort(prints.begin(), prints.end());
    for (const auto& [name, hash] : prints) blob += name + "=" + hash + "\n";
    return to_hex(fnv1a64(blob));
  }

  json to_json(const std::string& created_at) const {
    json j;
    j["manifest_id"] = manifest_id();
    j["version"] = kVersion;
    j["subcommand"] = subcommand;
    j["seed"] = seed;
    j["created_at"] = created_at;
    j["config"] = config;
    json prints;
    for (const auto& [name, hash] : dataset_fingerprints) prints[name] = hash;
    j["dataset_fingerprints"] = prints;
    std::vector<std::string> sorted_outputs = outputs;
    std::sort(sorted_outputs.begin(), sorted_outputs.end());
    j["outputs"] = sorted_outputs;
    j["errors"] = errors;
    return j;
  }
};

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_manifest(const std::filesystem::path& out_dir, const RunManifest& man) {
  atomic_write_file(out_dir / "manifest.json", man.to_json(utc_timestamp()).dump(2) + "\n");
}

// Fingerprint the dataset files a run will read; missing entries/files are
// recorded as errors and fingerprinted as "missing".
inline void fingerprint_datasets(RunManifest& man, const DatasetCatalog& cat,
                                 const std::vector<std::string>& names) {
  for (const std::string& name : names) {
    const CatalogEntry* entry = cat.find(name);
    if (entry == nullptr) {
      man.errors.push_back("dataset not in manifest: " + name);
      man.dataset_fingerprints.emplace_back(name, "missing");
      continue;
    }
    if (!std::filesystem::exists(entry->path)) {
      man.errors.push_back("dataset file missing: " + entry->path.string());
      man.dataset_fingerprints.emplace_back(name, "missing");
      continue;
    }
    man.dataset_fingerprints.emplace_back(name, to_hex(fnv1a64_file(entry->path)));
  }
}

// ---------------------------------------------------------------------------
// CSV helpers
// ---------------------------------------------------------------------------

namespace detail {

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += "\"\"";
    out += c;
  }
  out += "\"";
  return out;
}

inline void csv_row(std::string& buf, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) buf += ',';
    buf += csv_escape(fields[i]);
  }
  buf += '\n';
}

inline double sample_std(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (const double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (const double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Test-set evaluation: fit every cell on the labeled split (plus the
// unlabeled pool for semi-supervised methods) and score the held-out test
// split once. Each cell gets a single record with fold = -1.
// ---------------------------------------------------------------------------

inline CVResult test_evaluate(const ExperimentConfig& config, const Dataset& ds,
                              int jobs = 1) {
  (void)jobs;  // a single context; fits are cheap relative to CV mode
  const std::vector<GridCell> cells = expand_grid(config);
  detail::check_arg(config.split.test > 0.0,
                    "test_evaluate: split.test must be positive");
  const DataSplit split = split_dataset(ds, config.split, config.seed);
  detail::check_state(!split.test_idx.empty(), "test_evaluate: empty test split");
  const Eigen::MatrixXd X_l = take_rows(ds.features, split.labeled_idx);
  const Eigen::VectorXi y_l = take_labels(ds.labels, split.labeled_idx);
  const Eigen::MatrixXd X_u = take_rows(ds.features, split.unlabeled_idx);
  const Eigen::MatrixXd X_t = take_rows(ds.features, split.test_idx);
  const Eigen::VectorXi y_t = take_labels(ds.labels, split.test_idx);
  detail::check_state(y_t.minCoeff() == 0 && y_t.maxCoeff() == 1,
                      "test_evaluate: test split is single-class");
  const std::vector<Eigen::VectorXd> scores =
      evaluate_cells(config.method, cells, X_l, y_l, X_u, X_t);
  CVResult result;
  result.method = config.method;
  result.n_labeled = X_l.rows();
  result.n_unlabeled = X_u.rows();
  result.cells.resize(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellResult& cr = result.cells[c];
    cr.cell = cells[c];
    if (scores[c].size() == 0) {  // numerically singular cell
      cr.failed_contexts = 1;
      cr.mean_auc = std::numeric_limits<double>::quiet_NaN();
      cr.mean_accuracy = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    cr.scores.push_back({0, -1, auc(scores[c], y_t), accuracy(scores[c], y_t)});
    cr.mean_auc = cr.scores[0].auc;
    cr.mean_accuracy = cr.scores[0].accuracy;
  }
  result.best_index = select_best_index(result.cells);
  return result;
}

// ---------------------------------------------------------------------------
// bench: grid search per dataset x method; per-record cell log, Table-style
// wide summary (rows = datasets, columns = methods, entries = best-cell mean
// AUC), per-method best-cell detail, and a JSON mirror.
// ---------------------------------------------------------------------------

inline RunManifest cmd_bench(const RunConfig& rc, const std::filesystem::path& out_dir,
                             int jobs = 1) {
  RunManifest man;
  man.subcommand = "bench";
  man.seed = rc.seed;
  man.config = config_to_json(rc);
  const DatasetCatalog cat = load_catalog(rc.datasets_dir);
  fingerprint_datasets(man, cat, rc.datasets);
  const std::string id = man.manifest_id();

  std::string cells_csv;
  detail::csv_row(cells_csv, {"manifest_id", "dataset", "method", "evaluation", "cell",
                              "repeat", "fold", "auc", "accuracy"});
  std::string best_csv;
  detail::csv_row(best_csv,
                  {"manifest_id", "dataset", "method", "evaluation", "best_cell",
                   "mean_auc", "std_auc", "mean_accuracy", "n_labeled", "n_unlabeled"});
  json summary;
  summary["manifest_id"] = id;
  summary["evaluation"] = rc.evaluation;
  json table = json::object();
  // dataset -> method -> mean AUC for the wide table
  std::map<std::string, std::map<std::string, std::string>> wide;

  for (const std::string& name : rc.datasets) {
    const CatalogEntry* entry = cat.find(name);
    if (entry == nullptr || !std::filesystem::exists(entry->path)) continue;
    Dataset ds;
    try {
      ds = load_from_catalog(*entry);
    } catch (const std::exception& e) {
      man.errors.push_back("dataset " + name + ": " + e.what());
      continue;
    }
    for (const Method method : rc.methods) {
      const std::string mname = method_name(method);
      CVResult res;
      try {
        const ExperimentConfig ec = resolve_experiment(rc, method, ds.features.cols());
        res = rc.evaluation == "cv" ? kfold_cv(ec, ds, jobs)
                                    : test_evaluate(ec, ds, jobs);
      } catch (const std::exception& e) {
        man.errors.push_back("bench " + name + "/" + mname + ": " + e.what());
        continue;
      }
      for (const CellResult& cr : res.cells)
        for (const FoldScore& fs : cr.scores)
          detail::csv_row(cells_csv,
                          {id, name, mname, rc.evaluation, cr.cell.id(),
                           std::to_string(fs.repeat), std::to_string(fs.fold),
                           fmt_double(fs.auc), fmt_double(fs.accuracy)});
      const CellResult& best = res.best_cell();
      std::vector<double> aucs;
      for (const FoldScore& fs : best.scores) aucs.push_back(fs.auc);
      const double std_auc = detail::sample_std(aucs);
      detail::csv_row(best_csv,
                      {id, name, mname, rc.evaluation, best.cell.id(),
                       fmt_double(best.mean_auc), fmt_double(std_auc),
                       fmt_double(best.mean_accuracy), std::to_string(res.n_labeled),
                       std::to_string(res.n_unlabeled)});
      json cell_json;
      cell_json["best_cell"] = best.cell.id();
      cell_json["mean_auc"] = best.mean_auc;
      cell_json["std_auc"] = std_auc;
      cell_json["mean_accuracy"] = best.mean_accuracy;
      cell_json["n_labeled"] = res.n_labeled;
      cell_json["n_unlabeled"] = res.n_unlabeled;
      table[name][mname] = cell_json;
      wide[name][mname] = fmt_double(best.mean_auc);
    }
  }
  summary["results"] = table;
  summary["errors"] = man.errors;

  // Wide table mirroring the benchmark layout: one dataset per row, one
  // column per requested method.
  std::string summary_csv;
  std::vector<std::string> header{"dataset"};
  for (const Method m : rc.methods) header.push_back(method_name(m));
  header.push_back("manifest_id");
  detail::csv_row(summary_csv, header);
  for (const std::string& name : rc.datasets) {
    const auto row_it = wide.find(name);
    if (row_it == wide.end()) continue;
    std::vector<std::string> row{name};
    for (const Method m : rc.methods) {
      const auto cell_it = row_it->second.find(method_name(m));
      row.push_back(cell_it == row_it->second.end() ? "" : cell_it->second);
    }
    row.push_back(id);
    detail::csv_row(summary_csv, row);
  }

  atomic_write_file(out_dir / "bench_cells.csv", cells_csv);
  atomic_write_file(out_dir / "bench_best.csv", best_csv);
  atomic_write_file(out_dir / "bench_summary.csv", summary_csv);
  atomic_write_file(out_dir / "bench_summary.json", summary.dump(2) + "\n");
  man.outputs = {"bench_cells.csv", "bench_best.csv", "bench_summary.csv",
                 "bench_summary.json"};
  write_manifest(out_dir, man);
  return man;
}

// ---------------------------------------------------------------------------
// stability: lambda sweep at a fixed kernel; per (method, lambda) the CV mean
// AUC plus the coefficient norm and smoothness penalty of a single fit on the
// full labeled split. Also runs the 1-D linear synthetic demo comparing the
// variance of a ridge least-squares slope against the V-matrix-weighted one.
// ---------------------------------------------------------------------------

struct LinearDemoResult {
  double ls_mean = 0.0, ls_variance = 0.0;
  double v_mean = 0.0, v_variance = 0.0;
};

inline LinearDemoResult linear_stability_demo(int n, int repetitions, double beta,
                                              double lambda, std::uint64_t seed) {
  detail::check_arg(n >= 2 && repetitions >= 1, "linear_stability_demo: bad sizes");
  RandomStream rng({seed, 0x4C494E44454D4Full});  // "LINDEMO"
  std::vector<double> b_ls, b_v;
  b_ls.reserve(static_cast<std::size_t>(repetitions));
  b_v.reserve(static_cast<std::size_t>(repetitions));
  for (int rep = 0; rep < repetitions; ++rep) {
    Eigen::MatrixXd x(n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = rng.normal();
      y[i] = beta * x(i, 0) + rng.normal();
    }
    const Eigen::VectorXd xv = x.col(0);
    b_ls.push_back(xv.dot(y) / (xv.dot(xv) + lambda));
    const Eigen::MatrixXd V = cdf_indicator_v(x).values;
    b_v.push_back(xv.dot(V * y) / (xv.dot(V * xv) + lambda));
  }
  auto mean_of = [](const std::vector<double>& xs) {
    double m = 0.0;
    for (const double v : xs) m += v;
    return m / static_cast<double>(xs.size());
  };
  LinearDemoResult out;
  out.ls_mean = mean_of(b_ls);
  out.v_mean = mean_of(b_v);
  out.ls_variance = detail::sample_std(b_ls);
  out.ls_variance *= out.ls_variance;
  out.v_variance = detail::sample_std(b_v);
  out.v_variance *= out.v_variance;
  return out;
}

inline RunManifest cmd_stability(const RunConfig& rc, const std::filesystem::path& out_dir,
                                 int jobs = 1) {
  RunManifest man;
  man.subcommand = "stability";
  man.seed = rc.seed;
  man.config = config_to_json(rc);
  const DatasetCatalog cat = load_catalog(rc.datasets_dir);
  const StabilitySettings& st = rc.stability;
  fingerprint_datasets(man, cat, {st.dataset});
  const std::string id = man.manifest_id();

  std::string sweep_csv;
  detail::csv_row(sweep_csv, {"manifest_id", "dataset", "method", "lambda", "mean_auc",
                              "coefficient_norm", "penalty"});
  json summary;
  summary["manifest_id"] = id;
  summary["dataset"] = st.dataset;
  json spreads = json::object();

  const CatalogEntry* entry = cat.find(st.dataset);
  if (entry != nullptr && std::filesystem::exists(entry->path)) {
    Dataset ds;
    bool loaded = false;
    try {
      ds = load_from_catalog(*entry);
      loaded = true;
    } catch (const std::exception& e) {
      man.errors.push_back("dataset " + st.dataset + ": " + e.what());
    }
    if (loaded) {
      const Eigen::Index d = ds.features.cols();
      // One split for the whole sweep: CV handles the AUCs; the norm/penalty
      // come from a single fit per (method, lambda) on the full labeled split.
      const DataSplit split = split_dataset(ds, rc.proportions, rc.seed);
      const Eigen::MatrixXd X_l = take_rows(ds.features, split.labeled_idx);
      const Eigen::VectorXi y_l = take_labels(ds.labels, split.labeled_idx);
      const Eigen::MatrixXd X_u = take_rows(ds.features, split.unlabeled_idx);
      for (const Method method : st.methods) {
        const std::string mname = method_name(method);
        std::vector<double> aucs;
        for (const double lambda : st.lambdas) {
          try {
            ExperimentConfig ec = resolve_experiment(rc, method, d);
            ec.kernel_grid = {st.kernel.resolve(d)};
            if (method == Method::Msdf) {
              ec.operator_kernel_grid = {st.kernel.resolve(d)};
              ec.data_kernel_grid = {st.kernel.resolve(d)};
            }
            ec.lambda_grid = {lambda};
            const CVResult res = kfold_cv(ec, ds, jobs);

            detail::FitWorkspace ws;
            const Normalizer norm = fit_normalizer(X_l);
            ws.Xt = apply_normalizer(norm, X_l);
            ws.Yt = y_l.cast<double>();
            ws.Xh = ws.Xt;
            if (X_u.rows() > 0 && method_uses_unlabeled(method)) {
              ws.anchors.resize(ws.Xt.rows() + X_u.rows(), ws.Xt.cols());
              ws.anchors.topRows(ws.Xt.rows()) = ws.Xt;
              ws.anchors.bottomRows(X_u.rows()) = apply_normalizer(norm, X_u);
            } else {
              ws.anchors = ws.Xt;
            }
            const std::vector<GridCell> cells = expand_grid(ec);
            detail::check_state(!cells.empty(), "stability: empty grid");
            // cells matches res.cells order, so the norm/penalty fit uses the
            // same cell the reported AUC came from.
            const detail::CellFit fit =
                detail::fit_cell(method, cells[res.best_index], ws);

            const double mean_auc = res.best_cell().mean_auc;
            aucs.push_back(mean_auc);
            detail::csv_row(sweep_csv,
                            {id, st.dataset, mname, fmt_double(lambda),
                             fmt_double(mean_auc), fmt_double(fit.alpha.norm()),
                             fmt_double(fit.penalty)});
          } catch (const std::exception& e) {
            man.errors.push_back("stability " + mname + " lambda=" +
                                 fmt_double(lambda) + ": " + e.what());
          }
        }
        if (!aucs.empty()) {
          const auto [lo, hi] = std::minmax_element(aucs.begin(), aucs.end());
          json s;
          s["min_auc"] = *lo;
          s["max_auc"] = *hi;
          s["spread"] = *hi - *lo;
          spreads[mname] = s;
        }
      }
    }
  }
  summary["spreads"] = spreads;

  const LinearDemoResult demo = linear_stability_demo(
      st.demo_n, st.demo_repetitions, st.demo_beta, st.demo_lambda, rc.seed);
  std::string demo_csv;
  detail::csv_row(demo_csv, {"manifest_id", "estimator", "n", "repetitions", "lambda",
                             "mean_slope", "variance"});
  detail::csv_row(demo_csv, {id, "least-squares", std::to_string(st.demo_n),
                             std::to_string(st.demo_repetitions),
                             fmt_double(st.demo_lambda), fmt_double(demo.ls_mean),
                             fmt_double(demo.ls_variance)});
  detail::csv_row(demo_csv, {id, "vmatrix", std::to_string(st.demo_n),
                             std::to_string(st.demo_repetitions),
                             fmt_double(st.demo_lambda), fmt_double(demo.v_mean),
                             fmt_double(demo.v_variance)});
  json demo_json;
  demo_json["least_squares"] = {{"mean_slope", demo.ls_mean},
                                {"variance", demo.ls_variance}};
  demo_json["vmatrix"] = {{"mean_slope", demo.v_mean}, {"variance", demo.v_variance}};
  // Soft observation, reported but never asserted.
  demo_json["vmatrix_variance_not_larger"] = demo.v_variance <= demo.ls_variance;
  summary["linear_demo"] = demo_json;
  summary["errors"] = man.errors;

  atomic_write_file(out_dir / "stability_sweep.csv", sweep_csv);
  atomic_write_file(out_dir / "stability_demo.csv", demo_csv);
  atomic_write_file(out_dir / "stability_summary.json", summary.dump(2) + "\n");
  man.outputs = {"stability_sweep.csv", "stability_demo.csv", "stability_summary.json"};
  write_manifest(out_dir, man);
  return man;
}

// ---------------------------------------------------------------------------
// learning-curve: test-set AUC of each method's best cell as the labeled
// fraction grows; the unlabeled pool absorbs whatever the labeled and test
// splits do not take.
// ---------------------------------------------------------------------------

inline RunManifest cmd_learning_curve(const RunConfig& rc,
                                      const std::filesystem::path& out_dir,
                                      int jobs = 1) {
  RunManifest man;
  man.subcommand = "learning-curve";
  man.seed = rc.seed;
  man.config = config_to_json(rc);
  const DatasetCatalog cat = load_catalog(rc.datasets_dir);
  const LearningCurveSettings& lc = rc.learning_curve;
  fingerprint_datasets(man, cat, {lc.dataset});
  const std::string id = man.manifest_id();

  std::string curve_csv;
  detail::csv_row(curve_csv,
                  {"manifest_id", "dataset", "fraction", "method", "best_cell",
                   "operator_kernel", "data_kernel", "auc", "accuracy", "n_labeled",
                   "n_unlabeled", "n_test"});
  std::string cells_csv;
  detail::csv_row(cells_csv, {"manifest_id", "dataset", "fraction", "method", "cell",
                              "auc", "accuracy"});
  json summary;
  summary["manifest_id"] = id;
  summary["dataset"] = lc.dataset;
  json points = json::array();

  const CatalogEntry* entry = cat.find(lc.dataset);
  if (entry != nullptr && std::filesystem::exists(entry->path)) {
    Dataset ds;
    bool loaded = false;
    try {
      ds = load_from_catalog(*entry);
      loaded = true;
    } catch (const std::exception& e) {
      man.errors.push_back("dataset " + lc.dataset + ": " + e.what());
    }
    if (loaded) {
      for (const double fraction : lc.fractions) {
        SplitProportions p;
        p.labeled = fraction;
        p.test = lc.test_fraction;
        p.unlabeled = std::max(0.0, 1.0 - fraction - lc.test_fraction);
        for (const Method method : lc.methods) {
          const std::string mname = method_name(method);
          CVResult res;
          Eigen::Index n_test = 0;
          try {
            ExperimentConfig ec = resolve_experiment(rc, method, ds.features.cols());
            ec.split = p;
            n_test = static_cast<Eigen::Index>(
                split_dataset(ds, p, rc.seed).test_idx.size());
            res = test_evaluate(ec, ds, jobs);
          } catch (const std::exception& e) {
            man.errors.push_back("learning-curve fraction=" + fmt_double(fraction) +
                                 " " + mname + ": " + e.what());
            continue;
          }
          for (const CellResult& cr : res.cells)
            detail::csv_row(cells_csv,
                            {id, lc.dataset, fmt_double(fraction), mname, cr.cell.id(),
                             fmt_double(cr.mean_auc), fmt_double(cr.mean_accuracy)});
          const CellResult& best = res.best_cell();
          detail::csv_row(
              curve_csv,
              {id, lc.dataset, fmt_double(fraction), mname, best.cell.id(),
               best.cell.operator_kernel ? best.cell.operator_kernel->id() : "",
               best.cell.data_kernel ? best.cell.data_kernel->id() : "",
               fmt_double(best.mean_auc), fmt_double(best.mean_accuracy),
               std::to_string(res.n_labeled), std::to_string(res.n_unlabeled),
               std::to_string(n_test)});
          json pt;
          pt["fraction"] = fraction;
          pt["method"] = mname;
          pt["best_cell"] = best.cell.id();
          pt["auc"] = best.mean_auc;
          pt["accuracy"] = best.mean_accuracy;
          pt["n_labeled"] = res.n_labeled;
          pt["n_unlabeled"] = res.n_unlabeled;
          pt["n_test"] = n_test;
          points.push_back(pt);
        }
      }
    }
  }
  summary["points"] = points;
  summary["errors"] = man.errors;

  atomic_write_file(out_dir / "learning_curve.csv", curve_csv);
  atomic_write_file(out_dir / "learning_cells.csv", cells_csv);
  atomic_write_file(out_dir / "learning_summary.json", summary.dump(2) + "\n");
  man.outputs = {"learning_curve.csv", "learning_cells.csv", "learning_summary.json"};
  write_manifest(out_dir, man);
  return man;
}

// ---------------------------------------------------------------------------
// vmatrix: dump one V-matrix for a points file, for inspection/plotting.
// ---------------------------------------------------------------------------

struct VmatrixArgs {
  std::filesystem::path input;   // CSV of points; a non-numeric first line is a header
  std::string kind = "cdf";      // see vmatrix_kind_from_name
  Eigen::Index labeled = -1;     // first rows treated as labeled; -1 = all rows
  double sigma = 1.0;            // semi-gaussian squared width
  std::filesystem::path output;  // output CSV file
};

inline Eigen::MatrixXd read_points_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  detail::check_state(in.good(), "cannot open points file: " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> fields = detail::parse_csv_record(line);
    std::vector<double> row;
    row.reserve(fields.size());
    bool numeric = true;
    for (const std::string& f : fields) {
      double v = 0.0;
      if (!detail::parse_number(f, &v) || !std::isfinite(v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      detail::check_arg(first, "points file: non-numeric row beyond the header: " + line);
      first = false;
      continue;
    }
    first = false;
    detail::check_arg(rows.empty() || rows.front().size() == row.size(),
                      "points file: ragged row: " + line);
    rows.push_back(std::move(row));
  }
  detail::check_arg(!rows.empty(), "points file: no numeric rows");
  Eigen::MatrixXd points(static_cast<Eigen::Index>(rows.size()),
                         static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index j = 0; j < points.cols(); ++j)
      points(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return points;
}

inline VMatrix build_vmatrix(const Eigen::MatrixXd& points, const std::string& kind,
                             Eigen::Index n_labeled, double sigma) {
  const Eigen::Index n = points.rows();
  if (n_labeled < 0) n_labeled = n;
  detail::check_arg(n_labeled >= 1 && n_labeled <= n,
                    "vmatrix: labeled prefix out of range");
  const Eigen::MatrixXd labeled = points.topRows(n_labeled);
  switch (vmatrix_kind_from_name(kind)) {
    case VMatrixKind::UniformIndicator: return uniform_indicator_v(labeled, false);
    case VMatrixKind::UniformIndicatorAdditive: return uniform_indicator_v(labeled, true);
    case VMatrixKind::CdfIndicator: return cdf_indicator_v(labeled);
    case VMatrixKind::SemiIndicator: return semi_indicator_v(labeled, points);
    case VMatrixKind::SemiGaussian: return semi_gaussian_v(labeled, points, sigma);
    case VMatrixKind::Identity: return identity_v(n_labeled);
  }
  throw std::invalid_argument("vmatrix: unknown kind " + kind);
}

inline void cmd_vmatrix(const VmatrixArgs& args) {
  const Eigen::MatrixXd points = read_points_csv(args.input);
  const VMatrix v = build_vmatrix(points, args.kind, args.labeled, args.sigma);
  std::string out = "# vmatrix kind=" + std::string(vmatrix_kind_name(v.spec.kind)) +
                    " labeled=" + std::to_string(v.n_labeled) +
                    " anchors=" + std::to_string(v.n_anchors);
  if (v.spec.kind == VMatrixKind::SemiGaussian)
    out += " sigma=" + fmt_double(v.spec.sigma);
  out += "\n";
  for (Eigen::Index i = 0; i < v.values.rows(); ++i) {
    std::vector<std::string> row;
    row.reserve(static_cast<std::size_t>(v.values.cols()));
    for (Eigen::Index j = 0; j < v.values.cols(); ++j)
      row.push_back(fmt_double(v.values(i, j)));
    detail::csv_row(out, row);
  }
  atomic_write_file(args.output, out);
}

}  // namespace fredholm
