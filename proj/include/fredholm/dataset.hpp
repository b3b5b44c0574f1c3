#pragma once

// CSV ingestion, label binarization, z-score normalization, and the
// labeled/unlabeled/test split protocol.
//
// Loader policy: header row required; quoted fields with "" escapes
// supported; rows with missing cells (blank, "?", "NA", "N/A", "NaN"),
// unparseable numbers, non-finite values, or a wrong field count are dropped
// and counted rather than imputed. Labels map to {0,1} via either a named
// positive value (categorical) or a numeric threshold (value >= threshold).
//
// Normalization uses the sample (n-1) standard deviation; constant columns
// get std 1 so the transform stays defined.
//
// split_dataset draws a stratified labeled sample (per-class minimum of 1, so
// tiny fractions still see both classes), then deals the shuffled remainder
// into the unlabeled pool and the test set. Index lists are sorted and the
// whole procedure is a pure function of (dataset, proportions, seed).

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fredholm/common.hpp"

namespace fredholm {

struct Dataset {
  std::string name;
  Eigen::MatrixXd features;
  Eigen::VectorXi labels;                  // empty when the dataset is unlabeled
  std::vector<std::string> column_names;   // feature columns, in file order
  Eigen::Index raw_columns = 0;            // columns in the file (incl. label/dropped)
  Eigen::Index dropped_rows = 0;           // rows dropped for missing/bad cells
};

struct CsvLoadOptions {
  std::string label_column;                      // header name, or numeric index
  std::optional<std::string> positive_label;     // categorical rule when set
  double positive_threshold = 0.5;               // numeric rule otherwise
  std::vector<std::string> drop_columns;
  std::string name;                              // defaults to the file stem
};

struct Normalizer {
  Eigen::RowVectorXd means;
  Eigen::RowVectorXd stds;
};

struct SplitProportions {
  double labeled = 0.25;
  double unlabeled = 0.0;
  double test = 0.0;
};

struct DataSplit {
  std::vector<Eigen::Index> labeled_idx;
  std::vector<Eigen::Index> unlabeled_idx;
  std::vector<Eigen::Index> test_idx;
  std::uint64_t seed = 0;
  SplitProportions proportions;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

inline std::string upper(std::string s) {
  for (char& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

inline bool is_missing_token(const std::string& cell) {
  const std::string t = upper(trim(cell));
  return t.empty() || t == "?" || t == "NA" || t == "N/A" || t == "NAN";
}

inline bool parse_number(const std::string& cell, double* out) {
  const std::string t = trim(cell);
  if (t.empty()) return false;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) return false;
  if (!std::isfinite(v)) return false;
  *out = v;
  return true;
}

// One CSV record; supports quoted fields with "" escapes (no embedded
// newlines, which none of the supported datasets use).
inline std::vector<std::string> parse_csv_record(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline std::string file_stem(const std::string& path) {
  const std::size_t slash = path.find_last_of("/\\");
  std::string base = (slash == std::string::npos) ? path : path.substr(slash + 1);
  const std::size_t dot = base.find_last_of('.');
  if (dot != std::string::npos && dot > 0) base = base.substr(0, dot);
  return base;
}

} // namespace detail

inline Dataset load_csv(const std::string& path, const CsvLoadOptions& options) {
  std::ifstream in(path);
  detail::check_arg(in.good(), "load_csv: cannot open " + path);
  std::string line;
  detail::check_arg(static_cast<bool>(std::getline(in, line)),
                    "load_csv: empty file " + path);
  const std::vector<std::string> header = detail::parse_csv_record(line);
  const auto n_cols = static_cast<Eigen::Index>(header.size());

  // resolve the label column: exact header match first, then numeric index
  Eigen::Index label_idx = -1;
  for (Eigen::Index j = 0; j < n_cols; ++j) {
    if (detail::trim(header[static_cast<std::size_t>(j)]) ==
        detail::trim(options.label_column)) {
      label_idx = j;
      break;
    }
  }
  if (label_idx < 0) {
    double as_number = -1.0;
    if (detail::parse_number(options.label_column, &as_number) &&
        as_number == std::floor(as_number) && as_number >= 0 && as_number < n_cols) {
      label_idx = static_cast<Eigen::Index>(as_number);
    }
  }
  detail::check_arg(label_idx >= 0,
                    "load_csv: label column '" + options.label_column + "' not found");

  std::vector<Eigen::Index> feature_cols;
  std::vector<std::string> feature_names;
  for (Eigen::Index j = 0; j < n_cols; ++j) {
    if (j == label_idx) continue;
    const std::string name = detail::trim(header[static_cast<std::size_t>(j)]);
    bool dropped = false;
    for (const std::string& d : options.drop_columns) {
      if (name == d) {
        dropped = true;
        break;
      }
    }
    if (!dropped) {
      feature_cols.push_back(j);
      feature_names.push_back(name);
    }
  }
  detail::check_arg(!feature_cols.empty(), "load_csv: no feature columns remain");

  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  Eigen::Index dropped_rows = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> cells = detail::parse_csv_record(line);
    if (static_cast<Eigen::Index>(cells.size()) != n_cols) {
      ++dropped_rows;
      continue;
    }
    bool ok = true;
    std::vector<double> feats(feature_cols.size());
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      const std::string& cell = cells[static_cast<std::size_t>(feature_cols[k])];
      if (detail::is_missing_token(cell) || !detail::parse_number(cell, &feats[k])) {
        ok = false;
        break;
      }
    }
    int label = 0;
    if (ok) {
      const std::string& cell = cells[static_cast<std::size_t>(label_idx)];
      if (detail::is_missing_token(cell)) {
        ok = false;
      } else if (options.positive_label.has_value()) {
        label = (detail::trim(cell) == *options.positive_label) ? 1 : 0;
      } else {
        double v = 0.0;
        if (!detail::parse_number(cell, &v)) ok = false;
        else label = (v >= options.positive_threshold) ? 1 : 0;
      }
    }
    if (!ok) {
      ++dropped_rows;
      continue;
    }
    rows.push_back(std::move(feats));
    labels.push_back(label);
  }
  detail::check_arg(!rows.empty(), "load_csv: no usable rows in " + path);

  Dataset ds;
  ds.name = options.name.empty() ? detail::file_stem(path) : options.name;
  ds.features.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(feature_cols.size()));
  ds.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    ds.labels[static_cast<Eigen::Index>(i)] = labels[i];
  }
  ds.column_names = feature_names;
  ds.raw_columns = n_cols;
  ds.dropped_rows = dropped_rows;
  detail::check_state(ds.features.allFinite(), "load_csv: non-finite feature slipped through");
  const Eigen::Index pos = ds.labels.sum();
  detail::check_arg(pos > 0 && pos < ds.labels.size(),
                    "load_csv: dataset is single-class after the label rule");
  return ds;
}

inline Normalizer fit_normalizer(const Eigen::MatrixXd& X_train) {
  detail::check_arg(X_train.rows() >= 1 && X_train.cols() >= 1,
                    "fit_normalizer: training features must be non-empty");
  detail::check_arg(X_train.allFinite(), "fit_normalizer: features must be finite");
  Normalizer norm;
  norm.means = X_train.colwise().mean();
  norm.stds.resize(X_train.cols());
  const Eigen::Index n = X_train.rows();
  for (Eigen::Index j = 0; j < X_train.cols(); ++j) {
    double ss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = X_train(i, j) - norm.means[j];
      ss += d * d;
    }
    const double var = (n > 1) ? ss / static_cast<double>(n - 1) : 0.0;
    const double sd = std::sqrt(var);
    norm.stds[j] = (sd > 0.0) ? sd : 1.0; // constant-column guard
  }
  return norm;
}

inline Eigen::MatrixXd apply_normalizer(const Normalizer& norm, const Eigen::MatrixXd& X) {
  detail::check_arg(X.cols() == norm.means.cols(),
                    "apply_normalizer: dimension mismatch");
  return (X.rowwise() - norm.means).array().rowwise() / norm.stds.array();
}

inline DataSplit split_dataset(const Dataset& ds, const SplitProportions& p,
                               std::uint64_t seed) {
  const Eigen::Index n = ds.features.rows();
  detail::check_arg(ds.labels.size() == n && n >= 2,
                    "split_dataset: dataset must be labeled with >= 2 rows");
  detail::check_arg(std::isfinite(p.labeled) && p.labeled > 0.0 && p.labeled <= 1.0,
                    "split_dataset: labeled fraction must be in (0,1]");
  detail::check_arg(std::isfinite(p.unlabeled) && p.unlabeled >= 0.0 && p.unlabeled < 1.0,
                    "split_dataset: unlabeled fraction must be in [0,1)");
  detail::check_arg(std::isfinite(p.test) && p.test >= 0.0 && p.test < 1.0,
                    "split_dataset: test fraction must be in [0,1)");
  const double total = p.labeled + p.unlabeled + p.test;
  detail::check_arg(total <= 1.0 + 1e-12, "split_dataset: fractions must sum to <= 1");

  std::vector<Eigen::Index> class_idx[2];
  for (Eigen::Index i = 0; i < n; ++i) {
    detail::check_arg(ds.labels[i] == 0 || ds.labels[i] == 1,
                      "split_dataset: labels must be 0/1");
    class_idx[ds.labels[i]].push_back(i);
  }
  detail::check_arg(!class_idx[0].empty() && !class_idx[1].empty(),
                    "split_dataset: both classes must be present");

  RandomStream rng{seed, 0x53504C4954ull}; // "SPLIT"
  DataSplit split;
  split.seed = seed;
  split.proportions = p;
  std::vector<Eigen::Index> remainder;
  for (auto& idx : class_idx) {
    rng.shuffle(idx);
    const auto want = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(p.labeled * static_cast<double>(idx.size()))));
    for (std::size_t i = 0; i < idx.size(); ++i) {
      (i < want ? split.labeled_idx : remainder).push_back(idx[i]);
    }
  }
  rng.shuffle(remainder);
  const auto n_d = static_cast<double>(n);
  std::size_t n_unlab = static_cast<std::size_t>(std::floor(p.unlabeled * n_d));
  n_unlab = std::min(n_unlab, remainder.size());
  std::size_t n_test;
  if (std::abs(total - 1.0) <= 1e-12) {
    n_test = remainder.size() - n_unlab; // exact partition
  } else {
    n_test = std::min(static_cast<std::size_t>(std::floor(p.test * n_d)),
                      remainder.size() - n_unlab);
  }
  split.unlabeled_idx.assign(remainder.begin(),
                             remainder.begin() + static_cast<std::ptrdiff_t>(n_unlab));
  split.test_idx.assign(remainder.begin() + static_cast<std::ptrdiff_t>(n_unlab),
                        remainder.begin() + static_cast<std::ptrdiff_t>(n_unlab + n_test));
  std::sort(split.labeled_idx.begin(), split.labeled_idx.end());
  std::sort(split.unlabeled_idx.begin(), split.unlabeled_idx.end());
  std::sort(split.test_idx.begin(), split.test_idx.end());
  return split;
}

// Fold id (0..k-1) per item, stratified by label: each class is shuffled,
// then folds are dealt round-robin with a counter that continues across
// classes. Per-fold sizes and per-fold class counts both differ by at most
// one, and k = n yields exact leave-one-out singleton folds.
inline std::vector<int> stratified_folds(const Eigen::VectorXi& labels, int k,
                                         RandomStream& rng) {
  const Eigen::Index n = labels.size();
  detail::check_arg(k >= 2 && static_cast<Eigen::Index>(k) <= n,
                    "stratified_folds: need 2 <= k <= n");
  std::vector<int> fold(static_cast<std::size_t>(n), -1);
  std::size_t counter = 0;
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < n; ++i) {
      detail::check_arg(labels[i] == 0 || labels[i] == 1,
                        "stratified_folds: labels must be 0/1");
      if (labels[i] == cls) idx.push_back(i);
    }
    rng.shuffle(idx);
    for (const Eigen::Index item : idx) {
      fold[static_cast<std::size_t>(item)] =
          static_cast<int>(counter++ % static_cast<std::size_t>(k));
    }
  }
  return fold;
}

// Row-subset helper used throughout the evaluation pipeline.
inline Eigen::MatrixXd take_rows(const Eigen::MatrixXd& X,
                                 const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(idx.size()), X.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    detail::check_arg(idx[i] >= 0 && idx[i] < X.rows(), "take_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = X.row(idx[i]);
  }
  return out;
}

inline Eigen::VectorXi take_labels(const Eigen::VectorXi& y,
                                   const std::vector<Eigen::Index>& idx) {
  Eigen::VectorXi out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) {
    detail::check_arg(idx[i] >= 0 && idx[i] < y.size(), "take_labels: index out of range");
    out[static_cast<Eigen::Index>(i)] = y[idx[i]];
  }
  return out;
}

} // namespace fredholm
