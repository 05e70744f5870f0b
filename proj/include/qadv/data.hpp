#pragma once

// Dataset ingestion and the preprocessing pipeline: CSV loading, outlier
// trimming, systematic sampling, constant-feature removal, quantile transform
// and standardization, plus a synthetic intrusion-style corpus generator.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "qadv/error.hpp"

namespace qadv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Label : std::uint8_t { normal = 0, attack = 1 };

inline constexpr double kStdFloor = 1e-12;

// Row-major sample matrix: one observation per row.
struct DataMatrix {
  Matrix values;
  std::vector<std::string> feature_names;
  std::vector<Label> labels;  // empty for unlabeled (training) splits
  std::string dataset;
  std::string role;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

struct RawTable {
  std::string name;
  std::vector<std::string> feature_names;
  Matrix values;
  std::vector<Label> labels;
  std::vector<std::string> raw_labels;
  std::string label_column;
  std::vector<std::size_t> constant_columns;  // flagged for removal downstream
  std::vector<std::string> dropped_columns;   // non-numeric, dropped at load
  std::size_t dropped_rows = 0;               // rows with missing/non-finite cells

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

struct DatasetSchema {
  std::string label_column = "label";
  std::set<std::string> normal_labels = {"normal", "normal.", "BENIGN"};
  // Empty means "every non-normal label is an attack".
  std::set<std::string> attack_labels;
  bool reject_non_numeric = false;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delim) {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// Empty cells are "missing"; anything else must parse fully.
inline std::optional<double> parse_number(const std::string& cell, bool& missing) {
  std::string t = trim(cell);
  missing = t.empty() || t == "NaN" || t == "nan" || t == "NA";
  if (missing) return std::nullopt;
  try {
    std::size_t used = 0;
    double v = std::stod(t, &used);
    if (used != t.size()) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    if (t == "Infinity" || t == "inf" || t == "-Infinity" || t == "-inf") {
      missing = true;
    }
    return std::nullopt;
  }
}

}  // namespace detail

inline std::vector<std::size_t> constant_columns(const Matrix& x, double floor = kStdFloor) {
  std::vector<std::size_t> out;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    auto col = x.col(j).array();
    double mean = col.mean();
    double var = (col - mean).square().mean();
    if (!(std::sqrt(var) > floor)) out.push_back(static_cast<std::size_t>(j));
  }
  return out;
}

inline RawTable parse_dataset(std::istream& in, const DatasetSchema& schema,
                              const std::string& name = "dataset", char delim = ',') {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorCategory::data,
          "dataset '" + name + "' has no header row");
  std::vector<std::string> header = detail::split_csv_line(line, delim);
  for (auto& h : header) h = detail::trim(h);

  auto label_it = std::find(header.begin(), header.end(), schema.label_column);
  require(label_it != header.end(), ErrorCategory::data,
          "label column '" + schema.label_column + "' not found in " + name);
  const std::size_t label_idx = static_cast<std::size_t>(label_it - header.begin());

  std::vector<std::vector<std::string>> cells;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    auto row = detail::split_csv_line(line, delim);
    require(row.size() == header.size(), ErrorCategory::data,
            name + ": row " + std::to_string(cells.size() + 2) + " has " +
                std::to_string(row.size()) + " fields, header has " +
                std::to_string(header.size()));
    cells.push_back(std::move(row));
  }
  require(!cells.empty(), ErrorCategory::data, name + " has no data rows");

  // A column is numeric when every non-missing cell parses as a number.
  std::vector<std::size_t> numeric_cols;
  RawTable table;
  table.name = name;
  table.label_column = schema.label_column;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j == label_idx) continue;
    bool numeric = true;
    for (const auto& row : cells) {
      bool missing = false;
      if (!detail::parse_number(row[j], missing) && !missing) {
        numeric = false;
        break;
      }
    }
    if (numeric) {
      numeric_cols.push_back(j);
    } else {
      require(!schema.reject_non_numeric, ErrorCategory::data,
              name + ": non-numeric feature column '" + header[j] + "'");
      table.dropped_columns.push_back(header[j]);
    }
  }
  require(!numeric_cols.empty(), ErrorCategory::data, name + " has zero usable feature columns");

  std::vector<std::vector<double>> kept;
  for (const auto& row : cells) {
    std::vector<double> vals;
    vals.reserve(numeric_cols.size());
    bool ok = true;
    for (std::size_t j : numeric_cols) {
      bool missing = false;
      auto v = detail::parse_number(row[j], missing);
      if (!v || !std::isfinite(*v)) {
        ok = false;
        break;
      }
      vals.push_back(*v);
    }
    if (!ok) {
      ++table.dropped_rows;
      continue;
    }
    std::string raw = detail::trim(row[label_idx]);
    Label lab;
    if (schema.normal_labels.count(raw)) {
      lab = Label::normal;
    } else if (schema.attack_labels.empty() || schema.attack_labels.count(raw)) {
      lab = Label::attack;
    } else {
      fail(ErrorCategory::data, name + ": unknown label value '" + raw + "'");
    }
    table.labels.push_back(lab);
    table.raw_labels.push_back(std::move(raw));
    kept.push_back(std::move(vals));
  }
  require(!kept.empty(), ErrorCategory::data, name + ": every row has missing values");

  for (std::size_t j : numeric_cols) table.feature_names.push_back(header[j]);
  table.values.resize(static_cast<Eigen::Index>(kept.size()),
                      static_cast<Eigen::Index>(numeric_cols.size()));
  for (std::size_t i = 0; i < kept.size(); ++i)
    for (std::size_t j = 0; j < numeric_cols.size(); ++j)
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = kept[i][j];
  table.constant_columns = constant_columns(table.values);
  return table;
}

inline RawTable load_dataset(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  require(in.good(), ErrorCategory::io, "cannot open dataset file '" + path + "'");
  return parse_dataset(in, schema, path);
}

// Per-feature affine standardization. Uses the population standard deviation
// so the fitting data maps to exactly unit variance.
struct Scaler {
  Vector mean;
  Vector stddev;

  static Scaler fit(const Matrix& x) {
    require(x.rows() > 0, ErrorCategory::data, "cannot fit a scaler on zero rows");
    Scaler s;
    s.mean = x.colwise().mean().transpose();
    s.stddev = ((x.rowwise() - s.mean.transpose()).array().square().colwise().mean())
                   .sqrt()
                   .transpose();
    for (Eigen::Index j = 0; j < s.stddev.size(); ++j)
      require(s.stddev(j) > kStdFloor, ErrorCategory::data,
              "feature " + std::to_string(j) + " has zero variance; remove it before scaling");
    return s;
  }

  Matrix apply(const Matrix& x) const {
    require(x.cols() == mean.size(), ErrorCategory::data, "scaler dimension mismatch");
    return (x.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array();
  }
};

// Rank-based map of each feature through its empirical CDF, estimated on
// `quantiles` reference points, onto uniform [0, 1].
struct QuantileTransform {
  Matrix references;  // quantiles x features, each column non-decreasing

  static QuantileTransform fit(const Matrix& x, std::size_t quantiles) {
    require(quantiles >= 2, ErrorCategory::config, "quantile transform needs >= 2 quantiles");
    require(x.rows() > 0, ErrorCategory::data, "cannot fit quantiles on zero rows");
    const auto q = static_cast<Eigen::Index>(std::min<std::size_t>(quantiles, x.rows()));
    QuantileTransform t;
    t.references.resize(std::max<Eigen::Index>(q, 2), x.cols());
    const Eigen::Index levels = t.references.rows();
    std::vector<double> col(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      for (Eigen::Index i = 0; i < x.rows(); ++i) col[static_cast<std::size_t>(i)] = x(i, j);
      std::sort(col.begin(), col.end());
      for (Eigen::Index l = 0; l < levels; ++l) {
        // linear interpolation between order statistics
        double pos = static_cast<double>(l) / static_cast<double>(levels - 1) *
                     static_cast<double>(col.size() - 1);
        auto lo = static_cast<std::size_t>(std::floor(pos));
        auto hi = std::min(lo + 1, col.size() - 1);
        double frac = pos - static_cast<double>(lo);
        t.references(l, j) = col[lo] + frac * (col[hi] - col[lo]);
      }
    }
    return t;
  }

  double map(double v, Eigen::Index j) const {
    const Eigen::Index levels = references.rows();
    auto ref = references.col(j);
    if (v <= ref(0)) return 0.0;
    if (v >= ref(levels - 1)) return 1.0;
    const double* b = ref.data();
    const double* e = b + levels;
    auto lo = std::lower_bound(b, e, v) - b;
    auto hi = std::upper_bound(b, e, v) - b;
    double level;
    if (lo < hi) {
      // v hits a flat run of references: average the tied levels
      level = 0.5 * static_cast<double>(lo + hi - 1);
    } else {
      double x0 = ref(lo - 1), x1 = ref(lo);
      level = static_cast<double>(lo - 1) + (v - x0) / (x1 - x0);
    }
    return level / static_cast<double>(levels - 1);
  }

  Matrix apply(const Matrix& x) const {
    require(x.cols() == references.cols(), ErrorCategory::data,
            "quantile transform dimension mismatch");
    Matrix out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      for (Eigen::Index j = 0; j < x.cols(); ++j) out(i, j) = map(x(i, j), j);
    return out;
  }
};

enum class SamplingMode { systematic, random };

struct SplitSpec {
  std::size_t train_normals = 5000;
  // nullopt: take every remaining row of that class.
  std::optional<std::size_t> validation_normals = 0;
  std::optional<std::size_t> validation_attacks = 0;
  std::optional<std::size_t> test_normals;
  std::optional<std::size_t> test_attacks;
  SamplingMode mode = SamplingMode::systematic;
  double trim_fraction = 0.01;
  std::optional<std::size_t> quantiles;
  std::uint64_t seed = 0;
};

struct Splits {
  DataMatrix train;
  DataMatrix validation;
  DataMatrix test;
  Scaler scaler;
  std::optional<QuantileTransform> quantile;
  std::vector<std::string> removed_features;
  // Indices into the source table, per split.
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> validation_rows;
  std::vector<std::size_t> test_rows;
  std::size_t trimmed_rows = 0;
};

// Rows of `pool` whose every feature lies inside the per-feature two-sided
// [f, 1 - f] empirical quantile band.
inline std::vector<std::size_t> trim_rows(const Matrix& values, const std::vector<std::size_t>& pool,
                                          double fraction) {
  if (fraction <= 0.0 || pool.empty()) return pool;
  const Eigen::Index d = values.cols();
  std::vector<double> lo(static_cast<std::size_t>(d)), hi(static_cast<std::size_t>(d));
  std::vector<double> col(pool.size());
  auto quantile = [&](double q) {
    double pos = q * static_cast<double>(col.size() - 1);
    auto a = static_cast<std::size_t>(std::floor(pos));
    auto b = std::min(a + 1, col.size() - 1);
    return col[a] + (pos - static_cast<double>(a)) * (col[b] - col[a]);
  };
  for (Eigen::Index j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < pool.size(); ++i)
      col[i] = values(static_cast<Eigen::Index>(pool[i]), j);
    std::sort(col.begin(), col.end());
    lo[static_cast<std::size_t>(j)] = quantile(fraction);
    hi[static_cast<std::size_t>(j)] = quantile(1.0 - fraction);
  }
  std::vector<std::size_t> kept;
  kept.reserve(pool.size());
  for (std::size_t r : pool) {
    bool inside = true;
    for (Eigen::Index j = 0; j < d && inside; ++j) {
      double v = values(static_cast<Eigen::Index>(r), j);
      inside = v >= lo[static_cast<std::size_t>(j)] && v <= hi[static_cast<std::size_t>(j)];
    }
    if (inside) kept.push_back(r);
  }
  return kept;
}

// Every floor(N / count)-th element starting at the first.
inline std::vector<std::size_t> systematic_sample(const std::vector<std::size_t>& pool,
                                                  std::size_t count) {
  require(count <= pool.size(), ErrorCategory::infeasible,
          "systematic sample of " + std::to_string(count) + " from a pool of " +
              std::to_string(pool.size()));
  std::vector<std::size_t> out;
  if (count == 0) return out;
  const std::size_t stride = pool.size() / count;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(pool[i * stride]);
  return out;
}

inline std::size_t class_count_request(const std::optional<std::size_t>& req, std::size_t available,
                                       const std::string& what) {
  std::size_t n = req.value_or(available);
  require(n <= available, ErrorCategory::infeasible,
          what + ": requested " + std::to_string(n) + ", only " + std::to_string(available) +
              " available");
  return n;
}

inline Splits preprocess(const RawTable& table, const SplitSpec& spec) {
  require(spec.trim_fraction >= 0.0 && spec.trim_fraction < 0.5, ErrorCategory::config,
          "trimming fraction must lie in [0, 0.5)");
  require(spec.train_normals >= 2, ErrorCategory::config, "need at least 2 training rows");

  std::vector<std::size_t> normals, attacks;
  for (std::size_t i = 0; i < table.rows(); ++i)
    (table.labels[i] == Label::normal ? normals : attacks).push_back(i);

  Splits out;
  std::mt19937_64 rng(spec.seed);

  std::vector<std::size_t> pool = trim_rows(table.values, normals, spec.trim_fraction);
  out.trimmed_rows = normals.size() - pool.size();
  require(spec.train_normals <= pool.size(), ErrorCategory::infeasible,
          "training set needs " + std::to_string(spec.train_normals) + " normals, " +
              std::to_string(pool.size()) + " remain after trimming");
  if (spec.mode == SamplingMode::systematic) {
    out.train_rows = systematic_sample(pool, spec.train_normals);
  } else {
    std::vector<std::size_t> shuffled = pool;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    shuffled.resize(spec.train_normals);
    std::sort(shuffled.begin(), shuffled.end());
    out.train_rows = std::move(shuffled);
  }

  std::vector<std::size_t> rest_normals;
  {
    std::set<std::size_t> used(out.train_rows.begin(), out.train_rows.end());
    for (std::size_t r : normals)
      if (!used.count(r)) rest_normals.push_back(r);
  }
  std::vector<std::size_t> rest_attacks = attacks;
  if (spec.mode == SamplingMode::random) {
    std::shuffle(rest_normals.begin(), rest_normals.end(), rng);
    std::shuffle(rest_attacks.begin(), rest_attacks.end(), rng);
  }

  std::size_t vn = class_count_request(spec.validation_normals, rest_normals.size(),
                                       "validation normals");
  std::size_t va = class_count_request(spec.validation_attacks, rest_attacks.size(),
                                       "validation attacks");
  std::size_t tn = class_count_request(spec.test_normals, rest_normals.size() - vn, "test normals");
  std::size_t ta = class_count_request(spec.test_attacks, rest_attacks.size() - va, "test attacks");

  auto take = [](const std::vector<std::size_t>& src, std::size_t from, std::size_t count) {
    return std::vector<std::size_t>(src.begin() + static_cast<std::ptrdiff_t>(from),
                                    src.begin() + static_cast<std::ptrdiff_t>(from + count));
  };
  out.validation_rows = take(rest_normals, 0, vn);
  auto va_rows = take(rest_attacks, 0, va);
  out.validation_rows.insert(out.validation_rows.end(), va_rows.begin(), va_rows.end());
  out.test_rows = take(rest_normals, vn, tn);
  auto ta_rows = take(rest_attacks, va, ta);
  out.test_rows.insert(out.test_rows.end(), ta_rows.begin(), ta_rows.end());

  auto gather = [&](const std::vector<std::size_t>& rows) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), table.values.cols());
    for (std::size_t i = 0; i < rows.size(); ++i)
      m.row(static_cast<Eigen::Index>(i)) = table.values.row(static_cast<Eigen::Index>(rows[i]));
    return m;
  };
  Matrix train = gather(out.train_rows);

  // Drop features that are constant on the training normals.
  std::vector<std::size_t> constant = constant_columns(train);
  require(constant.size() < static_cast<std::size_t>(train.cols()), ErrorCategory::data,
          "all features are constant on the training set");
  std::vector<Eigen::Index> keep;
  std::vector<std::string> names;
  for (Eigen::Index j = 0; j < train.cols(); ++j) {
    if (std::find(constant.begin(), constant.end(), static_cast<std::size_t>(j)) != constant.end()) {
      out.removed_features.push_back(table.feature_names[static_cast<std::size_t>(j)]);
    } else {
      keep.push_back(j);
      names.push_back(table.feature_names[static_cast<std::size_t>(j)]);
    }
  }
  auto select = [&](const Matrix& m) {
    Matrix s(m.rows(), static_cast<Eigen::Index>(keep.size()));
    for (std::size_t j = 0; j < keep.size(); ++j) s.col(static_cast<Eigen::Index>(j)) = m.col(keep[j]);
    return s;
  };
  train = select(train);
  Matrix val = select(gather(out.validation_rows));
  Matrix test = select(gather(out.test_rows));

  if (spec.quantiles) {
    out.quantile = QuantileTransform::fit(train, *spec.quantiles);
    train = out.quantile->apply(train);
    val = out.quantile->apply(val);
    test = out.quantile->apply(test);
    // the quantile map can collapse a feature that was non-constant before
    auto collapsed = constant_columns(train);
    require(collapsed.empty(), ErrorCategory::data,
            "quantile transform collapsed a training feature to a constant");
  }
  out.scaler = Scaler::fit(train);

  auto labels_of = [&](const std::vector<std::size_t>& rows) {
    std::vector<Label> l;
    l.reserve(rows.size());
    for (std::size_t r : rows) l.push_back(table.labels[r]);
    return l;
  };
  out.train = DataMatrix{out.scaler.apply(train), names, {}, table.name, "train"};
  out.validation = DataMatrix{out.scaler.apply(val), names, labels_of(out.validation_rows),
                              table.name, "validation"};
  out.test = DataMatrix{out.scaler.apply(test), names, labels_of(out.test_rows), table.name, "test"};
  return out;
}

struct ClassCounts {
  std::size_t normals = 0;
  std::size_t attacks = 0;
};

inline ClassCounts class_counts(const DataMatrix& split) {
  require(!split.labels.empty(), ErrorCategory::data, "split '" + split.role + "' has no labels");
  ClassCounts c;
  for (Label l : split.labels) (l == Label::normal ? c.normals : c.attacks) += 1;
  return c;
}

inline nlohmann::json split_manifest(const Splits& s) {
  nlohmann::json j;
  auto counts = [](const DataMatrix& m) {
    if (m.labels.empty()) return nlohmann::json{{"normals", m.rows()}, {"attacks", 0}};
    auto c = class_counts(m);
    return nlohmann::json{{"normals", c.normals}, {"attacks", c.attacks}};
  };
  j["features"] = s.train.feature_names;
  j["removed_features"] = s.removed_features;
  j["trimmed_rows"] = s.trimmed_rows;
  j["counts"] = {{"train", counts(s.train)},
                 {"validation", counts(s.validation)},
                 {"test", counts(s.test)}};
  j["indices"] = {{"train", s.train_rows}, {"validation", s.validation_rows}, {"test", s.test_rows}};
  j["scaler"] = {{"mean", std::vector<double>(s.scaler.mean.data(),
                                              s.scaler.mean.data() + s.scaler.mean.size())},
                 {"stddev", std::vector<double>(s.scaler.stddev.data(),
                                                s.scaler.stddev.data() + s.scaler.stddev.size())}};
  if (s.quantile) j["quantiles"] = s.quantile->references.rows();
  return j;
}

// Synthetic intrusion-style corpus. Normal traffic follows a latent factor
// model with a geometrically decaying spectrum; attacks are shifted along the
// leading factors and carry extra energy in the trailing directions.
struct SyntheticSpec {
  std::size_t normals = 20000;
  std::size_t attacks = 8000;
  std::size_t features = 20;
  std::size_t latent = 8;
  double decay = 0.72;        // ratio between consecutive latent scales
  double leading_scale = 3.0;
  double noise = 0.35;
  double attack_shift = 2.5;
  double attack_minor = 1.2;  // stddev of the attack energy outside the latent span
  std::size_t constant_features = 0;
  std::uint64_t seed = 7;
  std::string name = "synthetic";
};

inline RawTable make_synthetic(const SyntheticSpec& spec) {
  require(spec.features >= 2 && spec.latent >= 1 && spec.latent <= spec.features,
          ErrorCategory::config, "synthetic corpus needs 1 <= latent <= features, features >= 2");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(spec.features);
  const auto r = static_cast<Eigen::Index>(spec.latent);

  // Random orthonormal basis; the first `latent` columns carry normal traffic.
  Matrix g(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j) g(i, j) = gauss(rng);
  Matrix basis = Eigen::HouseholderQR<Matrix>(g).householderQ();
  Vector scales(r);
  for (Eigen::Index j = 0; j < r; ++j) scales(j) = spec.leading_scale * std::pow(spec.decay, j);
  Vector offset(d);
  for (Eigen::Index i = 0; i < d; ++i) offset(i) = 5.0 * gauss(rng);

  Vector shift = Vector::Zero(d);
  for (Eigen::Index j = 0; j < std::min<Eigen::Index>(3, r); ++j) shift += basis.col(j) * (j == 0 ? 1.0 : 0.5);
  shift.normalize();
  shift *= spec.attack_shift * spec.leading_scale;

  const std::size_t n = spec.normals + spec.attacks;
  const Eigen::Index total_cols = d + static_cast<Eigen::Index>(spec.constant_features);
  RawTable t;
  t.name = spec.name;
  t.label_column = "label";
  t.values.resize(static_cast<Eigen::Index>(n), total_cols);
  for (Eigen::Index j = 0; j < total_cols; ++j)
    t.feature_names.push_back(j < d ? "f" + std::to_string(j) : "const" + std::to_string(j - d));

  // Interleave classes so the corpus order does not encode the label.
  std::vector<Label> order(n, Label::normal);
  std::fill(order.begin() + static_cast<std::ptrdiff_t>(spec.normals), order.end(), Label::attack);
  std::shuffle(order.begin(), order.end(), rng);

  for (std::size_t i = 0; i < n; ++i) {
    Vector x = offset;
    for (Eigen::Index j = 0; j < r; ++j) x += basis.col(j) * (scales(j) * gauss(rng));
    for (Eigen::Index j = 0; j < d; ++j) x(j) += spec.noise * gauss(rng);
    if (order[i] == Label::attack) {
      x += shift * (0.5 + std::abs(gauss(rng)));
      for (Eigen::Index j = r; j < d; ++j) x += basis.col(j) * (spec.attack_minor * gauss(rng));
    }
    auto row = static_cast<Eigen::Index>(i);
    t.values.row(row).head(d) = x.transpose();
    for (Eigen::Index j = d; j < total_cols; ++j) t.values(row, j) = 1.0;
    t.labels.push_back(order[i]);
    t.raw_labels.push_back(order[i] == Label::normal ? "normal" : "attack");
  }
  t.constant_columns = constant_columns(t.values);
  return t;
}

inline void write_csv(std::ostream& out, const RawTable& t) {
  out.precision(17);
  for (const auto& f : t.feature_names) out << f << ',';
  out << t.label_column << '\n';
  for (Eigen::Index i = 0; i < t.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.values.cols(); ++j) out << t.values(i, j) << ',';
    out << t.raw_labels[static_cast<std::size_t>(i)] << '\n';
  }
}

}  // namespace qadv
