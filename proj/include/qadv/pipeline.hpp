#pragma once

// Config-driven runs: data preparation, detector fitting and evaluation,
// crossover grids, tomography and q-means studies, QRAM reports, and a run
// manifest listing every output with its SHA-256.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "qadv/advantage.hpp"
#include "qadv/data.hpp"
#include "qadv/detectors.hpp"
#include "qadv/error.hpp"
#include "qadv/pca.hpp"
#include "qadv/qmeans.hpp"
#include "qadv/qpca.hpp"
#include "qadv/qsim.hpp"

namespace qadv {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum class DetectorVariant { pcc_major, pcc_major_minor, ensemble, recon };

inline DetectorVariant parse_detector(const std::string& s) {
  if (s == "pcc_major") return DetectorVariant::pcc_major;
  if (s == "pcc_major_minor") return DetectorVariant::pcc_major_minor;
  if (s == "ensemble") return DetectorVariant::ensemble;
  if (s == "recon") return DetectorVariant::recon;
  fail(ErrorCategory::config, "unknown detector variant: " + s);
}

struct CrossoverSettings {
  CostVariant variant = CostVariant::pcc_major_only;
  double n_min = 1e3;
  double n_max = 1e12;
  std::size_t per_decade = 4;
  std::vector<double> d_grid{10, 20, 50, 100, 200};
  GrowthModel growth = GrowthModel::fixed;
  double qmeans_iterations = 1.0;
  std::optional<DatasetParams> params;  // supplied instead of measured
};

struct ResourceSettings {
  double n = 1e7;
  double d = 44;
  std::vector<QramConfig> configs{QramConfig::optimistic(), QramConfig::realistic()};
};

struct TomographySettings {
  std::string vector = "first_component";  // first_component | basis | random | explicit
  std::vector<double> explicit_vector;
  std::size_t dim = 55;
  std::vector<double> delta_grid{0.3, 0.1, 0.05, 0.03};
  std::vector<std::size_t> budgets{20861};
  std::size_t repetitions = 1000;
  double heuristic_divisor = 1.0;
  std::size_t histogram_bins = 20;
};

struct QmeansSettings {
  std::vector<std::size_t> k_grid{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  double delta = 0.0005;
  double distance_epsilon = 0.0005;
  double failure_delta = 0.0;
  std::size_t rows = 10000;
  std::size_t component = 0;
};

struct RunConfig {
  std::optional<std::string> dataset_path;
  DatasetSchema schema;
  char delimiter = ',';
  std::optional<SyntheticSpec> synthetic;
  SplitSpec split;
  DetectorVariant detector = DetectorVariant::pcc_major;
  QpcaRequest qpca;
  std::vector<double> alpha_grid{0.01, 0.02, 0.04, 0.06, 0.08, 0.10};
  std::optional<std::size_t> recon_k;
  std::optional<double> recon_threshold;
  std::vector<double> delta_grid{0.01, 0.1, 0.9, 2.0};
  std::vector<std::uint64_t> seeds{1};
  std::string output_dir = "out";
  CrossoverSettings crossover;
  ResourceSettings resources;
  TomographySettings tomography;
  QmeansSettings qmeans;
  json source;  // the config as read

  void validate() const {
    require(!seeds.empty(), ErrorCategory::config, "seeds must be non-empty");
    require(dataset_path.has_value() != synthetic.has_value(), ErrorCategory::config,
            "exactly one of dataset.path and synthetic must be given");
    if (dataset_path)
      require(fs::exists(*dataset_path), ErrorCategory::io, "dataset not found: " + *dataset_path);
    for (double a : alpha_grid)
      require(a > 0.0 && a < 1.0, ErrorCategory::config, "alpha values must lie in (0, 1)");
    for (double d : delta_grid) require(d > 0.0, ErrorCategory::config, "delta grid values must be > 0");
    qpca.validate();
  }
};

// --- config parsing ------------------------------------------------------------

namespace detail {

template <typename T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

template <typename T>
void read_if(const json& j, const char* key, std::optional<T>& out) {
  if (!j.contains(key)) return;
  if (j.at(key).is_null()) out.reset();
  else out = j.at(key).get<T>();
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = std::any_of(known.begin(), known.end(), [&](const char* k) { return it.key() == k; });
    require(ok, ErrorCategory::config, "unknown key '" + it.key() + "' in " + where);
  }
}

inline DatasetParams parse_params(const json& j) {
  reject_unknown(j, {"n", "d", "spectral_norm", "frobenius_norm", "mu", "kappa", "sigma_min", "theta", "theta_min",
                     "p_major", "p_minor", "k", "q", "eta_norm", "n_measured"},
                 "crossover.params");
  DatasetParams p;
  read_if(j, "n", p.n);
  read_if(j, "d", p.d);
  read_if(j, "spectral_norm", p.spectral_norm);
  read_if(j, "frobenius_norm", p.frobenius_norm);
  read_if(j, "mu", p.mu);
  read_if(j, "kappa", p.kappa);
  read_if(j, "sigma_min", p.sigma_min);
  read_if(j, "theta", p.theta);
  read_if(j, "theta_min", p.theta_min);
  read_if(j, "p_major", p.p_major);
  read_if(j, "p_minor", p.p_minor);
  read_if(j, "k", p.k);
  read_if(j, "q", p.q);
  read_if(j, "eta_norm", p.eta_norm);
  p.n_measured = p.n;
  read_if(j, "n_measured", p.n_measured);
  return p;
}

inline json params_json(const DatasetParams& p) {
  return json{{"n", p.n},         {"d", p.d},         {"spectral_norm", p.spectral_norm},
              {"frobenius_norm", p.frobenius_norm}, {"mu", p.mu}, {"kappa", p.kappa},
              {"sigma_min", p.sigma_min}, {"theta", p.theta}, {"theta_min", p.theta_min},
              {"p_major", p.p_major}, {"p_minor", p.p_minor}, {"k", p.k}, {"q", p.q},
              {"eta_norm", p.eta_norm}, {"n_measured", p.n_measured}};
}

inline QramConfig parse_qram(const json& j) {
  if (j.is_string()) return qram_preset(j.get<std::string>());
  reject_unknown(j, {"preset", "label", "word_bits", "gate_error", "magic_state_failure", "cycle_time_s",
                     "allow_extrapolation"},
                 "resources.configs");
  QramConfig c = j.contains("preset") ? qram_preset(j.at("preset").get<std::string>()) : QramConfig{};
  read_if(j, "label", c.label);
  read_if(j, "word_bits", c.word_bits);
  read_if(j, "gate_error", c.gate_error);
  read_if(j, "magic_state_failure", c.magic_state_failure);
  read_if(j, "cycle_time_s", c.cycle_time_s);
  read_if(j, "allow_extrapolation", c.allow_extrapolation);
  return c;
}

}  // namespace detail

// Relative dataset paths resolve against `base_dir` (the config's directory).
inline RunConfig parse_config(const json& j, const fs::path& base_dir = {}) {
  using detail::read_if;
  detail::reject_unknown(j, {"dataset", "synthetic", "split", "detector", "errors", "alpha_grid", "recon", "seeds",
                             "output_dir", "crossover", "resources", "tomography", "qmeans"},
                         "config");
  RunConfig c;
  c.source = j;
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    detail::reject_unknown(d, {"path", "label_column", "normal_labels", "attack_labels", "delimiter",
                               "reject_non_numeric"},
                           "dataset");
    fs::path p = d.at("path").get<std::string>();
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    c.dataset_path = p.string();
    read_if(d, "label_column", c.schema.label_column);
    read_if(d, "normal_labels", c.schema.normal_labels);
    read_if(d, "attack_labels", c.schema.attack_labels);
    read_if(d, "reject_non_numeric", c.schema.reject_non_numeric);
    if (d.contains("delimiter")) {
      auto s = d.at("delimiter").get<std::string>();
      require(s.size() == 1, ErrorCategory::config, "delimiter must be a single character");
      c.delimiter = s[0];
    }
  }
  if (j.contains("synthetic")) {
    const auto& s = j.at("synthetic");
    detail::reject_unknown(s, {"normals", "attacks", "features", "latent", "decay", "leading_scale", "noise",
                               "attack_shift", "attack_minor", "constant_features", "seed", "name"},
                           "synthetic");
    SyntheticSpec spec;
    read_if(s, "normals", spec.normals);
    read_if(s, "attacks", spec.attacks);
    read_if(s, "features", spec.features);
    read_if(s, "latent", spec.latent);
    read_if(s, "decay", spec.decay);
    read_if(s, "leading_scale", spec.leading_scale);
    read_if(s, "noise", spec.noise);
    read_if(s, "attack_shift", spec.attack_shift);
    read_if(s, "attack_minor", spec.attack_minor);
    read_if(s, "constant_features", spec.constant_features);
    read_if(s, "seed", spec.seed);
    read_if(s, "name", spec.name);
    c.synthetic = spec;
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    detail::reject_unknown(s, {"train_normals", "validation_normals", "validation_attacks", "test_normals",
                               "test_attacks", "mode", "trim_fraction", "quantiles", "seed"},
                           "split");
    read_if(s, "train_normals", c.split.train_normals);
    read_if(s, "validation_normals", c.split.validation_normals);
    read_if(s, "validation_attacks", c.split.validation_attacks);
    read_if(s, "test_normals", c.split.test_normals);
    read_if(s, "test_attacks", c.split.test_attacks);
    read_if(s, "trim_fraction", c.split.trim_fraction);
    read_if(s, "quantiles", c.split.quantiles);
    read_if(s, "seed", c.split.seed);
    if (s.contains("mode")) {
      auto m = s.at("mode").get<std::string>();
      require(m == "systematic" || m == "random", ErrorCategory::config, "split.mode must be systematic or random");
      c.split.mode = m == "random" ? SamplingMode::random : SamplingMode::systematic;
    }
  }
  if (j.contains("detector")) c.detector = parse_detector(j.at("detector").get<std::string>());
  if (j.contains("errors")) {
    const auto& e = j.at("errors");
    detail::reject_unknown(e, {"p", "p_min", "epsilon", "epsilon_theta", "eta", "delta", "gamma", "theta_min",
                               "heuristic_divisor", "vector_noise"},
                           "errors");
    read_if(e, "p", c.qpca.p);
    read_if(e, "p_min", c.qpca.p_min);
    read_if(e, "epsilon", c.qpca.epsilon);
    read_if(e, "epsilon_theta", c.qpca.epsilon_theta);
    read_if(e, "eta", c.qpca.eta);
    read_if(e, "delta", c.qpca.delta);
    read_if(e, "gamma", c.qpca.gamma);
    read_if(e, "theta_min", c.qpca.theta_min);
    read_if(e, "heuristic_divisor", c.qpca.heuristic_divisor);
    if (e.contains("vector_noise")) {
      auto v = e.at("vector_noise").get<std::string>();
      require(v == "injected" || v == "tomography", ErrorCategory::config,
              "errors.vector_noise must be injected or tomography");
      c.qpca.vector_noise = v == "tomography" ? VectorNoise::tomography : VectorNoise::injected;
    }
  }
  read_if(j, "alpha_grid", c.alpha_grid);
  if (j.contains("recon")) {
    const auto& r = j.at("recon");
    detail::reject_unknown(r, {"k", "threshold", "delta_grid"}, "recon");
    read_if(r, "k", c.recon_k);
    read_if(r, "threshold", c.recon_threshold);
    read_if(r, "delta_grid", c.delta_grid);
  }
  read_if(j, "seeds", c.seeds);
  read_if(j, "output_dir", c.output_dir);
  if (j.contains("crossover")) {
    const auto& x = j.at("crossover");
    detail::reject_unknown(x, {"variant", "n_min", "n_max", "per_decade", "d_grid", "growth", "qmeans_iterations",
                               "params"},
                           "crossover");
    if (x.contains("variant")) c.crossover.variant = parse_cost_variant(x.at("variant").get<std::string>());
    read_if(x, "n_min", c.crossover.n_min);
    read_if(x, "n_max", c.crossover.n_max);
    read_if(x, "per_decade", c.crossover.per_decade);
    read_if(x, "d_grid", c.crossover.d_grid);
    read_if(x, "qmeans_iterations", c.crossover.qmeans_iterations);
    if (x.contains("growth")) {
      auto g = x.at("growth").get<std::string>();
      require(g == "fixed" || g == "sqrt_n", ErrorCategory::config, "crossover.growth must be fixed or sqrt_n");
      c.crossover.growth = g == "sqrt_n" ? GrowthModel::sqrt_n : GrowthModel::fixed;
    }
    if (x.contains("params")) c.crossover.params = detail::parse_params(x.at("params"));
  }
  if (j.contains("resources")) {
    const auto& r = j.at("resources");
    detail::reject_unknown(r, {"n", "d", "configs"}, "resources");
    read_if(r, "n", c.resources.n);
    read_if(r, "d", c.resources.d);
    if (r.contains("configs")) {
      c.resources.configs.clear();
      for (const auto& q : r.at("configs")) c.resources.configs.push_back(detail::parse_qram(q));
    }
  }
  if (j.contains("tomography")) {
    const auto& t = j.at("tomography");
    detail::reject_unknown(t, {"vector", "dim", "delta_grid", "budgets", "repetitions", "heuristic_divisor",
                               "histogram_bins"},
                           "tomography");
    if (t.contains("vector")) {
      if (t.at("vector").is_array()) {
        c.tomography.vector = "explicit";
        c.tomography.explicit_vector = t.at("vector").get<std::vector<double>>();
      } else {
        c.tomography.vector = t.at("vector").get<std::string>();
        require(c.tomography.vector == "first_component" || c.tomography.vector == "basis" ||
                    c.tomography.vector == "random",
                ErrorCategory::config, "tomography.vector must be first_component, basis, random or a list");
      }
    }
    read_if(t, "dim", c.tomography.dim);
    read_if(t, "delta_grid", c.tomography.delta_grid);
    read_if(t, "budgets", c.tomography.budgets);
    read_if(t, "repetitions", c.tomography.repetitions);
    read_if(t, "heuristic_divisor", c.tomography.heuristic_divisor);
    read_if(t, "histogram_bins", c.tomography.histogram_bins);
  }
  if (j.contains("qmeans")) {
    const auto& q = j.at("qmeans");
    detail::reject_unknown(q, {"k_grid", "delta", "distance_epsilon", "failure_delta", "rows", "component"},
                           "qmeans");
    read_if(q, "k_grid", c.qmeans.k_grid);
    read_if(q, "delta", c.qmeans.delta);
    read_if(q, "distance_epsilon", c.qmeans.distance_epsilon);
    read_if(q, "failure_delta", c.qmeans.failure_delta);
    read_if(q, "rows", c.qmeans.rows);
    read_if(q, "component", c.qmeans.component);
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCategory::io, "cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorCategory::config, "config is not valid JSON: " + std::string(e.what()));
  }
  try {
    return parse_config(j, fs::path(path).parent_path());
  } catch (const json::exception& e) {
    fail(ErrorCategory::config, "config has a value of the wrong type: " + std::string(e.what()));
  }
}

// --- data and models ---------------------------------------------------------------

inline RawTable load_table(const RunConfig& cfg) {
  if (cfg.synthetic) return make_synthetic(*cfg.synthetic);
  std::ifstream in(*cfg.dataset_path);
  require(static_cast<bool>(in), ErrorCategory::io, "cannot open dataset: " + *cfg.dataset_path);
  return parse_dataset(in, cfg.schema, fs::path(*cfg.dataset_path).stem().string(), cfg.delimiter);
}

inline Splits prepare_data(const RunConfig& cfg) { return preprocess(load_table(cfg), cfg.split); }

// Rows used to calibrate PCC thresholds: validation normals when present,
// otherwise the training split.
inline Matrix calibration_normals(const Splits& s) {
  if (s.validation.rows() > 0) {
    bool any = std::any_of(s.validation.labels.begin(), s.validation.labels.end(),
                           [](Label l) { return l == Label::normal; });
    if (any) return detail::normal_rows(s.validation);
  }
  return s.train.values;
}

struct MetricsRow {
  double key = 0.0;  // α or δ
  Metrics classical;
  Metrics quantum;  // median over seeds
  std::vector<Metrics> per_seed;
};

struct FitReport {
  DetectorVariant variant = DetectorVariant::pcc_major;
  PcaModel exact;
  VarianceSelection major;
  std::optional<VarianceSelection> minor;
  std::vector<QpcaResult> quantum;  // per seed
  std::vector<MetricsRow> rows;
  std::optional<double> recon_threshold;
  std::size_t recon_k = 0;
};

inline Metrics median_metrics(const std::vector<Metrics>& ms) {
  require(!ms.empty(), ErrorCategory::data, "no metrics to aggregate");
  auto med = [&](double Metrics::*f) {
    std::vector<double> v;
    for (const auto& m : ms) v.push_back(m.*f);
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  return {med(&Metrics::recall), med(&Metrics::precision), med(&Metrics::f1), med(&Metrics::accuracy)};
}

// Run `fn(seed)` for every seed on a worker pool; results in seed order.
template <typename Fn>
auto for_each_seed(const std::vector<std::uint64_t>& seeds, Fn fn) {
  using R = decltype(fn(seeds.front()));
  std::vector<std::future<R>> jobs;
  for (auto s : seeds) jobs.push_back(std::async(std::launch::async, fn, s));
  std::vector<R> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

inline bool wants_minor(DetectorVariant v) {
  return v == DetectorVariant::pcc_major_minor || v == DetectorVariant::ensemble;
}

inline VarianceSelection classical_minor_selection(const PcaModel& exact, const QpcaRequest& req) {
  if (req.theta_min) return select_by_threshold(exact, *req.theta_min, SelectionMode::minor);
  require(req.p_min.has_value(), ErrorCategory::config, "minor components need errors.theta_min or errors.p_min");
  return select_for_variance(exact, *req.p_min, SelectionMode::minor);
}

inline FitReport run_pcc(const Splits& s, const RunConfig& cfg) {
  FitReport r;
  r.variant = cfg.detector;
  r.exact = fit_exact_pca(s.train);
  r.major = select_for_variance(r.exact, cfg.qpca.p, SelectionMode::major);
  const bool minor = wants_minor(cfg.detector);
  std::optional<PcaModel> minor_model;
  if (minor) {
    r.minor = classical_minor_selection(r.exact, cfg.qpca);
    require(r.minor->count() > 0, ErrorCategory::infeasible, "no minor components selected");
    minor_model = subset(r.exact, r.minor->indices);
  }
  PccModel classical = make_pcc(subset(r.exact, r.major.indices), minor_model);

  r.quantum = for_each_seed(cfg.seeds, [&](std::uint64_t seed) {
    NoiseContext ctx(seed);
    return fit_qpca(r.exact, cfg.qpca, ctx, minor);
  });
  const Matrix normals = calibration_normals(s);
  const Matrix& z = s.test.values;

  auto evaluate_at = [&](PccModel m, double alpha) {
    if (cfg.detector == DetectorVariant::ensemble) {
      EnsembleModel e = make_ensemble(m);
      calibrate(e, normals, alpha);
      return evaluate(classify(z, e), s.test.labels);
    }
    calibrate(m, normals, alpha);
    return evaluate(classify(z, m), s.test.labels);
  };
  for (double alpha : cfg.alpha_grid) {
    MetricsRow row;
    row.key = alpha;
    row.classical = evaluate_at(classical, alpha);
    for (const auto& q : r.quantum) row.per_seed.push_back(evaluate_at(make_pcc(q.major, q.minor), alpha));
    row.quantum = median_metrics(row.per_seed);
    r.rows.push_back(std::move(row));
  }
  return r;
}

// The leading k components as a selection, threshold halfway across the gap.
inline VarianceSelection leading_selection(const PcaModel& exact, std::size_t k) {
  require(k >= 1 && k <= exact.rank, ErrorCategory::config, "k must lie in [1, rank]");
  VarianceSelection sel;
  for (std::size_t i = 0; i < k; ++i) {
    sel.indices.push_back(i);
    sel.explained += exact.factor_ratio(i);
  }
  const auto kk = static_cast<Eigen::Index>(k);
  sel.threshold = k < exact.size() ? 0.5 * (exact.singular_values(kk - 1) + exact.singular_values(kk))
                                   : 0.5 * exact.singular_values(kk - 1);
  return sel;
}

inline FitReport run_recon(const Splits& s, const RunConfig& cfg) {
  FitReport r;
  r.variant = DetectorVariant::recon;
  r.exact = fit_exact_pca(s.train);
  r.major = cfg.recon_k ? leading_selection(r.exact, *cfg.recon_k)
                        : select_for_variance(r.exact, cfg.qpca.p, SelectionMode::major);
  r.recon_k = r.major.count();
  ReconModel classical = make_recon(r.exact, r.recon_k);
  double t;
  if (cfg.recon_threshold) {
    t = *cfg.recon_threshold;
  } else {
    require(!s.validation.labels.empty(), ErrorCategory::config,
            "recon needs recon.threshold or a labelled validation split to tune it");
    t = tune_threshold_f1(recon_scores(s.validation.values, classical), s.validation.labels);
  }
  set_threshold(classical, t);
  r.recon_threshold = t;
  const Metrics c = evaluate(classify(s.test.values, classical), s.test.labels);

  for (double delta : cfg.delta_grid) {
    QpcaRequest req = cfg.qpca;
    req.delta = delta;
    auto per_seed = for_each_seed(cfg.seeds, [&](std::uint64_t seed) {
      NoiseContext ctx(seed);
      QpcaResult q = fit_qpca(r.exact, req, ctx, false);
      ReconModel m{q.major, 0.0, false};
      set_threshold(m, t);
      return std::pair{evaluate(classify(s.test.values, m), s.test.labels), std::move(q)};
    });
    MetricsRow row;
    row.key = delta;
    row.classical = c;
    for (auto& [m, q] : per_seed) {
      row.per_seed.push_back(m);
      if (delta == cfg.delta_grid.back()) r.quantum.push_back(std::move(q));
    }
    row.quantum = median_metrics(row.per_seed);
    r.rows.push_back(std::move(row));
  }
  return r;
}

inline FitReport run_fit(const Splits& s, const RunConfig& cfg) {
  return cfg.detector == DetectorVariant::recon ? run_recon(s, cfg) : run_pcc(s, cfg);
}

// --- table writers ---------------------------------------------------------------------

namespace detail {
inline std::string fixed(double v, int digits = 6) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(digits) << v;
  return o.str();
}
}  // namespace detail

// alpha(%), then (c, q) pairs for recall, precision, F1, accuracy.
inline void write_alpha_table(std::ostream& out, const FitReport& r) {
  out << "alpha_pct,recall_c,recall_q,precision_c,precision_q,f1_c,f1_q,accuracy_c,accuracy_q\n";
  for (const auto& row : r.rows) {
    using detail::fixed;
    out << fixed(100.0 * row.key, 2) << ',' << fixed(row.classical.recall) << ',' << fixed(row.quantum.recall) << ','
        << fixed(row.classical.precision) << ',' << fixed(row.quantum.precision) << ',' << fixed(row.classical.f1)
        << ',' << fixed(row.quantum.f1) << ',' << fixed(row.classical.accuracy) << ','
        << fixed(row.quantum.accuracy) << "\n";
  }
}

// delta, then (q, c) pairs, matching the reconstruction-loss table.
inline void write_delta_table(std::ostream& out, const FitReport& r) {
  out << "delta,recall_q,recall_c,precision_q,precision_c,f1_q,f1_c,accuracy_q,accuracy_c\n";
  for (const auto& row : r.rows) {
    using detail::fixed;
    out << detail::fixed(row.key, 4) << ',' << fixed(row.quantum.recall) << ',' << fixed(row.classical.recall) << ','
        << fixed(row.quantum.precision) << ',' << fixed(row.classical.precision) << ',' << fixed(row.quantum.f1)
        << ',' << fixed(row.classical.f1) << ',' << fixed(row.quantum.accuracy) << ','
        << fixed(row.classical.accuracy) << "\n";
  }
}

inline void write_per_seed(std::ostream& out, const FitReport& r, const std::vector<std::uint64_t>& seeds) {
  const bool recon = r.variant == DetectorVariant::recon;
  out << (recon ? "delta" : "alpha_pct") << ",seed,recall,precision,f1,accuracy\n";
  for (const auto& row : r.rows)
    for (std::size_t i = 0; i < row.per_seed.size(); ++i) {
      const auto& m = row.per_seed[i];
      out << detail::fixed(recon ? row.key : 100.0 * row.key, recon ? 4 : 2) << ',' << seeds[i] << ','
          << detail::fixed(m.recall) << ',' << detail::fixed(m.precision) << ',' << detail::fixed(m.f1) << ','
          << detail::fixed(m.accuracy) << "\n";
    }
}

// --- manifest ----------------------------------------------------------------------------

inline std::string sha256_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  require(static_cast<bool>(in), ErrorCategory::io, "cannot read " + p.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  require(ctx != nullptr, ErrorCategory::io, "hash context allocation failed");
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 15];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream o;
  for (unsigned i = 0; i < len; ++i) o << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return o.str();
}

// Records every file written during a run; the manifest itself is written on
// success and on failure.
class RunOutputs {
 public:
  RunOutputs(std::string command, const RunConfig& cfg) : command_(std::move(command)), dir_(cfg.output_dir) {
    config_ = cfg.source;
    seeds_ = cfg.seeds;
    std::error_code ec;
    fs::create_directories(dir_, ec);
    require(!ec, ErrorCategory::io, "cannot create output directory " + dir_.string());
  }

  const fs::path& dir() const { return dir_; }

  template <typename Fn>
  void write(const std::string& name, Fn&& fill) {
    fs::path p = dir_ / name;
    {
      std::ofstream out(p, std::ios::binary);
      require(static_cast<bool>(out), ErrorCategory::io, "cannot write " + p.string());
      fill(out);
      require(static_cast<bool>(out), ErrorCategory::io, "write failed for " + p.string());
    }
    files_.push_back(name);
  }

  void finish(const std::string& status, const std::string& error = {}) const {
    json m;
    m["command"] = command_;
    m["status"] = status;
    if (!error.empty()) m["error"] = error;
    m["seeds"] = seeds_;
    m["config"] = config_;
    json files = json::array();
    for (const auto& f : files_) files.push_back({{"path", f}, {"sha256", sha256_file(dir_ / f)}});
    m["files"] = files;
    std::ofstream out(dir_ / "manifest.json", std::ios::binary);
    out << m.dump(2) << "\n";
  }

  const std::vector<std::string>& files() const { return files_; }

 private:
  std::string command_;
  fs::path dir_;
  json config_;
  std::vector<std::uint64_t> seeds_;
  std::vector<std::string> files_;
};

template <typename Fn>
void run_with_manifest(const std::string& command, const RunConfig& cfg, Fn&& body) {
  RunOutputs outputs(command, cfg);
  try {
    body(outputs);
  } catch (const Error& e) {
    outputs.finish("failed", std::string(to_string(e.category())) + ": " + e.what());
    throw;
  } catch (const std::exception& e) {
    outputs.finish("failed", e.what());
    throw;
  }
  outputs.finish("completed");
}

// --- commands ------------------------------------------------------------------------------

inline void cmd_fit(const RunConfig& cfg) {
  cfg.validate();
  run_with_manifest("fit", cfg, [&](RunOutputs& out) {
    Splits s = prepare_data(cfg);
    out.write("splits.json", [&](std::ostream& o) { o << split_manifest(s).dump(2) << "\n"; });
    FitReport r = run_fit(s, cfg);
    out.write("model_exact.txt", [&](std::ostream& o) { write_model(o, r.exact); });
    for (std::size_t i = 0; i < r.quantum.size(); ++i) {
      const auto seed = std::to_string(cfg.seeds[i]);
      out.write("model_quantum_major_seed" + seed + ".txt", [&](std::ostream& o) { write_model(o, r.quantum[i].major); });
      if (r.quantum[i].minor)
        out.write("model_quantum_minor_seed" + seed + ".txt",
                  [&](std::ostream& o) { write_model(o, *r.quantum[i].minor); });
    }
    if (r.variant == DetectorVariant::recon) {
      out.write("metrics_delta.csv", [&](std::ostream& o) { write_delta_table(o, r); });
    } else {
      out.write("metrics_alpha.csv", [&](std::ostream& o) { write_alpha_table(o, r); });
    }
    out.write("metrics_per_seed.csv", [&](std::ostream& o) { write_per_seed(o, r, cfg.seeds); });
  });
}

// Dataset-dependent cost parameters from the training split.
inline DatasetParams measure_from_data(const RunConfig& cfg, const Splits& s) {
  PcaModel exact = fit_exact_pca(s.train);
  VarianceSelection major = cfg.crossover.variant == CostVariant::recon && cfg.recon_k
                                ? leading_selection(exact, *cfg.recon_k)
                                : select_for_variance(exact, cfg.qpca.p, SelectionMode::major);
  std::optional<VarianceSelection> minor;
  if (cfg.crossover.variant == CostVariant::pcc_major_minor) minor = classical_minor_selection(exact, cfg.qpca);
  return measure_params(s.train.values, exact, major, minor);
}

inline QuantumErrorParams error_params(const RunConfig& cfg) {
  QuantumErrorParams e;
  e.epsilon = cfg.qpca.epsilon;
  e.epsilon_theta = cfg.qpca.epsilon_theta;
  e.eta = cfg.qpca.eta;
  e.delta = cfg.crossover.variant == CostVariant::qmeans ? cfg.qmeans.delta : cfg.qpca.delta;
  e.gamma = cfg.qpca.gamma;
  e.heuristic_divisor = cfg.qpca.heuristic_divisor;
  return e;
}

inline CrossoverReport run_crossover(const RunConfig& cfg, const DatasetParams& params) {
  CostModel cost;
  cost.variant = cfg.crossover.variant;
  cost.qmeans_iterations = cfg.crossover.qmeans_iterations;
  return find_crossover(params, error_params(cfg), cost,
                        log_grid(cfg.crossover.n_min, cfg.crossover.n_max, cfg.crossover.per_decade),
                        cfg.crossover.d_grid, cfg.crossover.growth);
}

inline void cmd_crossover(const RunConfig& cfg) {
  require(!cfg.seeds.empty(), ErrorCategory::config, "seeds must be non-empty");
  if (!cfg.crossover.params) cfg.validate();
  run_with_manifest("crossover", cfg, [&](RunOutputs& out) {
    DatasetParams params = cfg.crossover.params ? *cfg.crossover.params : measure_from_data(cfg, prepare_data(cfg));
    out.write("params.json", [&](std::ostream& o) { o << detail::params_json(params).dump(2) << "\n"; });
    CrossoverReport r = run_crossover(cfg, params);
    out.write("crossover_grid.csv", [&](std::ostream& o) { write_crossover_csv(o, r); });
    out.write("crossover_frontier.csv", [&](std::ostream& o) { write_frontier_csv(o, r); });
  });
}

inline Vector tomography_target(const RunConfig& cfg) {
  const auto& t = cfg.tomography;
  if (t.vector == "explicit") {
    Vector v = Eigen::Map<const Vector>(t.explicit_vector.data(), static_cast<Eigen::Index>(t.explicit_vector.size()));
    require(v.size() > 0 && v.norm() > 0.0, ErrorCategory::config, "tomography vector must be non-zero");
    return v.normalized();
  }
  require(t.dim >= 1, ErrorCategory::config, "tomography.dim must be >= 1");
  if (t.vector == "basis") {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(t.dim));
    v(0) = 1.0;
    return v;
  }
  if (t.vector == "random") {
    std::mt19937_64 rng(cfg.seeds.front());
    std::normal_distribution<double> g(0.0, 1.0);
    Vector v(static_cast<Eigen::Index>(t.dim));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = g(rng);
    return v.normalized();
  }
  cfg.validate();
  PcaModel exact = fit_exact_pca(prepare_data(cfg).train);
  return exact.component(0);
}

struct TomographyStudy {
  Vector target;
  std::vector<TomographyStudyRow> by_delta;
  std::vector<TomographyStudyRow> by_budget;
  std::vector<std::vector<double>> budget_errors;  // per budget, per trial
};

inline TomographyStudy run_tomography_study(const RunConfig& cfg, const Vector& target) {
  const auto& t = cfg.tomography;
  TomographyStudy st;
  st.target = target;
  NoiseContext ctx(cfg.seeds.front());
  st.by_delta = tomography_study(target, t.delta_grid, t.repetitions, ctx, t.heuristic_divisor);
  for (std::size_t b : t.budgets) {
    auto errs = tomography_errors(target, fixed_budget_plan(static_cast<std::size_t>(target.size()), b),
                                  t.repetitions, ctx, NormMode::l2);
    TomographyStudyRow row;
    row.samples = b;
    row.median = empirical_quantile(errs, 0.5);
    row.p05 = empirical_quantile(errs, 0.05);
    row.p95 = empirical_quantile(errs, 0.95);
    st.by_budget.push_back(row);
    st.budget_errors.push_back(std::move(errs));
  }
  return st;
}

inline void cmd_tomography_study(const RunConfig& cfg) {
  require(!cfg.seeds.empty(), ErrorCategory::config, "seeds must be non-empty");
  run_with_manifest("tomography-study", cfg, [&](RunOutputs& out) {
    const Vector target = tomography_target(cfg);
    TomographyStudy st = run_tomography_study(cfg, target);
    const auto d = static_cast<std::size_t>(target.size());
    out.write("tomography_samples.csv", [&](std::ostream& o) {
      o << "# d=" << d << " repetitions=" << cfg.tomography.repetitions
        << " heuristic_divisor=" << detail::fixed(cfg.tomography.heuristic_divisor, 3) << "\n";
      for (const auto& row : st.by_delta)
        o << "# delta=" << detail::fixed(row.delta, 4) << " theoretical_samples=" << row.theoretical_samples << "\n";
      o << "delta,theoretical_samples,samples,median_l2_error,p05_l2_error,p95_l2_error\n";
      for (const auto& row : st.by_delta)
        o << detail::fixed(row.delta, 4) << ',' << row.theoretical_samples << ',' << row.samples << ','
          << detail::fixed(row.median, 8) << ',' << detail::fixed(row.p05, 8) << ',' << detail::fixed(row.p95, 8)
          << "\n";
    });
    out.write("tomography_errors.csv", [&](std::ostream& o) {
      o << "samples,trial,l2_error\n";
      for (std::size_t b = 0; b < st.by_budget.size(); ++b)
        for (std::size_t i = 0; i < st.budget_errors[b].size(); ++i)
          o << st.by_budget[b].samples << ',' << i << ',' << detail::fixed(st.budget_errors[b][i], 8) << "\n";
    });
    out.write("tomography_histogram.csv", [&](std::ostream& o) {
      o << "samples,bin_low,bin_high,count\n";
      const std::size_t bins = std::max<std::size_t>(1, cfg.tomography.histogram_bins);
      for (std::size_t b = 0; b < st.by_budget.size(); ++b) {
        const auto& e = st.budget_errors[b];
        if (e.empty()) continue;
        const double hi = *std::max_element(e.begin(), e.end());
        const double width = hi > 0.0 ? hi / static_cast<double>(bins) : 1.0;
        std::vector<std::size_t> counts(bins, 0);
        for (double v : e) counts[std::min(bins - 1, static_cast<std::size_t>(v / width))]++;
        for (std::size_t i = 0; i < bins; ++i)
          o << st.by_budget[b].samples << ',' << detail::fixed(width * static_cast<double>(i), 8) << ','
            << detail::fixed(width * static_cast<double>(i + 1), 8) << ',' << counts[i] << "\n";
      }
    });
  });
}

inline void cmd_resources(const RunConfig& cfg) {
  run_with_manifest("resources", cfg, [&](RunOutputs& out) {
    for (const auto& q : cfg.resources.configs) {
      ResourceEstimate r = qram_estimate(cfg.resources.n, cfg.resources.d, q);
      out.write("resources_" + (q.label.empty() ? std::string("custom") : q.label) + ".txt",
                [&](std::ostream& o) { write_resource_report(o, r); });
    }
  });
}

struct QmeansStudyRow {
  std::size_t k = 0;
  double ch_classical = 0.0;  // medians over seeds
  double ch_quantum = 0.0;
  double relative_difference = 0.0;
  std::vector<double> per_seed_classical;
  std::vector<double> per_seed_quantum;
  std::vector<std::size_t> iterations_classical;
  std::vector<std::size_t> iterations_quantum;
};

namespace detail {
inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace detail

// One-dimensional projection onto a principal component of the training split,
// over train, validation and test rows in that order, capped at `rows`.
inline Matrix qmeans_projection(const Splits& s, std::size_t component, std::size_t rows) {
  PcaModel exact = fit_exact_pca(s.train);
  require(component < exact.size(), ErrorCategory::config, "qmeans.component exceeds the model size");
  const Vector e = exact.component(component);
  std::vector<double> v;
  for (const DataMatrix* m : {&s.train, &s.validation, &s.test})
    for (Eigen::Index i = 0; i < m->values.rows() && v.size() < rows; ++i) v.push_back(m->values.row(i).dot(e));
  require(v.size() == rows, ErrorCategory::data,
          "corpus has " + std::to_string(v.size()) + " rows, q-means study needs " + std::to_string(rows));
  return Eigen::Map<Matrix>(v.data(), static_cast<Eigen::Index>(v.size()), 1);
}

inline std::vector<QmeansStudyRow> run_qmeans_study(const Matrix& x, const RunConfig& cfg) {
  const auto& q = cfg.qmeans;
  QmeansOptions opt;
  opt.delta = q.delta;
  opt.distance_epsilon = q.distance_epsilon;
  opt.failure_delta = q.failure_delta;
  std::vector<QmeansStudyRow> rows;
  for (std::size_t k : q.k_grid) {
    struct One {
      double cc, cq;
      std::size_t ic, iq;
    };
    auto per = for_each_seed(cfg.seeds, [&](std::uint64_t seed) {
      Matrix init = kmeans_plus_plus(x, k, seed);
      ClusteringResult c = kmeans(x, init);
      NoiseContext ctx(seed);
      ClusteringResult qr = qmeans_fit(x, init, opt, ctx);
      return One{ch_index(x, c), ch_index(x, qr), c.iterations, qr.iterations};
    });
    QmeansStudyRow row;
    row.k = k;
    for (const auto& o : per) {
      row.per_seed_classical.push_back(o.cc);
      row.per_seed_quantum.push_back(o.cq);
      row.iterations_classical.push_back(o.ic);
      row.iterations_quantum.push_back(o.iq);
    }
    row.ch_classical = detail::median(row.per_seed_classical);
    row.ch_quantum = detail::median(row.per_seed_quantum);
    row.relative_difference = std::abs(row.ch_quantum - row.ch_classical) / std::abs(row.ch_classical);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void cmd_qmeans_study(const RunConfig& cfg) {
  cfg.validate();
  run_with_manifest("qmeans-study", cfg, [&](RunOutputs& out) {
    Matrix x = qmeans_projection(prepare_data(cfg), cfg.qmeans.component, cfg.qmeans.rows);
    auto rows = run_qmeans_study(x, cfg);
    out.write("qmeans_ch.csv", [&](std::ostream& o) {
      o << "n_k,ch_classical,ch_quantum,relative_difference\n";
      for (const auto& r : rows)
        o << r.k << ',' << detail::fixed(r.ch_classical) << ',' << detail::fixed(r.ch_quantum) << ','
          << detail::fixed(r.relative_difference, 8) << "\n";
    });
    out.write("qmeans_per_seed.csv", [&](std::ostream& o) {
      o << "n_k,seed,ch_classical,ch_quantum,iterations_classical,iterations_quantum\n";
      for (const auto& r : rows)
        for (std::size_t i = 0; i < r.per_seed_classical.size(); ++i)
          o << r.k << ',' << cfg.seeds[i] << ',' << detail::fixed(r.per_seed_classical[i]) << ','
            << detail::fixed(r.per_seed_quantum[i]) << ',' << r.iterations_classical[i] << ','
            << r.iterations_quantum[i] << "\n";
    });
  });
}

}  // namespace qadv
